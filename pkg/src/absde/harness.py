"""Comparison, equality and convergence experiments."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .conditions import ConditionReport, SamplerConfig, check_order_conditions_sampled
from .config import ExperimentConfig
from .errors import ConfigError, PreconditionFailed
from .fixtures import get_fixture
from .lattice import BinomialLattice
from .montecarlo import RegressionBasis, simulate_paths, solve_absde_mc
from .solver import solve_absde
from .surface import resolve_anticipated_query

LATTICE_TOL = 1e-8
MC_BIAS = 0.02


@dataclass
class NodeTable:
    """Flat per-node columns of a comparison; ``node`` is an up-count or path id."""

    step: np.ndarray
    time: np.ndarray
    node: np.ndarray
    state: np.ndarray
    y1: np.ndarray
    y2: np.ndarray


@dataclass
class ComparisonReport:
    min_diff: float
    violation_nodes: list
    y0_pair: tuple
    conditions: list
    engine: str
    tolerance: float
    rows: NodeTable | None = field(default=None, repr=False)

    @property
    def violated(self) -> bool:
        return bool(self.violation_nodes) or any(c.refuted for c in self.conditions)

    @property
    def exit_code(self) -> int:
        return 1 if self.violated else 0

    def text(self) -> str:
        lines = [
            f"engine: {self.engine}",
            f"Y1(0) = {self.y0_pair[0]:.12g}, Y2(0) = {self.y0_pair[1]:.12g}",
            f"min over nodes of Y1 - Y2 = {self.min_diff:.6g} (tolerance {self.tolerance:.3g})",
            f"violating nodes: {len(self.violation_nodes)}",
        ]
        for t, state, diff in self.violation_nodes[:10]:
            lines.append(f"  t={t:.6g} state={state:.6g} diff={diff:.6g}")
        lines.extend(c.summary() for c in self.conditions)
        for c in self.conditions:
            lines.extend(f"  note: {n}" for n in c.notes)
        lines.append("result: " + ("VIOLATION" if self.violated else "ordered"))
        return "\n".join(lines)

    def csv_text(self) -> str:
        sink = io.StringIO()
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(["step_index", "time", "node", "state", "Y1", "Y2", "diff"])
        r = self.rows
        for i in range(len(r.step)):
            y1, y2 = float(r.y1[i]), float(r.y2[i])
            writer.writerow([int(r.step[i]), format(float(r.time[i]), ".17g"), int(r.node[i]),
                             format(float(r.state[i]), ".17g"), format(y1, ".17g"),
                             format(y2, ".17g"), format(y1 - y2, ".17g")])
        return sink.getvalue()


def _ordering_conditions(cfg: ExperimentConfig, p1, p2) -> ConditionReport:
    sampler = SamplerConfig(cfg.T, p1.delays, cfg.samples, cfg.seed)
    try:
        return check_order_conditions_sampled(p1.generator, p2.generator, p1.terminal,
                                              p2.terminal, sampler)
    except PreconditionFailed as exc:
        return ConditionReport("refuted", dict(exc.witness, pattern="terminal order",
                                               lhs=exc.witness["xi1"], rhs=exc.witness["xi2"]),
                               sampler.terminal_times * sampler.terminal_states,
                               "terminal order", [str(exc)])


def run_comparison(cfg: ExperimentConfig) -> ComparisonReport:
    """Solve both equations on one driver and compare ``Y1 - Y2`` on [0, T]."""
    grid = cfg.grid()
    p1, p2 = cfg.problem(1, grid), cfg.problem(2, grid)
    conditions = [_ordering_conditions(cfg, p1, p2)]
    if cfg.engine == "lattice":
        s1, s2 = solve_absde(p1), solve_absde(p2)
        lat = BinomialLattice(grid)
        tol = LATTICE_TOL if cfg.tol is None else cfg.tol
        per_step = [(np.arange(k + 1), lat.states(k), s1.Y[k], s2.Y[k])
                    for k in range(grid.index_of_T + 1)]
        y0 = (s1.y0(), s2.y0())
    else:
        ensemble = simulate_paths(cfg.seed, cfg.paths, grid)
        basis = RegressionBasis(cfg.basis_degree)
        r1, r2 = solve_absde_mc(p1, ensemble, basis), solve_absde_mc(p2, ensemble, basis)
        stderr = math.hypot(r1.Y0_stderr, r2.Y0_stderr)
        tol = 3 * stderr + MC_BIAS if cfg.tol is None else cfg.tol
        ids = np.arange(ensemble.n_paths)
        per_step = [(ids, ensemble.paths[:, k], r1.Y[k], r2.Y[k])
                    for k in range(grid.index_of_T + 1)]
        y0 = (r1.Y0_estimate, r2.Y0_estimate)

    rows = NodeTable(
        np.concatenate([np.full(len(p[0]), k) for k, p in enumerate(per_step)]),
        np.concatenate([np.full(len(p[0]), grid.time(k)) for k, p in enumerate(per_step)]),
        np.concatenate([p[0] for p in per_step]),
        np.concatenate([p[1] for p in per_step]),
        np.concatenate([p[2] for p in per_step]),
        np.concatenate([p[3] for p in per_step]),
    )
    diffs = rows.y1 - rows.y2
    bad = np.flatnonzero(diffs < -tol)
    violations = [(float(rows.time[i]), float(rows.state[i]), float(diffs[i])) for i in bad]
    return ComparisonReport(float(diffs.min()), violations, y0, conditions, cfg.engine, tol, rows)


@dataclass
class EqualityReport:
    y0_pair: tuple
    tolerance: float
    left_holds: bool
    terminal_equal: bool
    terminal_max_gap: float
    drift_max_gap: float
    right_holds: bool

    @property
    def co_occur(self) -> bool:
        return self.left_holds == self.right_holds

    def text(self) -> str:
        return "\n".join([
            f"Y1(0) = {self.y0_pair[0]:.12g}, Y2(0) = {self.y0_pair[1]:.12g}",
            f"left side  (Y1(0) = Y2(0)): {self.left_holds}",
            f"right side (xi1(T) = xi2(T) and drifts agree along solution 2): {self.right_holds}",
            f"  max terminal gap at T: {self.terminal_max_gap:.6g}",
            f"  max drift gap along solution 2: {self.drift_max_gap:.6g}",
            f"co-occurrence: {self.co_occur}",
        ])


def run_equality_check(cfg: ExperimentConfig) -> EqualityReport:
    """Check both sides of the ``Y1(0) = Y2(0)`` characterisation on the lattice.

    The two sides are evaluated independently; the report says whether they
    agree on this instance, it does not prove the equivalence.
    """
    if cfg.engine != "lattice":
        raise ConfigError("the equality check runs on the lattice engine only")
    grid = cfg.grid()
    p1, p2 = cfg.problem(1, grid), cfg.problem(2, grid)
    s1, s2 = solve_absde(p1), solve_absde(p2)
    lat = BinomialLattice(grid)
    tol = LATTICE_TOL if cfg.tol is None else cfg.tol

    y0 = (s1.y0(), s2.y0())
    left = abs(y0[0] - y0[1]) <= tol

    n = grid.index_of_T
    terminal_gap = float(np.max(np.abs(s1.Y[n] - s2.Y[n])))
    drift_gap = 0.0
    for k in range(n + 1):
        t = grid.time(k)
        q1 = resolve_anticipated_query(s1, lat, k, p1.delays)
        q2 = resolve_anticipated_query(s2, lat, k, p2.delays)
        f1 = np.asarray(p1.generator.drift(t, s2.Y[k], s2.Z[k], q1), dtype=float)
        f2 = np.asarray(p2.generator.drift(t, s2.Y[k], s2.Z[k], q2), dtype=float)
        drift_gap = max(drift_gap, float(np.max(np.abs(f1 - f2))))
    terminal_equal = terminal_gap <= tol
    right = terminal_equal and drift_gap <= tol
    return EqualityReport(y0, tol, left, terminal_equal, terminal_gap, drift_gap, right)


def run_convergence_study(fixture_name: str, n_list, picard: int = 3):
    """Rows ``(n, Y0, |error|, order)``; order from successive error ratios."""
    fixture = get_fixture(fixture_name)
    rows = []
    prev = None
    for n in n_list:
        y0 = solve_absde(fixture.problem(n, picard)).y0()
        err = abs(y0 - fixture.oracle_y0)
        order = float("nan")
        if prev is not None and prev[1] > 0 and err > 0:
            order = math.log(prev[1] / err) / math.log(n / prev[0])
        rows.append((n, y0, err, order))
        prev = (n, err)
    return rows


def convergence_csv(rows) -> str:
    sink = io.StringIO()
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["n", "Y0", "abs_error", "order"])
    for n, y0, err, order in rows:
        writer.writerow([n, format(y0, ".17g"), format(err, ".17g"),
                         "" if math.isnan(order) else format(order, ".6g")])
    return sink.getvalue()
