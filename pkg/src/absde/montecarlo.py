"""Monte Carlo engine: simulated Brownian paths plus least-squares regression.

Used as an independent cross-check of the lattice.  Conditional
expectations given ``F_{t_k}`` are estimated by regressing on polynomials in
the Brownian state at step ``k``.  Normal increments come from
``scipy.special.ndtri`` (inverse normal CDF) applied to PCG64 uniforms, a
transform that is fixed so published numbers stay reproducible.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import IllConditioned, NonFiniteValue, UnsolvedRegion
from .generators import ZERO_QUERY, AnticipatedQuery
from .lattice import TimeGrid
from .solver import AbsdeProblem, reads_query, sweep_intervals
from .surface import query_steps

_MAX_CONDITION = 1e10
_HALF_ULP = 2.0 ** -54


@dataclass(frozen=True)
class PathEnsemble:
    paths: np.ndarray
    seed: int
    grid: TimeGrid

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    def increments(self, k: int) -> np.ndarray:
        return self.paths[:, k + 1] - self.paths[:, k]


@dataclass(frozen=True)
class RegressionBasis:
    degree: int = 3

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("basis degree must be at least 1")


def simulate_paths(seed: int, P: int, grid: TimeGrid) -> PathEnsemble:
    """``P`` Brownian paths on the grid, all starting at 0."""
    if P < 2:
        raise ValueError("need at least two paths")
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.random((P, grid.n_steps_total)) + _HALF_ULP
    dB = math.sqrt(grid.step) * ndtri(u)
    paths = np.zeros((P, grid.n_steps_total + 1))
    np.cumsum(dB, axis=1, out=paths[:, 1:])
    paths.setflags(write=False)
    return PathEnsemble(paths, seed, grid)


@dataclass
class RegressionFit:
    coefficients: np.ndarray  # on monomials 1, b, ..., b^q
    stderr: np.ndarray
    fitted: np.ndarray
    condition: float


def fit_conditional(ensemble: PathEnsemble, t_step: int, later_values, basis: RegressionBasis
                    ) -> RegressionFit:
    """Least-squares fit of ``later_values`` on powers of the state at ``t_step``."""
    y = np.asarray(later_values, dtype=float)
    P = ensemble.n_paths
    if y.shape != (P,):
        raise ValueError(f"expected {P} values, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise NonFiniteValue("regression target is not finite", step=t_step)
    q = basis.degree
    if q >= P:
        raise IllConditioned(f"basis degree {q} needs more than {P} paths")

    if y.max() == y.min():
        coef = np.zeros(q + 1)
        coef[0] = y[0]
        return RegressionFit(coef, np.zeros(q + 1), np.full(P, y[0]), 1.0)

    if t_step == 0:
        # every path sits at state 0: only the constant is identifiable
        mean = math.fsum(y) / P
        coef = np.zeros(q + 1)
        coef[0] = mean
        se = np.zeros(q + 1)
        se[0] = float(np.std(y, ddof=1)) / math.sqrt(P)
        return RegressionFit(coef, se, np.full(P, mean), 1.0)

    b = ensemble.paths[:, t_step]
    scale = math.sqrt(ensemble.grid.time(t_step))
    X = np.vander(b / scale, q + 1, increasing=True)
    coef_s, _, rank, sv = np.linalg.lstsq(X, y, rcond=None)
    condition = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if rank < q + 1 or condition > _MAX_CONDITION:
        raise IllConditioned(
            f"regression at step {t_step} is rank deficient (condition {condition:.3g})",
            condition=condition)
    fitted = X @ coef_s
    resid = y - fitted
    sigma2 = float(resid @ resid) / max(P - q - 1, 1)
    cov = sigma2 * np.linalg.inv(X.T @ X)
    powers = scale ** np.arange(q + 1)
    return RegressionFit(coef_s / powers, np.sqrt(np.diag(cov)) / powers, fitted, condition)


def regress_conditional(ensemble: PathEnsemble, t_step: int, later_values,
                        basis: RegressionBasis) -> np.ndarray:
    """Per-path estimates of ``E[later | state at t_step]``."""
    return fit_conditional(ensemble, t_step, later_values, basis).fitted


class MCQuery(AnticipatedQuery):
    """Regression estimate of ``E[h(Y at kd, Z at kz) | F_{t_k}]`` per path."""

    def __init__(self, ensemble, basis, k, y_paths, z_paths, kd, kz):
        self.ensemble = ensemble
        self.basis = basis
        self.k = k
        self.y_paths = y_paths
        self.z_paths = z_paths
        self.times = (ensemble.grid.time(kd), ensemble.grid.time(kz))
        self._cache = {}

    def expect(self, h):
        try:
            return self._cache[h]
        except KeyError:
            pass
        values = np.broadcast_to(np.asarray(h(self.y_paths, self.z_paths), dtype=float),
                                 self.y_paths.shape)
        out = regress_conditional(self.ensemble, self.k, values, self.basis)
        self._cache[h] = out
        return out


@dataclass
class MCSolution:
    Y: list
    Z: list
    Y0_estimate: float
    Y0_stderr: float
    grid: TimeGrid

    def write_csv(self, ensemble: PathEnsemble, fh=None, last_step=None) -> str:
        sink = io.StringIO() if fh is None else fh
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(["step_index", "time", "path_id", "state", "Y", "Z"])
        stop = len(self.Y) - 1 if last_step is None else last_step
        for k in range(stop + 1):
            t = format(self.grid.time(k), ".17g")
            for p in range(ensemble.n_paths):
                writer.writerow([k, t, p, format(float(ensemble.paths[p, k]), ".17g"),
                                 format(float(self.Y[k][p]), ".17g"),
                                 format(float(self.Z[k][p]), ".17g")])
        return sink.getvalue() if fh is None else ""


def solve_absde_mc(problem: AbsdeProblem, ensemble: PathEnsemble,
                   basis: RegressionBasis = RegressionBasis()) -> MCSolution:
    """Same interval sweep as the lattice solver, with regression for ``E``.

    ``Z_k`` is the regression of ``Y_{k+1} dB_k / dt``; anticipated queries
    regress the composite ``h(Y, Z)`` path values directly.
    """
    grid = problem.grid
    if ensemble.grid != grid:
        raise ValueError("ensemble and problem grids differ")
    P = ensemble.n_paths
    n = grid.n_steps_total
    dt = grid.step
    Y = [None] * (n + 1)
    Z = [None] * (n + 1)
    for k in range(grid.index_of_T, n + 1):
        t = grid.time(k)
        b = ensemble.paths[:, k]
        Y[k] = np.broadcast_to(np.asarray(problem.terminal.xi(t, b), dtype=float), (P,)).copy()
        Z[k] = np.broadcast_to(np.asarray(problem.terminal.eta(t, b), dtype=float), (P,)).copy()

    stderr = 0.0
    uses_query = reads_query(problem.generator, problem.T)
    for k_a, k_b in sweep_intervals(problem):
        for k in range(k_b - 1, k_a - 1, -1):
            t = grid.time(k)
            nxt = Y[k + 1]
            base = regress_conditional(ensemble, k, nxt, basis)
            z = regress_conditional(ensemble, k, nxt * ensemble.increments(k) / dt, basis)
            q = ZERO_QUERY
            if uses_query:
                kd, kz = query_steps(grid, problem.delays, k)
                if kd <= k or kz <= k or Y[kd] is None or Z[kz] is None:
                    raise UnsolvedRegion(f"anticipated step ({kd}, {kz}) from step {k} is unsolved")
                q = MCQuery(ensemble, basis, k, Y[kd], Z[kz], kd, kz)
            y = base
            for m in range(problem.picard_iterations):
                drift = np.broadcast_to(np.asarray(problem.generator.drift(t, y, z, q), dtype=float),
                                        (P,))
                if not np.all(np.isfinite(drift)):
                    bad = int(np.flatnonzero(~np.isfinite(drift))[0])
                    raise NonFiniteValue(f"drift not finite at step {k}, path {bad}",
                                         step=k, node=bad, iteration=m + 1)
                y = base + dt * drift
            if k == 0:
                pseudo = nxt + dt * drift
                stderr = float(np.std(pseudo, ddof=1)) / math.sqrt(P)
            Y[k] = np.asarray(y, dtype=float).copy()
            Z[k] = np.asarray(z, dtype=float).copy()
    return MCSolution(Y, Z, float(Y[0][0]), stderr, grid)

