"""Anticipation partition of [0, T] and checks on the delay functions.

The partition ``T = t_0 > t_1 > ... > t_N = 0`` is chosen so that every
anticipated time ``s + delta(s)`` or ``s + zeta(s)`` requested from inside
``[t_i, t_{i-1}]`` lands at or after ``t_{i-1}``.  Solving the intervals from
right to left therefore only ever reads values that are already known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CollapsedKnots, IterationCap, NonPositiveDelay, NoProgress

# Relative slack when comparing scanned values against a knot; keeps float
# noise in ``s + delta(s)`` from pushing a knot one cell to the right.
_COMPARE_EPS = 1e-12


def evaluate_map(fn: Callable, s) -> np.ndarray:
    """Evaluate a time map on an array, falling back to a python loop."""
    s = np.asarray(s, dtype=float)
    try:
        out = np.asarray(fn(s), dtype=float)
        if out.shape == s.shape:
            return out
        if out.ndim == 0:
            return np.full(s.shape, float(out))
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(float(v))) for v in s.ravel()]).reshape(s.shape)


@dataclass(frozen=True)
class DelayPair:
    """The two anticipation delays with their declared bounds.

    ``kind="constant"`` promises that both maps are constant, which lets
    :func:`compute_partition` use the closed form instead of scanning.
    """

    delta: Callable
    zeta: Callable
    horizon_K: float
    dominance_M: float = 1.0
    kind: str = "general"

    def __post_init__(self):
        if self.kind not in ("constant", "general"):
            raise ValueError(f"unknown delay kind {self.kind!r}")
        if self.horizon_K < 0 or self.dominance_M < 0:
            raise ValueError("horizon_K and dominance_M must be nonnegative")

    @classmethod
    def constant(cls, delta: float, zeta: float | None = None, horizon_K: float | None = None,
                 dominance_M: float = 1.0) -> "DelayPair":
        zeta = delta if zeta is None else zeta
        K = max(delta, zeta) if horizon_K is None else horizon_K
        return cls(lambda s, d=float(delta): np.full(np.shape(s), d) if np.ndim(s) else d,
                   lambda s, z=float(zeta): np.full(np.shape(s), z) if np.ndim(s) else z,
                   horizon_K=float(K), dominance_M=dominance_M, kind="constant")

    def combined_reach(self, s) -> np.ndarray:
        """``min(s + delta(s), s + zeta(s))`` evaluated on ``s``."""
        s = np.asarray(s, dtype=float)
        return np.minimum(s + evaluate_map(self.delta, s), s + evaluate_map(self.zeta, s))


@dataclass(frozen=True)
class TimePartition:
    knots: tuple
    T: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "knots", tuple(float(k) for k in self.knots))
        if len(self.knots) < 2:
            raise ValueError("a partition needs at least the knots T and 0")
        object.__setattr__(self, "T", self.knots[0])

    @property
    def count_N(self) -> int:
        return len(self.knots) - 1

    def intervals(self):
        """Yield ``(t_i, t_{i-1})`` pairs, rightmost interval first."""
        for i in range(1, len(self.knots)):
            yield self.knots[i], self.knots[i - 1]


def _check_positive(delays: DelayPair, s: np.ndarray) -> None:
    for name, fn in (("delta", delays.delta), ("zeta", delays.zeta)):
        vals = evaluate_map(fn, s)
        bad = np.flatnonzero(~(vals > 0))
        if bad.size:
            i = bad[0]
            raise NonPositiveDelay(f"{name}({s[i]:.6g}) = {vals[i]:.6g} is not positive")


def scan_grid(T: float, scan_resolution: float) -> np.ndarray:
    """Descending scan points ``T, T - h, ..., 0`` (last point pinned to 0)."""
    n = max(1, math.ceil(T / scan_resolution - 1e-9))
    g = T - scan_resolution * np.arange(n + 1)
    g[-1] = 0.0
    return np.maximum(g, 0.0)


def compute_partition(delays: DelayPair, T: float, scan_resolution: float = 1e-4) -> TimePartition:
    """Knots ``T = t_0 > ... > t_N = 0`` of the anticipation partition.

    Constant delays use ``t_i = max(t_{i-1} - min(delta, zeta), 0)``.
    General delays are handled by a backward scan: with ``m(s)`` the
    combined reach and ``S(t) = min_{s >= t} m(s)`` its running minimum from
    the right, ``t_i`` is the smallest scan point with ``S(t_i) >= t_{i-1}``.
    The scan localises each knot to within one ``scan_resolution`` cell.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if not scan_resolution > 0:
        raise ValueError("scan_resolution must be positive")
    cap = math.ceil(T / scan_resolution) + 1

    if delays.kind == "constant":
        _check_positive(delays, np.array([0.0]))
        step = float(min(evaluate_map(delays.delta, np.array([0.0]))[0],
                         evaluate_map(delays.zeta, np.array([0.0]))[0]))
        # T - i*step rather than repeated subtraction: no drift, and a
        # residue at rounding level is treated as having reached 0
        knots = [float(T)]
        i = 0
        while knots[-1] > 0:
            i += 1
            t = T - i * step
            knots.append(t if t > _COMPARE_EPS * max(1.0, T) else 0.0)
            if len(knots) - 1 > cap:
                raise IterationCap(f"more than {cap} knots")
        return TimePartition(knots)

    grid = scan_grid(T, scan_resolution)
    _check_positive(delays, grid)
    reach = delays.combined_reach(grid)
    running_min = np.minimum.accumulate(reach)  # along descending t
    # searchsorted wants ascending keys
    ascending = running_min[::-1]

    knots = [float(T)]
    prev_index = 0
    while knots[-1] > 0:
        target = knots[-1] - _COMPARE_EPS * max(1.0, abs(T))
        # first ascending position whose running minimum reaches the target
        pos = int(np.searchsorted(ascending, target, side="left"))
        if pos >= len(grid):
            raise NoProgress(f"no scan point reaches t = {knots[-1]:.6g}")
        index = len(grid) - 1 - pos
        if index <= prev_index:
            raise NoProgress(
                f"knot stuck at {knots[-1]:.6g}: effective delay below scan resolution")
        knots.append(float(grid[index]))
        prev_index = index
        if len(knots) - 1 > cap:
            raise IterationCap(f"more than {cap} knots")
    return TimePartition(knots)


def snap_index(t, step: float):
    """Nearest grid index of ``t`` with ties resolved upward."""
    x = np.asarray(t, dtype=float) / step
    idx = np.floor(x + 0.5 + 1e-9).astype(int)
    return int(idx) if idx.ndim == 0 else idx


def align_partition_to_grid(partition: TimePartition, grid) -> TimePartition:
    """Move every knot to its nearest grid node (ties go up).

    The first knot is pinned to ``T`` and the last to ``0``.  Two knots
    landing on the same node means the grid is too coarse for the delays.
    """
    indices = [grid.index_of_T]
    for knot in partition.knots[1:-1]:
        indices.append(snap_index(knot, grid.step))
    indices.append(0)
    for a, b in zip(indices, indices[1:]):
        if b >= a:
            raise CollapsedKnots(
                f"knots collapse onto grid node {b} (step {grid.step:.6g}); refine the grid")
    return TimePartition([grid.time(i) for i in indices])


@dataclass
class ValidationReport:
    a1_pass: bool
    a1_worst_excess: float
    a1_worst_at: float
    a2_empirical_M: float
    a2_declared_M: float
    a2_pass: bool
    samples: int

    @property
    def ok(self) -> bool:
        return self.a1_pass and self.a2_pass

    def lines(self):
        yield (f"reach bound: {'pass' if self.a1_pass else 'fail'}: worst excess "
               f"{self.a1_worst_excess:.6g} at s = {self.a1_worst_at:.6g}")
        yield (f"dominance bound: {'pass' if self.a2_pass else 'refuted'}: empirical M >= "
               f"{self.a2_empirical_M:.6g} vs declared {self.a2_declared_M:.6g} (advisory)")


def _hat_bank(centers, half_width, u):
    return np.clip(1.0 - np.abs(u[None, :] - centers[:, None]) / half_width, 0.0, None)


def _tail_integrals(values, x):
    """``int_{x_i}^{x_end} values`` for each grid point, trapezoid rule, per row."""
    seg = 0.5 * (values[:, 1:] + values[:, :-1]) * np.diff(x)[None, :]
    tail = np.zeros_like(values)
    tail[:, :-1] = np.cumsum(seg[:, ::-1], axis=1)[:, ::-1]
    return tail


def _empirical_dominance(shift_fn, T, K, sample_count, quad_factor):
    total = T + K
    n_q = max(quad_factor * sample_count, 200)
    u = np.linspace(0.0, total, n_q + 1)
    s = np.linspace(0.0, T, max(int(round(n_q * T / total)), 2) + 1)
    centers = np.linspace(0.0, total, sample_count)
    half_width = max(2.0 * total / sample_count, 4.0 * total / n_q)

    rhs_tail = _tail_integrals(_hat_bank(centers, half_width, u), u)
    shifted = s + evaluate_map(shift_fn, s)
    lhs_tail = _tail_integrals(_hat_bank(centers, half_width, shifted), s)

    t_probe = np.linspace(0.0, T, sample_count)
    lhs = np.stack([np.interp(t_probe, s, row) for row in lhs_tail])
    rhs = np.stack([np.interp(t_probe, u, row) for row in rhs_tail])
    floor = 1e-3 * rhs.max(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > floor, lhs / rhs, 0.0)
    return float(ratio.max())


def validate_delay_assumptions(delays: DelayPair, T: float, sample_count: int = 200,
                               quad_factor: int = 50, rel_tol: float = 1e-3) -> ValidationReport:
    """Sampled check of the reach bound and the dominance bound.

    The dominance bound is probed with a bank of hat functions; the best ratio
    ``int_t^T g(s + delta(s)) ds / int_t^{T+K} g`` over hats and start
    times is a lower bound for any valid ``M``.  Sampling can refute a
    declared ``M`` but never prove it.
    """
    if sample_count < 2:
        raise ValueError("sample_count must be at least 2")
    s = np.linspace(0.0, T, sample_count)
    K = delays.horizon_K
    excess_d = s + evaluate_map(delays.delta, s) - (T + K)
    excess_z = s + evaluate_map(delays.zeta, s) - (T + K)
    excess = np.maximum(excess_d, excess_z)
    worst = int(np.argmax(excess))
    a1_pass = bool(excess[worst] <= 1e-12 * max(1.0, T + K))

    empirical = max(_empirical_dominance(delays.delta, T, K, sample_count, quad_factor),
                    _empirical_dominance(delays.zeta, T, K, sample_count, quad_factor))
    a2_pass = empirical <= delays.dominance_M * (1.0 + rel_tol) + 1e-12
    return ValidationReport(a1_pass, float(excess[worst]), float(s[worst]),
                            empirical, float(delays.dominance_M), bool(a2_pass), sample_count)
