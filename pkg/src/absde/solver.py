"""The interval-by-interval solve of an anticipated BSDE on the lattice."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AnticipatedDependence, CollapsedKnots, NonFiniteValue
from .generators import GeneratorSpec, PointQuery, TerminalData
from .interval import (DEFAULT_PICARD, AnticipationContext, IntervalProblem, _InertContext,
                       solve_interval)
from .lattice import BinomialLattice, TimeGrid
from .partition import (DelayPair, TimePartition, align_partition_to_grid, compute_partition,
                        evaluate_map, snap_index)
from .surface import SolutionSurface, query_steps

_DELAY_SLACK = 1e-9


@dataclass(frozen=True)
class AbsdeProblem:
    T: float
    delays: DelayPair
    generator: GeneratorSpec
    terminal: TerminalData
    grid: TimeGrid
    picard_iterations: int = DEFAULT_PICARD
    scan_resolution: float = 1e-4

    def __post_init__(self):
        if abs(self.grid.T - self.T) > 1e-9 * max(1.0, self.T):
            raise ValueError(f"grid ends its [0, T] part at {self.grid.T}, not T = {self.T}")
        if self.picard_iterations < 1:
            raise ValueError("picard_iterations must be positive")
        times = self.grid.times()[: self.grid.index_of_T + 1]
        shortest = min(evaluate_map(self.delays.delta, times).min(),
                       evaluate_map(self.delays.zeta, times).min())
        if shortest < self.grid.step * (1 - _DELAY_SLACK) and reads_query(self.generator, self.T):
            raise ValueError(
                f"delay {shortest:.6g} is shorter than the grid step {self.grid.step:.6g}; refine the grid")
        reach = times + np.maximum(evaluate_map(self.delays.delta, times),
                                   evaluate_map(self.delays.zeta, times))
        if np.any(snap_index(reach, self.grid.step) > self.grid.n_steps_total):
            raise ValueError(
                f"anticipated times reach beyond T + K_aligned = {self.T + self.grid.K_aligned:.6g}; "
                "increase K")


def fill_terminal_segment(surface: SolutionSurface, lat: BinomialLattice, terminal: TerminalData):
    """Write ``(xi, eta)`` on every node of [T, T + K_aligned]."""
    grid = surface.grid
    for k in range(grid.index_of_T, grid.n_steps_total + 1):
        t = grid.time(k)
        states = lat.states(k)
        y = np.broadcast_to(np.asarray(terminal.xi(t, states), dtype=float), states.shape)
        z = np.broadcast_to(np.asarray(terminal.eta(t, states), dtype=float), states.shape)
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise NonFiniteValue(f"terminal data not finite at step {k}", step=k)
        surface.set_step(k, y.copy(), z.copy())


def grid_partition(grid: TimeGrid, delays: DelayPair) -> TimePartition:
    """The partition rebuilt on grid indices from the snapped query steps.

    ``k_i`` is the smallest index whose snapped anticipated steps, from
    every index in ``[k_i, N]``, are at least ``k_{i-1}``.  Because every
    snapped query step is later than its own step, each knot advances by
    at least one index, so knots never collapse.
    """
    n = grid.index_of_T
    reach = np.array([min(query_steps(grid, delays, k)) for k in range(n + 1)])
    suffix_min = np.minimum.accumulate(reach[::-1])[::-1]
    indices = [n]
    while indices[-1] > 0:
        prev = indices[-1]
        ok = np.flatnonzero(suffix_min[:prev] >= prev)
        indices.append(int(ok[0]) if ok.size else prev - 1)
    return TimePartition([grid.time(i) for i in indices])


def aligned_partition(problem: AbsdeProblem) -> TimePartition:
    """Continuous partition moved onto the grid.

    When the grid is too coarse for rounding to keep the knots apart, the
    partition is rebuilt directly on grid indices instead.
    """
    raw = compute_partition(problem.delays, problem.T, problem.scan_resolution)
    try:
        return align_partition_to_grid(raw, problem.grid)
    except CollapsedKnots:
        return grid_partition(problem.grid, problem.delays)


def reads_query(generator: GeneratorSpec, T: float = 1.0) -> bool:
    """Declared ``uses_query`` flag of the drift, else a sampled probe."""
    flag = getattr(generator.drift, "uses_query", None)
    return probe_query_dependence(generator, T) if flag is None else bool(flag)


def sweep_intervals(problem: AbsdeProblem) -> list:
    """Step-index intervals ``(k_a, k_b)`` of the backward sweep, rightmost first."""
    step = problem.grid.step
    if not reads_query(problem.generator, problem.T):
        return [(0, problem.grid.index_of_T)]
    return [(int(round(t_a / step)), int(round(t_b / step)))
            for t_a, t_b in aligned_partition(problem).intervals()]


def solve_absde(problem: AbsdeProblem) -> SolutionSurface:
    """Solve on [0, T + K] by sweeping the partition intervals right to left.

    Each interval is an ordinary BSDE whose terminal value is the ``Y``
    already computed at its right end.  A drift that never reads its
    anticipated query is solved as one interval on [0, T].
    """
    lat = BinomialLattice(problem.grid)
    surface = SolutionSurface(problem.grid)
    fill_terminal_segment(surface, lat, problem.terminal)
    context = AnticipationContext(surface, lat, problem.delays)
    for k_a, k_b in sweep_intervals(problem):
        sub = IntervalProblem(k_a, k_b, surface.Y[k_b], problem.generator, context,
                              problem.picard_iterations)
        solve_interval(sub, lat, surface)
    return surface.freeze()


def probe_query_dependence(generator: GeneratorSpec, T: float = 1.0, samples: int = 64,
                           seed: int = 12345) -> bool:
    """True when the drift output changes with the anticipated arguments."""
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, T, samples)
    y, z = rng.uniform(-5, 5, (2, samples))
    base = np.asarray(generator.drift(t, y, z, PointQuery(np.zeros(samples), np.zeros(samples))))
    for _ in range(3):
        theta, phi = rng.uniform(-5, 5, (2, samples))
        other = np.asarray(generator.drift(t, y, z, PointQuery(theta, phi)))
        if not np.array_equal(np.broadcast_to(base, (samples,)), np.broadcast_to(other, (samples,))):
            return True
    return False


def solve_plain_bsde(T: float, generator: GeneratorSpec, terminal_Y_at_T, grid: TimeGrid,
                     terminal_Z_at_T=None, picard_iterations: int = DEFAULT_PICARD) -> SolutionSurface:
    """Ordinary BSDE on [0, T] with the same backward engine.

    ``terminal_Y_at_T`` is either a callable of the Brownian state or a
    table over the nodes at T.  Without ``terminal_Z_at_T`` the recorded
    ``Z(T)`` is the numerical state-derivative of the terminal values.
    """
    if probe_query_dependence(generator, T):
        raise AnticipatedDependence(f"generator {generator.name!r} reads its anticipated query")
    plain_grid = TimeGrid(grid.step, grid.index_of_T, grid.index_of_T)
    if abs(plain_grid.T - T) > 1e-9 * max(1.0, T):
        raise ValueError("grid does not end at T")
    lat = BinomialLattice(plain_grid)
    n = plain_grid.index_of_T
    states = lat.states(n)
    y_T = terminal_Y_at_T(states) if callable(terminal_Y_at_T) else terminal_Y_at_T
    y_T = np.broadcast_to(np.asarray(y_T, dtype=float), states.shape).copy()
    if terminal_Z_at_T is None:
        z_T = np.gradient(y_T, states) if n > 0 else np.zeros(1)
    else:
        z_T = terminal_Z_at_T(states) if callable(terminal_Z_at_T) else terminal_Z_at_T
        z_T = np.broadcast_to(np.asarray(z_T, dtype=float), states.shape).copy()
    surface = SolutionSurface(plain_grid)
    context = _InertContext(PointQuery(0.0, 0.0))
    solve_interval(IntervalProblem(0, n, y_T, generator, context, picard_iterations),
                   lat, surface, terminal_z=z_T)
    return surface.freeze()
