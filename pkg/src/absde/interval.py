"""Backward induction for one ordinary BSDE on a grid-aligned interval.

Inside ``[t_a, t_b]`` the anticipated arguments are read from values that
are already known, so the interval is a plain BSDE with terminal value
``Y(t_b)``.  The scheme is explicit backward Euler with a few Picard
passes in the ``y`` slot::

    Z_k     = (Y_{k+1}(j+1) - Y_{k+1}(j)) / (2 sqrt(dt))
    y^0     = E[Y_{k+1} | node]
    y^{m+1} = y^0 + dt * f(t_k, y^m, Z_k, query)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteValue
from .generators import GeneratorSpec
from .lattice import BinomialLattice
from .surface import SolutionSurface, resolve_anticipated_query

DEFAULT_PICARD = 3


class AnticipationContext:
    """Read handle onto the solved part of a surface, producing queries."""

    def __init__(self, surface: SolutionSurface, lat: BinomialLattice, delays):
        self.surface = surface
        self.lat = lat
        self.delays = delays

    def query(self, k: int):
        return resolve_anticipated_query(self.surface, self.lat, k, self.delays)


class _InertContext:
    """Context for drifts proven not to read the query."""

    def __init__(self, query):
        self._query = query

    def query(self, k):
        return self._query


def backward_step(lat: BinomialLattice, k: int, next_Y, gen: GeneratorSpec, future,
                  picard_iterations: int = DEFAULT_PICARD):
    """One step from ``k + 1`` to ``k``; returns ``(Y_k, Z_k)`` tables."""
    next_Y = np.asarray(next_Y, dtype=float)
    dt = lat.grid.step
    t = lat.grid.time(k)
    z = lat.increment_projection_table(next_Y)
    base = lat.one_step_average(next_Y)
    q = future.query(k)
    y = base
    for m in range(picard_iterations):
        drift = np.broadcast_to(np.asarray(gen.drift(t, y, z, q), dtype=float), base.shape)
        bad = np.flatnonzero(~np.isfinite(drift))
        if bad.size:
            raise NonFiniteValue(
                f"drift {gen.name!r} is not finite at step {k}, node {bad[0]}, pass {m + 1}",
                step=k, node=int(bad[0]), iteration=m + 1)
        y = base + dt * drift
    return y, z


@dataclass
class IntervalProblem:
    k_a: int
    k_b: int
    terminal_values: np.ndarray
    generator: GeneratorSpec
    future: object
    picard_iterations: int = DEFAULT_PICARD

    def __post_init__(self):
        if not self.k_a < self.k_b:
            raise ValueError("interval must satisfy t_a < t_b")
        self.terminal_values = np.asarray(self.terminal_values, dtype=float)
        if self.terminal_values.shape != (self.k_b + 1,):
            raise ValueError("terminal_values must have one entry per node at t_b")
        if not np.all(np.isfinite(self.terminal_values)):
            raise NonFiniteValue("terminal values are not finite", step=self.k_b)


def solve_interval(problem: IntervalProblem, lat: BinomialLattice, surface: SolutionSurface,
                   terminal_z=None):
    """Fill steps ``k_a .. k_b - 1`` of ``surface`` and return the fragment.

    Step ``k_b`` keeps its ``Y = terminal_values`` and the ``Z`` already on
    the surface; when the surface has no ``Z`` there yet, ``terminal_z`` is
    used.  The fragment is ``{k: (Y_k, Z_k)}`` for ``k_a <= k <= k_b``.
    """
    kb = problem.k_b
    if surface.Z[kb] is None:
        if terminal_z is None:
            raise ValueError(f"no Z available at the interval end, step {kb}")
        surface.set_step(kb, problem.terminal_values, terminal_z)
    else:
        surface.set_step(kb, problem.terminal_values, surface.Z[kb])
    fragment = {kb: (surface.Y[kb], surface.Z[kb])}
    y_next = problem.terminal_values
    for k in range(kb - 1, problem.k_a - 1, -1):
        y, z = backward_step(lat, k, y_next, problem.generator, problem.future,
                             problem.picard_iterations)
        surface.set_step(k, y, z)
        fragment[k] = (surface.Y[k], surface.Z[k])
        y_next = y
    return fragment
