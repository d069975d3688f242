"""Recombining binomial model of a scalar Brownian motion on [0, T + K].

Node ``(k, j)`` sits at time ``k * step`` with ``j`` up-moves out of ``k``;
its Brownian state is ``(2j - k) * sqrt(step)``.  Both moves have
probability 1/2, so one increment has mean 0 and variance ``step`` exactly,
and every conditional expectation below is an exact finite average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import IndexOutOfRange


@dataclass(frozen=True)
class TimeGrid:
    step: float
    n_steps_total: int
    index_of_T: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        if not 0 < self.index_of_T <= self.n_steps_total:
            raise ValueError("index_of_T must lie in 1..n_steps_total")

    @property
    def T(self) -> float:
        return self.index_of_T * self.step

    @property
    def K_aligned(self) -> float:
        return (self.n_steps_total - self.index_of_T) * self.step

    def time(self, k: int) -> float:
        return k * self.step

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps_total + 1) * self.step


def build_grid(T: float, K: float, n_steps_on_0T: int) -> TimeGrid:
    """Uniform grid with ``n_steps_on_0T`` steps on [0, T].

    ``K`` is rounded to the nearest multiple of the step (halves round up);
    read the result back from ``TimeGrid.K_aligned``.
    """
    if n_steps_on_0T < 1:
        raise ValueError("n_steps_on_0T must be at least 1")
    if not T > 0:
        raise ValueError("T must be positive")
    if K < 0:
        raise ValueError("K must be nonnegative")
    step = T / n_steps_on_0T
    extra = int(math.floor(K / step + 0.5 + 1e-9))
    return TimeGrid(step, n_steps_on_0T + extra, n_steps_on_0T)


@lru_cache(maxsize=4096)
def _binomial_weights_cached(span: int) -> np.ndarray:
    w = np.ones(1)
    for _ in range(span):
        nxt = np.zeros(w.size + 1)
        nxt[:-1] += 0.5 * w
        nxt[1:] += 0.5 * w
        w = nxt
    w.setflags(write=False)
    return w


def binomial_weights(span: int) -> np.ndarray:
    """Probabilities of ``0..span`` up-moves in ``span`` fair steps.

    Built by repeated one-step averaging, so no large binomial
    coefficients appear.  The returned array is read-only and shared.
    """
    if span < 0:
        raise IndexOutOfRange(f"negative span {span}")
    return _binomial_weights_cached(int(span))


class BinomialLattice:
    """Immutable lattice over a :class:`TimeGrid`.

    Value tables are 1-d arrays indexed by up-count; a table at step ``k``
    has ``k + 1`` entries.
    """

    def __init__(self, grid: TimeGrid):
        self.grid = grid
        self.sqrt_step = math.sqrt(grid.step)

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps_total

    def _check_step(self, k: int) -> None:
        if not 0 <= k <= self.n_steps:
            raise IndexOutOfRange(f"step {k} outside 0..{self.n_steps}")

    def _check_node(self, k: int, j: int) -> None:
        self._check_step(k)
        if not 0 <= j <= k:
            raise IndexOutOfRange(f"up-count {j} outside 0..{k} at step {k}")

    def state(self, k: int, j: int) -> float:
        self._check_node(k, j)
        return (2 * j - k) * self.sqrt_step

    def states(self, k: int) -> np.ndarray:
        self._check_step(k)
        return (2.0 * np.arange(k + 1) - k) * self.sqrt_step

    def node_count(self, k: int) -> int:
        return k + 1

    def _check_table(self, k: int, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != (k + 1,):
            raise IndexOutOfRange(f"table for step {k} must have {k + 1} entries, got {values.shape}")
        return values

    def expectation_table(self, k: int, target_step: int, values) -> np.ndarray:
        """``E[values(target_step) | node (k, j)]`` for every ``j`` at once."""
        self._check_step(k)
        self._check_step(target_step)
        if target_step < k:
            raise IndexOutOfRange(f"target step {target_step} precedes step {k}")
        values = self._check_table(target_step, values)
        if target_step == k:
            return values.copy()
        w = binomial_weights(target_step - k)
        return np.correlate(values, w, mode="valid")

    def conditional_expectation(self, node, target_step: int, values) -> float:
        k, j = node
        self._check_node(k, j)
        self._check_step(target_step)
        if target_step < k:
            raise IndexOutOfRange(f"target step {target_step} precedes step {k}")
        values = self._check_table(target_step, values)
        w = binomial_weights(target_step - k)
        return float(np.dot(w, values[j:j + w.size]))

    def one_step_average(self, next_values) -> np.ndarray:
        """``E[next | node]`` for every node of the step before ``next_values``."""
        v = np.asarray(next_values, dtype=float)
        return 0.5 * (v[1:] + v[:-1])

    def joint_two_time_law(self, node, k1: int, k2: int):
        """Exact law of ``(B at k1, B at k2)`` given ``node``.

        Returns a list of ``((state1, state2), probability)``, one entry per
        pair of reachable up-counts.
        """
        k, j = node
        self._check_node(k, j)
        self._check_step(k1)
        self._check_step(k2)
        if not k <= k1 <= k2:
            raise IndexOutOfRange(f"need {k} <= k1 <= k2, got k1={k1}, k2={k2}")
        w1 = binomial_weights(k1 - k)
        w2 = binomial_weights(k2 - k1)
        law = []
        for m1, p1 in enumerate(w1):
            j1 = j + m1
            s1 = (2 * j1 - k1) * self.sqrt_step
            for m2, p2 in enumerate(w2):
                s2 = (2 * (j1 + m2) - k2) * self.sqrt_step
                law.append(((s1, s2), float(p1 * p2)))
        return law

    def increment_projection(self, node, next_values) -> float:
        """``(next(k+1, j+1) - next(k+1, j)) / (2 sqrt(step))``.

        Discrete estimate of the Brownian exposure of a value one step ahead.
        """
        k, j = node
        self._check_node(k, j)
        self._check_step(k + 1)
        v = self._check_table(k + 1, next_values)
        return float((v[j + 1] - v[j]) / (2.0 * self.sqrt_step))

    def increment_projection_table(self, next_values) -> np.ndarray:
        v = np.asarray(next_values, dtype=float)
        return (v[1:] - v[:-1]) / (2.0 * self.sqrt_step)
