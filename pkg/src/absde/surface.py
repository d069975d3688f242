"""Solution surfaces on the lattice and the lattice-backed anticipated query."""

from __future__ import annotations

import csv
import io

import numpy as np

from .errors import UnsolvedRegion
from .generators import AnticipatedQuery
from .lattice import BinomialLattice, TimeGrid, binomial_weights
from .partition import evaluate_map, snap_index


class SolutionSurface:
    """``Y`` and ``Z`` tables for every step of a grid.

    ``Y[k]`` and ``Z[k]`` are arrays of length ``k + 1`` (lattice), or
    ``None`` while step ``k`` is still unsolved.
    """

    def __init__(self, grid: TimeGrid):
        self.grid = grid
        self.Y = [None] * (grid.n_steps_total + 1)
        self.Z = [None] * (grid.n_steps_total + 1)
        self._frozen = False

    def is_solved(self, k: int) -> bool:
        return 0 <= k < len(self.Y) and self.Y[k] is not None and self.Z[k] is not None

    def set_step(self, k: int, y, z) -> None:
        if self._frozen:
            raise RuntimeError("surface is frozen")
        self.Y[k] = np.asarray(y, dtype=float)
        self.Z[k] = np.asarray(z, dtype=float)

    def freeze(self) -> "SolutionSurface":
        for arr in self.Y + self.Z:
            if arr is not None:
                arr.setflags(write=False)
        self._frozen = True
        return self

    def y0(self) -> float:
        return float(self.Y[0][0])

    def steps(self):
        return range(len(self.Y))

    def all_finite(self) -> bool:
        return all(a is not None and np.all(np.isfinite(a)) for a in self.Y + self.Z)


def query_steps(grid: TimeGrid, delays, k: int):
    """Grid steps of ``t_k + delta(t_k)`` and ``t_k + zeta(t_k)`` (nearest, ties up)."""
    t = np.array([grid.time(k)])
    kd = snap_index(t[0] + evaluate_map(delays.delta, t)[0], grid.step)
    kz = snap_index(t[0] + evaluate_map(delays.zeta, t)[0], grid.step)
    return kd, kz


class LatticeQuery(AnticipatedQuery):
    """Exact ``E[h(Y at kd, Z at kz) | node at step k]`` on the lattice.

    With ``k1 = min(kd, kz)`` the inner expectation over the later time is
    taken first, giving a table at ``k1``, which is then averaged back to
    step ``k``.  This is the joint two-time law applied to ``h``.
    ``node`` restricts the answer to one up-count (a scalar result).
    """

    def __init__(self, lat: BinomialLattice, k: int, y_table, z_table, kd: int, kz: int, node=None):
        self.lat = lat
        self.k = k
        self.kd, self.kz = kd, kz
        self.y_table = y_table
        self.z_table = z_table
        self.node = node
        self.times = (lat.grid.time(kd), lat.grid.time(kz))
        self._cache = {}

    def _table(self, h):
        kd, kz = self.kd, self.kz
        k1 = min(kd, kz)
        span = abs(kz - kd)
        base = np.arange(k1 + 1)[:, None]
        later = base + np.arange(span + 1)[None, :]
        if kd <= kz:
            a = self.y_table[np.broadcast_to(base, later.shape)]
            b = self.z_table[later]
        else:
            a = self.y_table[later]
            b = self.z_table[np.broadcast_to(base, later.shape)]
        vals = np.asarray(h(a, b), dtype=float)
        vals = np.broadcast_to(vals, later.shape)
        inner = vals @ binomial_weights(span)
        return self.lat.expectation_table(self.k, k1, inner)

    def expect(self, h):
        try:
            return self._cache[h]
        except KeyError:
            pass
        table = self._table(h)
        out = float(table[self.node]) if self.node is not None else table
        self._cache[h] = out
        return out


def resolve_anticipated_query(surface: SolutionSurface, lat: BinomialLattice, node, delays):
    """Query handle for ``node`` (a step index, or a ``(k, j)`` pair).

    The snapped anticipated steps must be strictly later than ``k`` and
    already solved; anything else indicates a partition or snapping defect.
    """
    if isinstance(node, tuple):
        k, j = node
    else:
        k, j = node, None
    kd, kz = query_steps(surface.grid, delays, k)
    for name, kq in (("delta", kd), ("zeta", kz)):
        if kq <= k or not surface.is_solved(kq):
            raise UnsolvedRegion(
                f"anticipated ({name}) step {kq} from step {k} is not in the solved region")
    return LatticeQuery(lat, k, surface.Y[kd], surface.Z[kz], kd, kz, node=j)


SURFACE_HEADER = ["step_index", "time", "up_count", "state", "Y", "Z"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_surface_csv(surface: SolutionSurface, fh=None, last_step=None) -> str:
    """Write one row per node; returns the text when ``fh`` is ``None``."""
    sink = io.StringIO() if fh is None else fh
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(SURFACE_HEADER)
    lat = BinomialLattice(surface.grid)
    stop = len(surface.Y) - 1 if last_step is None else last_step
    for k in range(stop + 1):
        states = lat.states(k)
        for j in range(k + 1):
            writer.writerow([k, _fmt(surface.grid.time(k)), j, _fmt(states[j]),
                             _fmt(surface.Y[k][j]), _fmt(surface.Z[k][j])])
    return sink.getvalue() if fh is None else ""
