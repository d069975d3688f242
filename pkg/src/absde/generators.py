"""Generators, terminal data and the anticipated-query interface.

A drift is called as ``drift(t, y, z, q)``.  The anticipated values
``Y_{t+delta(t)}`` and ``Z_{t+zeta(t)}`` are never handed over directly;
the drift asks ``q.expect(h)`` for ``E[h(Y_{t+delta}, Z_{t+zeta}) | F_t]``.
Drifts must accept numpy arrays for ``y``, ``z`` (one entry per node or
path) and return a broadcastable array.

Query objects cache ``expect`` results keyed on the identity of ``h``,
so built-in drifts use module-level ``h`` functions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError
from .expressions import compile_drift, compile_node_function, take_phi, take_theta


class AnticipatedQuery:
    """Conditional-expectation handle onto the anticipated values.

    ``times`` holds the two (grid-snapped) query times.
    """

    times = (float("nan"), float("nan"))

    def expect(self, h: Callable):
        raise NotImplementedError

    def mean_y(self):
        return self.expect(take_theta)

    def mean_z(self):
        return self.expect(take_phi)


class PointQuery(AnticipatedQuery):
    """Anticipated values known exactly, so ``E[h] = h(theta, phi)``.

    Used by the condition checkers and for the zero-argument query
    ``PointQuery(0.0, 0.0)``.  ``theta`` and ``phi`` may be arrays.
    """

    def __init__(self, theta, phi, times=None):
        self.theta = theta
        self.phi = phi
        if times is not None:
            self.times = times

    def expect(self, h):
        return h(self.theta, self.phi)


ZERO_QUERY = PointQuery(0.0, 0.0)


@dataclass(frozen=True)
class GeneratorSpec:
    name: str
    drift: Callable
    declared_lipschitz_L: float = 1.0

    def __post_init__(self):
        if not self.declared_lipschitz_L > 0:
            raise ValueError("declared_lipschitz_L must be positive")

    def __call__(self, t, y, z, q):
        return self.drift(t, y, z, q)


def evaluate_generator(g: GeneratorSpec, t, y, z, q: AnticipatedQuery):
    return g.drift(t, y, z, q)


@dataclass(frozen=True)
class TerminalData:
    """Terminal segments ``xi(t, b)`` and ``eta(t, b)`` on [T, T + K].

    ``b`` is the Brownian state at ``t``; both maps must accept arrays.
    """

    xi: Callable
    eta: Callable
    description: str = field(default="", compare=False)

    @classmethod
    def constant(cls, xi: float, eta: float = 0.0) -> "TerminalData":
        return cls(_const_node(xi), _const_node(eta), f"xi={xi}, eta={eta}")

    @classmethod
    def from_expressions(cls, xi: str, eta: str) -> "TerminalData":
        return cls(compile_node_function(xi), compile_node_function(eta), f"xi={xi}, eta={eta}")


def _const_node(c):
    c = float(c)

    def fn(t, b):
        return np.full(np.shape(b), c) if np.ndim(b) else c

    return fn


def brownian_terminal(t, b):
    return np.asarray(b, dtype=float) + 0.0


# ---- example drifts -------------------------------------------------------

def _ex31_f1_h(a, b):
    return a + np.sin(2 * a) + np.abs(b) + 2


def _ex31_f2_h(a, b):
    return a + 2 * np.abs(np.cos(a)) + np.sin(b) - 2


def _ex32_f1_h(a, b):
    return a + 2 * np.cos(a) + 1


def _ex32_ftilde_h(a, b):
    return a + np.cos(a)


def _ex32_f2_h(a, b):
    return a + np.sin(2 * a) - 2


def _expect_drift(h):
    def drift(t, y, z, q):
        return q.expect(h) + 0.0 * np.asarray(y, dtype=float)

    drift.uses_query = True
    return drift


def zero_drift(t, y, z, q):
    return 0.0 * np.asarray(y, dtype=float)


zero_drift.uses_query = False


def constant_drift(c: float):
    c = float(c)

    def drift(t, y, z, q):
        return c + 0.0 * np.asarray(y, dtype=float)

    drift.uses_query = False
    return drift


def shifted_linear_drift(shift: float):
    """``E[theta] + shift``."""
    shift = float(shift)

    def drift(t, y, z, q):
        return q.expect(take_theta) + shift + 0.0 * np.asarray(y, dtype=float)

    drift.uses_query = True
    return drift


def example31_f1() -> GeneratorSpec:
    return GeneratorSpec("example31_f1", _expect_drift(_ex31_f1_h), 3.0)


def example31_f2() -> GeneratorSpec:
    return GeneratorSpec("example31_f2", _expect_drift(_ex31_f2_h), 3.0)


def example32_f1() -> GeneratorSpec:
    return GeneratorSpec("example32_f1", _expect_drift(_ex32_f1_h), 3.0)


def example32_ftilde() -> GeneratorSpec:
    return GeneratorSpec("example32_ftilde", _expect_drift(_ex32_ftilde_h), 2.0)


def example32_f2() -> GeneratorSpec:
    return GeneratorSpec("example32_f2", _expect_drift(_ex32_f2_h), 3.0)


def zero() -> GeneratorSpec:
    return GeneratorSpec("zero", zero_drift, 1.0)


def constant(c: float) -> GeneratorSpec:
    return GeneratorSpec(f"constant({float(c):g})", constant_drift(c), 1.0)


def linear_anticipated() -> GeneratorSpec:
    return GeneratorSpec("linear_anticipated", shifted_linear_drift(0.0), 1.0)


REGISTRY = {
    "example31_f1": example31_f1,
    "example31_f2": example31_f2,
    "example32_f1": example32_f1,
    "example32_ftilde": example32_ftilde,
    "example32_f2": example32_f2,
    "zero": zero,
    "linear_anticipated": linear_anticipated,
}

_CONSTANT_RE = re.compile(r"^constant\(\s*([-+0-9.eE]+)\s*\)$")


def generator_from_text(text: str, lipschitz: float | None = None) -> GeneratorSpec:
    """Resolve a registry name, ``constant(c)`` or a drift expression."""
    text = text.strip()
    if text in REGISTRY:
        g = REGISTRY[text]()
    elif (m := _CONSTANT_RE.match(text)):
        try:
            g = constant(float(m.group(1)))
        except ValueError:
            raise ConfigError(f"bad constant in {text!r}") from None
    else:
        g = GeneratorSpec(text, compile_drift(text), 1.0)
    if lipschitz is not None:
        g = GeneratorSpec(g.name, g.drift, float(lipschitz))
    return g
