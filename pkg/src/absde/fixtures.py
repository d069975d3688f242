"""Named problems with known answers, shared by tests, studies and the CLI.

``oracle_y0`` is the exact continuous-time ``Y(0)``.  ``mc_bias`` is the
allowance, on top of three standard errors, for the gap between the Monte
Carlo and lattice values of ``Y(0)`` on that fixture.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnknownFixture
from .generators import (GeneratorSpec, TerminalData, brownian_terminal, constant,
                         linear_anticipated, zero)
from .lattice import build_grid
from .partition import DelayPair
from .solver import AbsdeProblem


@dataclass(frozen=True)
class Fixture:
    name: str
    T: float
    delays: DelayPair
    generator: GeneratorSpec
    terminal: TerminalData
    oracle_y0: float
    mc_bias: float = 0.02

    def problem(self, n_steps: int, picard: int = 3) -> AbsdeProblem:
        grid = build_grid(self.T, self.delays.horizon_K, n_steps)
        return AbsdeProblem(self.T, self.delays, self.generator, self.terminal, grid, picard)


def _unit_z(t, b):
    return 1.0 + 0.0 * b


def linear_anticipated_fixture() -> Fixture:
    # y(t) = 1 + int_t^1 y(s + 1/2) ds: y = 2 - t on [1/2, 1],
    # y = 17/8 - 3t/2 + t^2/2 on [0, 1/2]
    return Fixture("linear_anticipated", 1.0, DelayPair.constant(0.5, horizon_K=0.5),
                   linear_anticipated(), TerminalData.constant(1.0, 0.0), 2.125)


def martingale_fixture() -> Fixture:
    return Fixture("martingale", 1.0, DelayPair.constant(0.5, horizon_K=0.5), zero(),
                   TerminalData(brownian_terminal, _unit_z, "xi=b, eta=1"), 0.0)


def constant_drift_fixture() -> Fixture:
    return Fixture("constant_drift", 1.0, DelayPair.constant(0.5, horizon_K=0.5), constant(2.0),
                   TerminalData.constant(0.0, 0.0), 2.0)


FIXTURES = {
    "linear_anticipated": linear_anticipated_fixture,
    "martingale": martingale_fixture,
    "constant_drift": constant_drift_fixture,
}


def get_fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise UnknownFixture(f"unknown fixture {name!r}; known: {', '.join(sorted(FIXTURES))}") from None
