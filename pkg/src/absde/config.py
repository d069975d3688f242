"""Flat ``key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored; every key must be known.
Values are kept as the original text so a config round-trips exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .expressions import compile_time_function
from .generators import GeneratorSpec, TerminalData, generator_from_text
from .lattice import TimeGrid, build_grid
from .partition import DelayPair, evaluate_map
from .solver import AbsdeProblem

KEYS = {
    "T": "horizon of the equation (default 1)",
    "K": "length of the terminal segment; default: smallest K satisfying the reach bound",
    "M": "declared dominance constant for the delay check (default 1)",
    "delta": "delay of the anticipated Y, expression in t (default 0.3)",
    "zeta": "delay of the anticipated Z, expression in t (default: same as delta)",
    "scan_resolution": "partition scan resolution (default 1e-4)",
    "generator1": "drift of equation 1: registry name, constant(c) or expression",
    "generator2": "drift of equation 2 (compare, equality, order checks)",
    "L1": "declared Lipschitz constant of generator1 (default: registry value or 1)",
    "L2": "declared Lipschitz constant of generator2",
    "xi1": "terminal Y of equation 1, expression in t, b (default 0)",
    "eta1": "terminal Z of equation 1 (default 0)",
    "xi2": "terminal Y of equation 2 (default 0)",
    "eta2": "terminal Z of equation 2 (default 0)",
    "xi1_bump": "'j, amount': add amount to xi1 at time T, up-count j",
    "ftilde": "intermediate generator for the dominating sufficient check",
    "sufficient_mode": "monotone_f1 | monotone_f2 | dominating",
    "engine": "lattice | mc (default lattice)",
    "n_steps": "grid steps on [0, T] (default 64)",
    "picard": "Picard passes per step (default 3)",
    "mc.paths": "Monte Carlo path count (default 50000)",
    "mc.basis_degree": "regression polynomial degree (default 3)",
    "seed": "seed for sampling and path simulation (default 0)",
    "samples": "sample count of the condition checkers (default 10000)",
    "tol": "comparison tolerance (default 1e-8 lattice, 3*stderr + 0.02 mc)",
    "out": "output path",
    "fixture": "fixture name for the convergence study",
    "n_list": "comma-separated step counts for the convergence study",
}

ENGINES = ("lattice", "mc")


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        values[key] = value
    return values


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls(parse_config_text(text))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.values.items())

    def override(self, **kwargs) -> "ExperimentConfig":
        merged = dict(self.values)
        for key, value in kwargs.items():
            key = key.replace("__", ".")
            if key not in KEYS:
                raise ConfigError(f"unknown key {key!r}")
            if value is not None:
                merged[key] = str(value)
        return ExperimentConfig(merged)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def _number(self, key, default, kind=float):
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return kind(raw)
        except ValueError:
            raise ConfigError(f"{key} = {raw!r} is not a valid {kind.__name__}") from None

    @property
    def T(self) -> float:
        T = self._number("T", 1.0)
        if not T > 0:
            raise ConfigError("T must be positive")
        return T

    @property
    def engine(self) -> str:
        engine = self.values.get("engine", "lattice")
        if engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}, got {engine!r}")
        return engine

    @property
    def n_steps(self) -> int:
        n = self._number("n_steps", 64, int)
        if n < 1:
            raise ConfigError("n_steps must be positive")
        return n

    @property
    def picard(self) -> int:
        return self._number("picard", 3, int)

    @property
    def paths(self) -> int:
        return self._number("mc.paths", 50_000, int)

    @property
    def basis_degree(self) -> int:
        return self._number("mc.basis_degree", 3, int)

    @property
    def seed(self) -> int:
        return self._number("seed", 0, int)

    @property
    def samples(self) -> int:
        return self._number("samples", 10_000, int)

    @property
    def tol(self) -> float | None:
        return self._number("tol", None)

    @property
    def scan_resolution(self) -> float:
        return self._number("scan_resolution", 1e-4)

    @property
    def n_list(self) -> list:
        raw = self.values.get("n_list", "16, 32, 64, 128")
        try:
            return [int(x) for x in raw.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"n_list = {raw!r} is not a list of integers") from None

    def delays(self) -> DelayPair:
        T = self.T
        delta_src = self.values.get("delta", "0.3")
        zeta_src = self.values.get("zeta", delta_src)
        delta = compile_time_function(delta_src)
        zeta = compile_time_function(zeta_src)
        kind = "constant" if delta.is_constant and zeta.is_constant else "general"
        if "K" in self.values:
            K = self._number("K", 0.0)
        else:
            s = np.linspace(0.0, T, 2001)
            reach = s + np.maximum(evaluate_map(delta, s), evaluate_map(zeta, s))
            K = max(float(reach.max()) - T, 0.0)
        return DelayPair(delta, zeta, K, self._number("M", 1.0), kind)

    def grid(self, n_steps: int | None = None) -> TimeGrid:
        return build_grid(self.T, self.delays().horizon_K, n_steps or self.n_steps)

    def generator(self, which: int) -> GeneratorSpec:
        key = f"generator{which}"
        if key not in self.values:
            raise ConfigError(f"{key} is required for this command")
        lip = self._number(f"L{which}", None)
        return generator_from_text(self.values[key], lip)

    def ftilde(self) -> GeneratorSpec | None:
        raw = self.values.get("ftilde")
        return generator_from_text(raw) if raw else None

    def terminal(self, which: int, grid: TimeGrid | None = None) -> TerminalData:
        term = TerminalData.from_expressions(self.values.get(f"xi{which}", "0"),
                                             self.values.get(f"eta{which}", "0"))
        if which == 1 and "xi1_bump" in self.values:
            try:
                j_text, amount_text = self.values["xi1_bump"].split(",")
                j, amount = int(j_text), float(amount_text)
            except ValueError:
                raise ConfigError("xi1_bump must look like 'j, amount'") from None
            term = bump_terminal(term, grid or self.grid(), j, amount)
        return term

    def problem(self, which: int, grid: TimeGrid | None = None) -> AbsdeProblem:
        grid = grid or self.grid()
        return AbsdeProblem(self.T, self.delays(), self.generator(which),
                            self.terminal(which, grid), grid, self.picard, self.scan_resolution)


def bump_terminal(term: TerminalData, grid: TimeGrid, up_count: int, amount: float) -> TerminalData:
    """``term`` with ``xi`` raised by ``amount`` at the single node ``(T, up_count)``."""
    n = grid.index_of_T
    if not 0 <= up_count <= n:
        raise ConfigError(f"bump up-count {up_count} outside 0..{n}")
    T = grid.T
    target = (2 * up_count - n) * np.sqrt(grid.step)
    tol = 1e-9 * max(1.0, abs(T))
    base = term.xi

    def xi(t, b):
        out = np.asarray(base(t, b), dtype=float) + 0.0 * np.asarray(b, dtype=float)
        if abs(t - T) <= tol:
            out = out + np.where(np.abs(np.asarray(b) - target) <= 1e-9, amount, 0.0)
        return out

    return TerminalData(xi, term.eta, f"{term.description} + bump({up_count}, {amount})")
