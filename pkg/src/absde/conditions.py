"""Sampled checks of the generator hypotheses and the ordering conditions.

None of these checks can prove anything: they draw finitely many inputs
and either find a counterexample (``refuted``, with a witness that can be
re-evaluated) or report ``pass`` meaning no counterexample was found.

Anticipated arguments are fed to drifts as point masses
(:class:`~absde.generators.PointQuery`), so ``E[h]`` reduces to ``h``.
The bracket term ``d<theta, B>_r / dr`` in the second and third ordering
patterns is replaced by sampled increment-projection stand-ins: a common
value ``psi`` for the lower candidate, and ``psi + rho`` for the upper one,
where ``rho`` is the projection of the nonnegative gap between the two
candidates (zero for a flat gap, free otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AnticipatedZDependence, PreconditionFailed
from .generators import ZERO_QUERY, GeneratorSpec, PointQuery, TerminalData
from .lattice import TimeGrid
from .partition import DelayPair, evaluate_map

REL_TOL = 1e-9
ORDER_ATOL = 1e-12
DEFAULT_SAMPLES = 10_000
BOX = 5.0

STANDIN_NOTE = ("bracket terms d<theta,B>/dr replaced by sampled increment-projection "
                "stand-ins; this is an interpretation, not the continuous-time condition")


@dataclass
class ConditionReport:
    verdict: str  # "pass" | "refuted" | "inconclusive"
    witness: dict | None = None
    samples_used: int = 0
    name: str = ""
    notes: list = field(default_factory=list)

    @property
    def refuted(self) -> bool:
        return self.verdict == "refuted"

    def summary(self) -> str:
        head = f"{self.name or 'condition'}: {self.verdict} ({self.samples_used} samples)"
        if self.witness:
            head += f"; witness {self.witness.get('pattern', '')}: " \
                    f"{self.witness['lhs']:.6g} vs {self.witness['rhs']:.6g}"
        return head


@dataclass
class DomainBox:
    t: tuple = (0.0, 1.0)
    y: tuple = (-BOX, BOX)
    z: tuple = (-BOX, BOX)
    theta: tuple = (-BOX, BOX)
    phi: tuple = (-BOX, BOX)

    @classmethod
    def for_horizon(cls, T: float) -> "DomainBox":
        return cls(t=(0.0, float(T)))


def _uniform(rng, bounds, n):
    lo, hi = bounds
    return rng.uniform(lo, hi, n)


def _eval(g: GeneratorSpec, t, y, z, theta, phi):
    n = np.size(y)
    return np.broadcast_to(np.asarray(g.drift(t, y, z, PointQuery(theta, phi)), dtype=float), (n,))


def _args(i, **arrays):
    return {k: float(v[i]) if np.ndim(v) else float(v) for k, v in arrays.items()}


def evaluate_at(g: GeneratorSpec, args: dict) -> float:
    """Scalar drift value at a witness argument dict (t, y, z, theta, phi)."""
    q = PointQuery(args["theta"], args["phi"])
    return float(np.asarray(g.drift(args["t"], args["y"], args["z"], q), dtype=float))


# ---- Lipschitz bound and square integrability ----------------------------

def check_lipschitz_sampled(g: GeneratorSpec, domain_box: DomainBox | None = None,
                            sample_count: int = DEFAULT_SAMPLES, seed: int = 0) -> ConditionReport:
    """Look for a difference quotient above ``g.declared_lipschitz_L``.

    Pairs share ``t``.  Four out of five pairs differ in a single slot
    (cycling y, z, theta, phi) by a log-uniform offset, the fifth is an
    independent draw, so both local slopes and global spread are probed.
    The quotient divides by ``|dy| + |dz| + |dtheta| + |dphi|``.
    """
    if sample_count < 2:
        raise ValueError("sample_count must be at least 2")
    box = domain_box or DomainBox()
    rng = np.random.default_rng(seed)
    n = sample_count
    t = _uniform(rng, box.t, n)
    a = {name: _uniform(rng, getattr(box, name), n) for name in ("y", "z", "theta", "phi")}
    b = {name: v.copy() for name, v in a.items()}
    slot = np.arange(n) % 5
    offset = 10.0 ** rng.uniform(-4, 0.7, n) * rng.choice([-1.0, 1.0], n)
    for i, name in enumerate(("y", "z", "theta", "phi")):
        sel = slot == i
        b[name][sel] = a[name][sel] + offset[sel]
    free = slot == 4
    for name in b:
        b[name][free] = _uniform(rng, getattr(box, name), int(free.sum()))

    fa = _eval(g, t, a["y"], a["z"], a["theta"], a["phi"])
    fb = _eval(g, t, b["y"], b["z"], b["theta"], b["phi"])
    dist = sum(np.abs(a[k] - b[k]) for k in a)
    with np.errstate(divide="ignore", invalid="ignore"):
        quotient = np.where(dist > 0, np.abs(fa - fb) / dist, 0.0)
    report = ConditionReport("pass", None, n, f"lipschitz[{g.name}]",
                             ["sampled; cannot prove the bound"])
    if not np.all(np.isfinite(quotient)):
        report.verdict = "inconclusive"
        report.notes.append("non-finite drift values encountered")
        return report
    worst = int(np.argmax(quotient))
    L = g.declared_lipschitz_L
    if quotient[worst] > L * (1 + REL_TOL):
        report.verdict = "refuted"
        report.witness = {
            "pattern": "lipschitz",
            "first": _args(worst, t=t, **a),
            "second": _args(worst, t=t, **b),
            "values": (float(fa[worst]), float(fb[worst])),
            "lhs": float(quotient[worst]),
            "rhs": float(L),
        }
    return report


def lipschitz_quotient(g: GeneratorSpec, first: dict, second: dict) -> float:
    dist = sum(abs(first[k] - second[k]) for k in ("y", "z", "theta", "phi"))
    return abs(evaluate_at(g, first) - evaluate_at(g, second)) / dist


def check_square_integrability(g: GeneratorSpec, grid: TimeGrid) -> float:
    """Left Riemann sum of ``|f(t, 0, 0, 0, 0)|^2`` over [0, T]."""
    total = 0.0
    for k in range(grid.index_of_T):
        v = float(np.asarray(g.drift(grid.time(k), 0.0, 0.0, ZERO_QUERY), dtype=float))
        total += v * v * grid.step
    return total


# ---- ordering conditions ---------------------------------------------------

@dataclass
class SamplerConfig:
    T: float
    delays: DelayPair
    sample_count: int = DEFAULT_SAMPLES
    seed: int = 0
    box: float = BOX
    terminal_times: int = 51
    terminal_states: int = 201


def _terminal_mesh(cfg: SamplerConfig):
    K = cfg.delays.horizon_K
    times = np.linspace(cfg.T, cfg.T + K, cfg.terminal_times) if K > 0 else np.array([cfg.T])
    states = np.linspace(-cfg.box, cfg.box, cfg.terminal_states)
    tt, bb = np.meshgrid(times, states, indexing="ij")
    return tt.ravel(), bb.ravel()


def _node_values(fn, t, b):
    return np.broadcast_to(np.asarray(fn(t, b), dtype=float), np.shape(b))


def check_terminal_order(terminal1: TerminalData, terminal2: TerminalData, cfg: SamplerConfig):
    """Raise :class:`PreconditionFailed` unless ``xi1 >= xi2`` on the sampled mesh."""
    tt, bb = _terminal_mesh(cfg)
    x1 = _vector_node(terminal1.xi, tt, bb)
    x2 = _vector_node(terminal2.xi, tt, bb)
    gap = x1 - x2
    bad = np.flatnonzero(gap < -ORDER_ATOL * (1 + np.abs(x1) + np.abs(x2)))
    if bad.size:
        i = bad[np.argmin(gap[bad])]
        raise PreconditionFailed(
            f"terminal ordering violated at t={tt[i]:.6g}, b={bb[i]:.6g}: {x1[i]:.6g} < {x2[i]:.6g}",
            witness={"t": float(tt[i]), "b": float(bb[i]), "xi1": float(x1[i]), "xi2": float(x2[i])})


def _vector_node(fn, tt, bb):
    # node functions take a scalar time; group by time
    out = np.empty_like(bb)
    for t in np.unique(tt):
        sel = tt == t
        out[sel] = _node_values(fn, float(t), bb[sel])
    return out


def _times_reaching(fn, T, n=1001):
    """Times in [0, T] whose anticipated time ``t + fn(t)`` is at least T."""
    grid = np.linspace(0.0, T, n)
    ok = grid + evaluate_map(fn, grid) >= T * (1 - 1e-12)
    return grid[ok]


def _ordered_pairs(rng, n, box):
    lower = rng.uniform(-box, box, n)
    gap = rng.uniform(0.0, box, n)
    gap[rng.random(n) < 0.2] = 0.0
    return lower + gap, lower


def _standins(rng, n, box):
    psi = rng.uniform(-box, box, n)
    rho = rng.uniform(-box, box, n)
    rho[rng.random(n) < 0.5] = 0.0
    return psi + rho, psi


def _violation(lhs, rhs):
    return lhs < rhs - ORDER_ATOL * (1 + np.abs(lhs) + np.abs(rhs))


def check_order_conditions_sampled(g1: GeneratorSpec, g2: GeneratorSpec,
                                   terminal1: TerminalData, terminal2: TerminalData,
                                   sampler_config: SamplerConfig) -> ConditionReport:
    """Sample the three ordering patterns ``f1(data 1) >= f2(data 2)``.

    * ``terminal-eta``: ordered anticipated ``Y`` pair, terminal ``eta`` at ``t + zeta(t)``;
    * ``bracket``: ordered anticipated ``Y`` pair, bracket stand-ins;
    * ``terminal-xi``: terminal ``xi`` at ``t + delta(t)``, bracket stand-ins.

    Patterns that read terminal data draw ``t`` from the part of [0, T]
    whose anticipated time lies in [T, T + K].
    """
    cfg = sampler_config
    check_terminal_order(terminal1, terminal2, cfg)
    rng = np.random.default_rng(cfg.seed)
    n = max(cfg.sample_count // 3, 1)
    box, T = cfg.box, cfg.T
    report = ConditionReport("pass", None, 3 * n, f"order[{g1.name} >= {g2.name}]",
                             ["sampled; cannot prove the conditions", STANDIN_NOTE])

    t_eta = _times_reaching(cfg.delays.zeta, T)
    t_xi = _times_reaching(cfg.delays.delta, T)
    worst = None

    def consider(pattern, t, y, z, args1, args2):
        nonlocal worst
        lhs = _eval(g1, t, y, z, args1[0], args1[1])
        rhs = _eval(g2, t, y, z, args2[0], args2[1])
        bad = np.flatnonzero(_violation(lhs, rhs))
        if not bad.size:
            return
        i = bad[np.argmax((rhs - lhs)[bad])]
        gap = float(rhs[i] - lhs[i])
        if worst is None or gap > worst[0]:
            worst = (gap, {
                "pattern": pattern,
                "first": _args(i, t=t, y=y, z=z, theta=args1[0], phi=args1[1]),
                "second": _args(i, t=t, y=y, z=z, theta=args2[0], phi=args2[1]),
                "lhs": float(lhs[i]),
                "rhs": float(rhs[i]),
            })

    y = rng.uniform(-box, box, n)
    z = rng.uniform(-box, box, n)
    t = rng.choice(t_eta, n)
    th1, th2 = _ordered_pairs(rng, n, box)
    b = rng.uniform(-box, box, n)
    r = t + evaluate_map(cfg.delays.zeta, t)
    eta1 = _vector_node(terminal1.eta, r, b)
    eta2 = _vector_node(terminal2.eta, r, b)
    consider("terminal-eta", t, y, z, (th1, eta1), (th2, eta2))

    y = rng.uniform(-box, box, n)
    z = rng.uniform(-box, box, n)
    t = rng.uniform(0.0, T, n)
    th1, th2 = _ordered_pairs(rng, n, box)
    ps1, ps2 = _standins(rng, n, box)
    consider("bracket", t, y, z, (th1, ps1), (th2, ps2))

    y = rng.uniform(-box, box, n)
    z = rng.uniform(-box, box, n)
    t = rng.choice(t_xi, n)
    b = rng.uniform(-box, box, n)
    r = t + evaluate_map(cfg.delays.delta, t)
    xi1 = _vector_node(terminal1.xi, r, b)
    xi2 = _vector_node(terminal2.xi, r, b)
    ps1, ps2 = _standins(rng, n, box)
    consider("terminal-xi", t, y, z, (xi1, ps1), (xi2, ps2))

    if worst is not None:
        report.verdict = "refuted"
        report.witness = worst[1]
    return report


# ---- sufficient conditions --------------------------------------------------

def _probe_phi(g: GeneratorSpec, rng, n, box):
    t = rng.uniform(0.0, 1.0, n)
    y, z, theta = rng.uniform(-box, box, (3, n))
    phi_a, phi_b = rng.uniform(-box, box, (2, n))
    fa = _eval(g, t, y, z, theta, phi_a)
    fb = _eval(g, t, y, z, theta, phi_b)
    diff = np.abs(fa - fb)
    if np.any(diff > 1e-12 * (1 + np.abs(fa))):
        i = int(np.argmax(diff))
        raise AnticipatedZDependence(
            f"{g.name!r} changes with the anticipated Z slot "
            f"(phi {phi_a[i]:.4g} -> {phi_b[i]:.4g} moves f by {diff[i]:.3g})")


def check_sufficient_conditions(g1: GeneratorSpec, g2: GeneratorSpec, mode: str = "monotone_f2",
                                ftilde: GeneratorSpec | None = None,
                                domain_box: DomainBox | None = None,
                                sample_count: int = DEFAULT_SAMPLES, seed: int = 0) -> ConditionReport:
    """Sampled check of the sufficient conditions for anticipated-Y ordering.

    ``mode`` is ``monotone_f1`` or ``monotone_f2`` (pointwise ``f1 >= f2``
    plus the named function nondecreasing in anticipated ``Y``), or
    ``dominating`` (``f1 >= ftilde >= f2`` with ``ftilde`` nondecreasing).
    All functions involved must ignore the anticipated ``Z`` slot.
    """
    if mode not in ("monotone_f1", "monotone_f2", "dominating"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "dominating" and ftilde is None:
        raise ValueError("dominating mode needs ftilde")
    box = domain_box or DomainBox()
    half = max(abs(box.theta[0]), abs(box.theta[1]))
    rng = np.random.default_rng(seed)
    involved = [g1, g2] + ([ftilde] if ftilde is not None else [])
    for g in involved:
        _probe_phi(g, rng, 256, half)

    n = max(sample_count // 2, 1)
    names = f"{g1.name} >= {g2.name}" if mode != "dominating" else \
        f"{g1.name} >= {ftilde.name} >= {g2.name}"
    report = ConditionReport("pass", None, 2 * n, f"sufficient[{mode}: {names}]",
                             ["sampled; cannot prove the conditions"])
    worst = None

    def consider(pattern, fa, fb, t, y, z, th_a, th_b):
        nonlocal worst
        lhs = _eval(fa, t, y, z, th_a, 0.0)
        rhs = _eval(fb, t, y, z, th_b, 0.0)
        bad = np.flatnonzero(_violation(lhs, rhs))
        if not bad.size:
            return
        i = bad[np.argmax((rhs - lhs)[bad])]
        gap = float(rhs[i] - lhs[i])
        if worst is None or gap > worst[0]:
            zeros = np.zeros(np.size(t))
            worst = (gap, {
                "pattern": pattern,
                "lhs_generator": fa.name,
                "rhs_generator": fb.name,
                "first": _args(i, t=t, y=y, z=z, theta=th_a, phi=zeros),
                "second": _args(i, t=t, y=y, z=z, theta=th_b, phi=zeros),
                "lhs": float(lhs[i]),
                "rhs": float(rhs[i]),
            })

    t = _uniform(rng, box.t, n)
    y = _uniform(rng, box.y, n)
    z = _uniform(rng, box.z, n)
    theta = _uniform(rng, box.theta, n)
    chain = [g1, ftilde, g2] if mode == "dominating" else [g1, g2]
    for upper, lower in zip(chain, chain[1:]):
        consider("pointwise", upper, lower, t, y, z, theta, theta)

    t = _uniform(rng, box.t, n)
    y = _uniform(rng, box.y, n)
    z = _uniform(rng, box.z, n)
    th_hi, th_lo = _ordered_pairs(rng, n, half)
    near = rng.random(n) < 0.5
    th_hi[near] = th_lo[near] + 10.0 ** rng.uniform(-6, -1, int(near.sum()))
    mono = {"monotone_f1": g1, "monotone_f2": g2, "dominating": ftilde}[mode]
    consider("monotone", mono, mono, t, y, z, th_hi, th_lo)

    if worst is not None:
        report.verdict = "refuted"
        report.witness = worst[1]
    return report
