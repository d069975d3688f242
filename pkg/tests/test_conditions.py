import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from absde.conditions import (DomainBox, SamplerConfig, check_lipschitz_sampled,
                              check_order_conditions_sampled, check_square_integrability,
                              check_terminal_order, evaluate_at, lipschitz_quotient)
from absde.conditions import check_sufficient_conditions
from absde.errors import AnticipatedZDependence, PreconditionFailed
from absde.generators import REGISTRY, GeneratorSpec, TerminalData, generator_from_text
from absde.lattice import build_grid
from absde.partition import DelayPair
from oracles import max_slope_dense

BOX = DomainBox()
SAMPLER = SamplerConfig(1.0, DelayPair.constant(0.3, horizon_K=0.3), 3000, seed=7)
ONE, ZERO_TERM = TerminalData.constant(1.0), TerminalData.constant(0.0)


def two_y(L):
    return GeneratorSpec("2y", lambda t, y, z, q: 2 * np.asarray(y, dtype=float), L)


def test_lipschitz_refuted_with_slope_two():
    report = check_lipschitz_sampled(two_y(1.0), BOX, 2000, seed=1)
    assert report.refuted
    w = report.witness
    assert w["lhs"] == pytest.approx(2.0, rel=1e-9)
    assert lipschitz_quotient(two_y(1.0), w["first"], w["second"]) == pytest.approx(w["lhs"])


def test_lipschitz_passes_at_true_constant():
    assert check_lipschitz_sampled(two_y(2.0), BOX, 2000, seed=1).verdict == "pass"


def test_middle_function_of_second_example_passes_at_dense_slope():
    assert max_slope_dense(lambda x: x + np.cos(x), -5, 5) == pytest.approx(2.0, abs=1e-6)
    report = check_lipschitz_sampled(REGISTRY["example32_ftilde"](), BOX, 5000, seed=3)
    assert report.verdict == "pass"


def test_square_integrability():
    grid = build_grid(1.0, 0.0, 100)
    assert check_square_integrability(REGISTRY["zero"](), grid) == 0.0
    assert check_square_integrability(generator_from_text("constant(2)"), grid) == pytest.approx(4.0)
    assert check_square_integrability(REGISTRY["example31_f1"](), grid) == pytest.approx(4.0)


def test_first_example_pair_passes():
    report = check_order_conditions_sampled(REGISTRY["example31_f1"](), REGISTRY["example31_f2"](),
                                            ONE, ZERO_TERM, SAMPLER)
    assert report.verdict == "pass"
    assert report.samples_used > 0


def test_swapped_pair_refuted_with_reproducible_witness():
    args = (REGISTRY["example31_f2"](), REGISTRY["example31_f1"](), ONE, ONE, SAMPLER)
    first = check_order_conditions_sampled(*args)
    second = check_order_conditions_sampled(*args)
    assert first.refuted
    assert first.witness == second.witness
    w = first.witness
    lhs = evaluate_at(REGISTRY["example31_f2"](), w["first"])
    rhs = evaluate_at(REGISTRY["example31_f1"](), w["second"])
    assert lhs == pytest.approx(w["lhs"]) and rhs == pytest.approx(w["rhs"])
    assert lhs < rhs


def test_swapped_pair_at_origin_direct_evaluation():
    # f2 at zero is 0, f1 at zero is 2: the swap breaks the order at the origin
    zeros = {"t": 0.5, "y": 0.0, "z": 0.0, "theta": 0.0, "phi": 0.0}
    assert evaluate_at(REGISTRY["example31_f2"](), zeros) == 0.0
    assert evaluate_at(REGISTRY["example31_f1"](), zeros) == 2.0


def test_terminal_order_precondition():
    with pytest.raises(PreconditionFailed) as info:
        check_terminal_order(ZERO_TERM, ONE, SAMPLER)
    assert info.value.witness["xi1"] == 0.0 and info.value.witness["xi2"] == 1.0


@settings(max_examples=15, deadline=None)
@given(a=st.floats(0.0, 2.0), c=st.floats(-3, 3), w=st.floats(-1, 1))
def test_reflexivity_for_monotone_generators(a, c, w):
    # f = a*theta + w*y + c ignores phi and is nondecreasing in theta
    g = GeneratorSpec("lin", lambda t, y, z, q: a * q.mean_y() + w * np.asarray(y) + c, 3.0)
    term = TerminalData.from_expressions("cos(b)", "0")
    sampler = SamplerConfig(1.0, DelayPair.constant(0.3, horizon_K=0.3), 600, seed=2)
    assert check_order_conditions_sampled(g, g, term, term, sampler).verdict == "pass"


def test_second_example_dominating_mode_passes():
    report = check_sufficient_conditions(REGISTRY["example32_f1"](), REGISTRY["example32_f2"](),
                                         "dominating", REGISTRY["example32_ftilde"](), BOX, 4000, 0)
    assert report.verdict == "pass"


def test_identity_monotone_passes_and_decreasing_refuted():
    ident = generator_from_text("EY")
    assert check_sufficient_conditions(ident, ident, "monotone_f2").verdict == "pass"
    neg = generator_from_text("-EY")
    report = check_sufficient_conditions(neg, neg, "monotone_f2", sample_count=2000)
    assert report.refuted
    assert report.witness["pattern"] == "monotone"
    assert report.witness["first"]["theta"] > report.witness["second"]["theta"]


def test_anticipated_z_dependence_rejected():
    with pytest.raises(AnticipatedZDependence):
        check_sufficient_conditions(REGISTRY["example31_f1"](), REGISTRY["example31_f2"](),
                                    "monotone_f2")
