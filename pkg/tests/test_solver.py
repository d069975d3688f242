import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from absde.errors import AnticipatedDependence, NonFiniteValue, UnsolvedRegion
from absde.fixtures import get_fixture
from absde.generators import (PointQuery, GeneratorSpec, TerminalData, constant,
                               generator_from_text, linear_anticipated, zero)
from absde.interval import IntervalProblem, backward_step, solve_interval, AnticipationContext
from absde.lattice import BinomialLattice, build_grid
from absde.partition import DelayPair
from absde.solver import (AbsdeProblem, fill_terminal_segment, grid_partition, solve_absde,
                          solve_plain_bsde)
from absde.surface import (SolutionSurface, query_steps, resolve_anticipated_query,
                           write_surface_csv)
from oracles import linear_anticipated_poly, linear_anticipated_y, picard_scalar


class _Fixed:
    def __init__(self, q):
        self.q = q

    def query(self, k):
        return self.q


ZERO_CTX = _Fixed(PointQuery(0.0, 0.0))


def test_backward_step_martingale():
    lat = BinomialLattice(build_grid(1.0, 0.0, 8))
    y, z = backward_step(lat, 5, lat.states(6), zero(), ZERO_CTX)
    np.testing.assert_allclose(y, lat.states(5), atol=1e-15)
    np.testing.assert_allclose(z, 1.0, atol=1e-15)


def test_backward_step_constant_drift():
    lat = BinomialLattice(build_grid(1.0, 0.0, 8))
    y, z = backward_step(lat, 3, np.full(5, 2.0), constant(3.0), ZERO_CTX)
    np.testing.assert_allclose(y, 2.0 + 3.0 * 0.125)
    np.testing.assert_allclose(z, 0.0)


@pytest.mark.parametrize("passes", [1, 3, 6])
def test_backward_step_picard_matches_scalar_recursion(passes):
    lat = BinomialLattice(build_grid(1.0, 0.0, 10))
    g = generator_from_text("y")
    y, _ = backward_step(lat, 9, np.ones(11), g, ZERO_CTX, passes)
    np.testing.assert_allclose(y, picard_scalar(0.1, passes), rtol=1e-15)
    if passes == 3:
        np.testing.assert_allclose(y, 1 + 0.1 + 0.01 + 0.001, rtol=1e-15)
    assert abs(y[0] - 1 / (1 - 0.1)) < 0.1 ** (passes + 1) * 2


def test_backward_step_reports_non_finite():
    lat = BinomialLattice(build_grid(1.0, 0.0, 4))
    bad = GeneratorSpec("bad", lambda t, y, z, q: np.full(np.shape(y), np.nan), 1.0)
    with pytest.raises(NonFiniteValue) as info:
        backward_step(lat, 2, np.zeros(4), bad, ZERO_CTX)
    assert info.value.step == 2 and info.value.iteration == 1


def _interval_run(generator, terminal, k_a, k_b, lat, surface=None, future=ZERO_CTX):
    surface = surface or SolutionSurface(lat.grid)
    prob = IntervalProblem(k_a, k_b, np.full(k_b + 1, terminal), generator, future)
    return solve_interval(prob, lat, surface, terminal_z=np.zeros(k_b + 1))


def test_interval_constant_terminal():
    lat = BinomialLattice(build_grid(1.0, 0.0, 8))
    frag = _interval_run(zero(), 5.0, 4, 8, lat)
    for k in range(4, 9):
        np.testing.assert_allclose(frag[k][0], 5.0)
        np.testing.assert_allclose(frag[k][1], 0.0)


def test_interval_constant_drift_half_length():
    lat = BinomialLattice(build_grid(1.0, 0.0, 8))
    frag = _interval_run(constant(2.0), 0.0, 4, 8, lat)
    np.testing.assert_allclose(frag[4][0], 1.0, rtol=1e-14)


def test_interval_with_future_values():
    # y' = -1 on an interval of length 1/2 reading a future segment where Y = 1
    T, delays = 0.5, DelayPair.constant(0.5, horizon_K=0.5)
    grid = build_grid(T, 0.5, 8)
    lat = BinomialLattice(grid)
    surface = SolutionSurface(grid)
    fill_terminal_segment(surface, lat, TerminalData.constant(1.0))
    prob = IntervalProblem(0, 8, surface.Y[8], linear_anticipated(), AnticipationContext(surface, lat, delays))
    frag = solve_interval(prob, lat, surface)
    np.testing.assert_allclose(frag[0][0], 1.5, rtol=1e-14)
    np.testing.assert_allclose(frag[0][1], 0.0)


def _problem(generator, terminal, T=1.0, delay=0.5, K=0.5, n=16):
    grid = build_grid(T, K, n)
    return AbsdeProblem(T, DelayPair.constant(delay, horizon_K=K), generator, terminal, grid)


def test_solve_absde_constant_terminal():
    s = solve_absde(_problem(zero(), TerminalData.constant(7.0)))
    for k in range(s.grid.n_steps_total + 1):
        np.testing.assert_array_equal(s.Y[k], 7.0)
        np.testing.assert_array_equal(s.Z[k], 0.0)


@pytest.mark.parametrize("n", [8, 64, 512])
def test_solve_absde_martingale(n):
    fx = get_fixture("martingale")
    s = solve_absde(fx.problem(n))
    lat = BinomialLattice(s.grid)
    for k in range(s.grid.index_of_T + 1):
        assert np.max(np.abs(s.Y[k] - lat.states(k))) <= 1e-12
        assert np.max(np.abs(s.Z[k] - 1.0)) <= 1e-12


def test_linear_anticipated_oracle_by_quadrature():
    assert linear_anticipated_y(0.0) == pytest.approx(2.125, abs=1e-12)
    for t in (0.1, 0.3, 0.5, 0.75):
        closed = 2 - t if t >= 0.5 else 2.125 - 1.5 * t + t * t / 2
        assert linear_anticipated_y(t) == pytest.approx(closed, abs=1e-12)
    assert get_fixture("linear_anticipated").oracle_y0 == 2.125
    for t in (0.0, 0.3, 0.8):
        assert linear_anticipated_poly(t, 0.5) == pytest.approx(linear_anticipated_y(t), abs=1e-12)


def test_linear_anticipated_lattice_values_frozen():
    # error is exactly dt/4 for this scheme; values frozen after matching the quadrature oracle
    fx = get_fixture("linear_anticipated")
    for n, frozen in [(16, 2.140625), (32, 2.1328125), (64, 2.12890625), (128, 2.126953125)]:
        y0 = solve_absde(fx.problem(n)).y0()
        assert y0 == frozen
        assert y0 - 2.125 == pytest.approx(0.25 / n, abs=1e-12)


def test_solution_tracks_quadrature_profile():
    fx = get_fixture("linear_anticipated")
    s = solve_absde(fx.problem(128))
    for k in range(0, 129, 16):
        t = s.grid.time(k)
        assert s.Y[k][0] == pytest.approx(linear_anticipated_y(t), abs=0.01)


def test_surface_is_frozen():
    s = solve_absde(_problem(zero(), TerminalData.constant(1.0), n=4))
    with pytest.raises(ValueError):
        s.Y[0][0] = 3.0


def test_resolve_anticipated_query_examples():
    fx = get_fixture("martingale")
    s = solve_absde(fx.problem(16))
    lat = BinomialLattice(s.grid)
    q = resolve_anticipated_query(s, lat, (4, 2), fx.delays)
    assert q.expect(lambda a, b: 1.0 + 0 * a) == pytest.approx(1.0)
    assert q.expect(lambda a, b: a) == pytest.approx(lat.state(4, 2), abs=1e-14)
    assert q.times == pytest.approx((0.75, 0.75))
    const = solve_absde(_problem(zero(), TerminalData.constant(3.0)))
    q = resolve_anticipated_query(const, BinomialLattice(const.grid), 12, fx.delays)
    np.testing.assert_allclose(q.expect(lambda a, b: a), 3.0)


def test_query_into_unsolved_region():
    grid = build_grid(1.0, 0.5, 16)
    lat = BinomialLattice(grid)
    surface = SolutionSurface(grid)
    with pytest.raises(UnsolvedRegion):
        resolve_anticipated_query(surface, lat, 0, DelayPair.constant(0.5, horizon_K=0.5))


def test_solve_plain_bsde_examples():
    grid = build_grid(1.0, 0.0, 32)
    s = solve_plain_bsde(1.0, zero(), lambda b: b, grid, lambda b: 1.0 + 0 * b)
    lat = BinomialLattice(grid)
    for k in range(33):
        np.testing.assert_allclose(s.Y[k], lat.states(k), atol=1e-13)
        np.testing.assert_allclose(s.Z[k], 1.0, atol=1e-12)
    assert solve_plain_bsde(1.0, constant(1.0), 0.0, grid).y0() == pytest.approx(1.0, abs=1e-14)
    grid = build_grid(1.0, 0.0, 256)
    y0 = solve_plain_bsde(1.0, generator_from_text("-y"), 1.0, grid).y0()
    assert abs(y0 - math.exp(-1)) <= 0.01


def test_solve_plain_bsde_rejects_anticipation():
    with pytest.raises(AnticipatedDependence):
        solve_plain_bsde(1.0, linear_anticipated(), 1.0, build_grid(1.0, 0.0, 8))


def test_problem_rejects_delay_below_step_and_short_horizon():
    with pytest.raises(ValueError):
        _problem(linear_anticipated(), TerminalData.constant(0.0), delay=0.05, K=0.05, n=10)
    with pytest.raises(ValueError):
        AbsdeProblem(1.0, DelayPair.constant(0.5, horizon_K=0.5), zero(), TerminalData.constant(0.0),
                     build_grid(1.0, 0.25, 8))


def test_surface_csv_format():
    s = solve_absde(_problem(constant(2.0), TerminalData.constant(0.0), n=2, delay=0.5, K=0.5))
    text = write_surface_csv(s)
    lines = text.splitlines()
    assert lines[0] == "step_index,time,up_count,state,Y,Z"
    assert lines[1] == "0,0,0,0,2,0"
    assert len(lines) == 1 + sum(k + 1 for k in range(s.grid.n_steps_total + 1))


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-1, 1), b=st.floats(-1, 1), c=st.floats(-2, 2), n=st.sampled_from([8, 16, 32]))
def test_query_free_generator_matches_plain_solver_bitwise(a, b, c, n):
    g = GeneratorSpec("free", lambda t, y, z, q: a * np.asarray(y) + b * np.abs(z) + c * np.sin(t), 2.0)
    term = TerminalData.from_expressions("cos(b)", "-sin(b)")
    p = _problem(g, term, n=n)
    surf = solve_absde(p)
    N = p.grid.index_of_T
    plain = solve_plain_bsde(1.0, g, surf.Y[N], p.grid, surf.Z[N])
    for k in range(N + 1):
        np.testing.assert_array_equal(surf.Y[k], plain.Y[k])
        np.testing.assert_array_equal(surf.Z[k], plain.Z[k])


def test_query_free_drift_accepts_coarse_grid():
    # the step is longer than the delay, which only matters when the query is read
    s = solve_absde(get_fixture("martingale").problem(1))
    np.testing.assert_allclose(s.Y[0], 0.0, atol=1e-15)
    np.testing.assert_allclose(s.Z[0], 1.0, atol=1e-15)


def test_grid_partition_knots_advance_and_cover_queries():
    grid = build_grid(1.0, 0.33, 64)
    delays = DelayPair.constant(0.33, horizon_K=0.33)
    part = grid_partition(grid, delays)
    idx = [int(round(k / grid.step)) for k in part.knots]
    assert idx[0] == 64 and idx[-1] == 0
    assert all(a > b for a, b in zip(idx, idx[1:]))
    # every query from inside an interval lands at or beyond its right end
    for k_b, k_a in zip(idx, idx[1:]):
        for k in range(k_a, k_b):
            assert min(query_steps(grid, delays, k)) >= k_b


def test_collapsing_alignment_falls_back_to_grid_partition():
    delay = 0.33
    p = _problem(linear_anticipated(), TerminalData.constant(1.0), delay=delay, K=delay, n=64)
    s = solve_absde(p)
    assert s.all_finite()
    assert s.y0() == pytest.approx(linear_anticipated_poly(0.0, delay), abs=0.02)
