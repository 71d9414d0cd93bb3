import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad

from motiondesign import brachistochrone as br
from motiondesign import functional
from motiondesign.model import PathSpec

SETUP = br.reference_setup()


@pytest.fixture(scope="module")
def exact():
    return br.solve_exact(SETUP)


def test_constants(exact):
    assert round(exact.C1, 3) == 0.116
    assert round(exact.C2, 3) == 1.0
    assert round(exact.t_E, 2) == 4.05
    assert max(map(abs, exact.residuals())) < 1e-10


def test_travel_time_regression(exact):
    # frozen from this implementation; guards against silent changes
    assert exact.time == pytest.approx(1.7469336, rel=1e-7)


def test_time_against_quadrature_oracle(exact):
    R, g, yA = exact.radius, SETUP.g, SETUP.A[1]

    def dt(t):
        x_t = R * (1 - np.cos(t))
        y_t = -R * np.sin(t)
        depth = yA - exact.point(t)[1]
        return np.hypot(x_t, y_t) / np.sqrt(2 * g * depth)

    T, _ = quad(dt, 0.0, exact.t_E, epsabs=1e-13, epsrel=1e-12)
    assert exact.time == pytest.approx(T, rel=1e-9)


def test_dense_polyline_converges_to_cycloid_time(exact):
    _, pts = exact.sample(20001)
    assert br.travel_time(pts, SETUP) == pytest.approx(exact.time, rel=1e-6)


def test_free_fall():
    p = br.BrachProblem((0.0, 3.0), (0.0, 0.0), 9.81)
    assert br.travel_time([[0, 3], [0, 0]], p) == pytest.approx(np.sqrt(2 * 3 / 9.81), rel=1e-14)
    with pytest.raises(br.BrachError, match="vertical"):
        br.solve_exact(p)


def test_inclined_plane():
    # straight ramp: l / (average speed) with the speed growing linearly in time
    p = br.BrachProblem((0.0, 4.0), (3.0, 0.0), 10.0)
    assert br.travel_time([p.A, p.B], p) == pytest.approx(5.0 / np.sqrt(2 * 10 * 4) * 2, rel=1e-14)


def test_chord_is_slower(exact):
    assert br.travel_time([SETUP.A, SETUP.B], SETUP) > exact.time


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 6), data=st.data())
def test_no_polyline_beats_the_cycloid(exact, n, data):
    xs = np.sort(data.draw(arrays(float, n, elements=st.floats(-2.0, 14.0))))
    ys = data.draw(arrays(float, n, elements=st.floats(-3.0, 4.99)))
    curve = np.vstack([SETUP.A, np.column_stack([xs, ys]), SETUP.B])
    assert br.travel_time(curve, SETUP) >= exact.time * (1 - 1e-12)


def test_level_end_point_is_full_arch():
    p = br.BrachProblem((0.0, 0.0), (2 * np.pi, 0.0), 1.0)
    sol = br.solve_exact(p)
    assert sol.t_E == pytest.approx(2 * np.pi)
    assert sol.radius == pytest.approx(1.0)
    assert max(map(abs, sol.residuals())) < 1e-12


def test_mirrored_end_point(exact):
    p = br.BrachProblem((1.0, 5.0), (-8.0, 2.0), 10.0)
    sol = br.solve_exact(p)
    assert sol.C1 == pytest.approx(exact.C1, rel=1e-12)
    assert sol.time == pytest.approx(exact.time, rel=1e-12)
    assert max(map(abs, sol.residuals())) < 1e-10


@settings(max_examples=30, deadline=None)
@given(h=st.floats(0.01, 100.0), w=st.floats(0.01, 100.0))
def test_exact_solution_hits_end_point(h, w):
    p = br.BrachProblem((0.0, h), (w, 0.0), 9.81)
    sol = br.solve_exact(p)
    assert max(map(abs, sol.residuals())) <= 1e-9 * max(h, w)
    assert 0 < sol.t_E <= 2 * np.pi + 1e-12


@pytest.mark.parametrize("A,B,g,msg", [
    ((0, 0), (1, 1), 10.0, "above"),
    ((1, 1), (1, 1), 10.0, "coincide"),
    ((0, 1), (1, 0), 0.0, "gravity"),
])
def test_invalid_setups(A, B, g, msg):
    with pytest.raises(br.BrachError, match=msg):
        br.BrachProblem(A, B, g)


def test_curve_above_start_rejected():
    with pytest.raises(br.BrachError, match="rises above"):
        br.travel_time([[1, 5], [2, 6], [10, 2]], SETUP)


def test_fifteen_linear_elements(exact):
    fe = br.solve_fe(SETUP, PathSpec("lagrange", 1, 15))
    assert fe.converged
    assert exact.time <= fe.T <= 1.01 * exact.time
    assert np.allclose(fe.curve[0], SETUP.A) and np.allclose(fe.curve[-1], SETUP.B, atol=1e-12)
    lengths = functional.assemble(fe.problem, fe.motion.D, objective=br.time_objective(SETUP.g),
                                  multipliers=fe.motion.multipliers, tangent=False).lengths
    assert np.abs(np.diff(lengths)).max() < 1e-8 * lengths.sum()


def test_two_cubic_bspline_elements(exact):
    fe = br.solve_fe(SETUP, PathSpec("bspline", 3, 2))
    assert fe.converged
    assert exact.time <= fe.T <= 1.01 * exact.time


def test_refinement_is_monotone(exact):
    T = br.refinement_study(SETUP)
    seq = [T[n] for n in (4, 8, 16, 32)]
    assert all(a > b for a, b in zip(seq[:-1], seq[1:]))
    assert seq[-1] >= exact.time


def test_fe_needs_two_elements():
    with pytest.raises(br.BrachError, match="two path elements"):
        br.solve_fe(SETUP, PathSpec("lagrange", 1, 1))


def test_fe_nodes_lie_near_the_cycloid(exact):
    fe = br.solve_fe(SETUP, PathSpec("lagrange", 1, 32))
    _, dense = exact.sample(4001)
    dist = [np.min(np.linalg.norm(dense - q, axis=1)) for q in fe.curve]
    assert max(dist) < 0.02 * np.hypot(SETUP.run, SETUP.drop)
