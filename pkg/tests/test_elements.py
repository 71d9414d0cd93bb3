import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from motiondesign import benchmarks, elements
from motiondesign.model import Material
from motiondesign.verify import element_fd_errors, rotation

BAR = Material(30000.0, area=0.1)
PLATE = Material(1000.0, 0.3, thickness=1.0)
UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
SKEWED = np.array([[0.0, 0.0], [1.0, 0.1], [1.1, 0.9], [-0.1, 1.0]])


def test_truss_stretched_bar():
    # E_GL = (1.1^2 - 1) / 2 = 0.105, energy = EA L E^2 / 2
    st_ = elements.truss_state([[0, 0], [1, 0]], [0, 0, 0.1, 0], BAR)
    assert st_.energy == pytest.approx(0.5 * 3000 * 0.105**2, rel=1e-12)
    assert st_.energy == pytest.approx(16.5375, rel=1e-12)
    # axial force EA * E_GL * stretch (1.1) acting along x
    assert np.allclose(st_.f_int, [-3000 * 0.105 * 1.1, 0, 3000 * 0.105 * 1.1, 0])


def test_truss_zero_state():
    st_ = elements.truss_state([[0, 0], [1, 0.2]], np.zeros(4), BAR)
    assert st_.energy == 0.0
    assert np.all(st_.f_int == 0.0)
    L = np.hypot(1, 0.2)
    n = np.array([1, 0.2]) / L
    k = 3000 / L * np.outer(n, n)
    assert np.allclose(st_.k_t, np.block([[k, -k], [-k, k]]))


def test_truss_zero_length_rejected():
    with pytest.raises(elements.ElementError):
        elements.truss_state([[1, 1], [1, 1]], np.zeros(4), BAR)


def test_truss_rigid_quarter_turn():
    X = np.array([[0.0, 0.0], [1.0, 0.0]])
    d = (X @ rotation(np.pi / 2).T - X).ravel()
    st_ = elements.truss_state(X, d, BAR)
    assert st_.energy < 1e-20
    assert np.abs(st_.f_int).max() < 1e-10


@pytest.mark.parametrize("state", [elements.quad_state, elements.eas_quad_state])
def test_quad_uniaxial_stretch(state):
    a = 0.01
    d = np.column_stack([a * UNIT_SQUARE[:, 0], np.zeros(4)]).ravel()
    st_ = state(UNIT_SQUARE, d, PLATE)
    E_xx = a + 0.5 * a**2
    expected = 0.5 * 1000 / (1 - 0.3**2) * E_xx**2
    assert st_.energy == pytest.approx(expected, rel=1e-12)


def test_quad_inverted_rejected():
    with pytest.raises(elements.ElementError, match="Jacobian"):
        elements.quad_state(UNIT_SQUARE[::-1], np.zeros(8), PLATE)


def test_eas_homogeneous_strain_matches_q1():
    rng = np.random.default_rng(0)
    G = 0.02 * rng.standard_normal((2, 2))
    d = (SKEWED @ G.T).ravel()
    q1 = elements.quad_state(SKEWED, d, PLATE)
    eas = elements.eas_quad_state(SKEWED, d, PLATE)
    assert np.abs(eas.alpha).max() < 1e-10
    assert eas.energy == pytest.approx(q1.energy, rel=1e-9)
    assert np.allclose(eas.f_int, q1.f_int, rtol=0, atol=1e-9 * np.abs(q1.f_int).max())


def test_eas_relieves_bending_locking():
    X = np.array([[0.0, -1.0], [2.0, -1.0], [2.0, 1.0], [0.0, 1.0]])
    kappa = 1e-4
    d = np.column_stack([kappa * X[:, 0] * X[:, 1], -0.5 * kappa * X[:, 0]**2]).ravel()
    mat = Material(1000.0, 0.0, thickness=1.0)
    q1 = elements.quad_state(X, d, mat).energy
    eas = elements.eas_quad_state(X, d, mat).energy
    beam = 0.5 * 1000 * kappa**2 * (2.0 / 3.0) * 2.0  # E I L kappa^2 / 2 with I = 2/3
    assert eas < q1
    assert eas == pytest.approx(beam, rel=1e-3)
    assert q1 > 1.5 * beam


def test_eas_suppressed_alpha_is_q1():
    rng = np.random.default_rng(1)
    d = 0.05 * rng.standard_normal(8)
    q1 = elements.quad_state(SKEWED, d, PLATE)
    sup = elements.eas_quad_state(SKEWED, d, PLATE, suppress_alpha=True)
    assert sup.energy == pytest.approx(q1.energy, rel=1e-14)
    assert np.allclose(sup.f_int, q1.f_int, rtol=1e-13, atol=0)
    assert np.allclose(sup.k_t, q1.k_t, rtol=1e-13, atol=1e-13 * np.abs(q1.k_t).max())


def test_batched_matches_single():
    rng = np.random.default_rng(2)
    X = np.stack([SKEWED, UNIT_SQUARE, 2 * SKEWED])
    d = 0.05 * rng.standard_normal((3, 8))
    e, f, k, _ = elements.quad_states(X, d, 1000.0, 0.3, 1.0, eas=True)
    for i in range(3):
        single = elements.eas_quad_state(X[i], d[i], PLATE)
        assert e[i] == pytest.approx(single.energy, rel=1e-13)
        assert np.allclose(f[i], single.f_int, rtol=1e-12, atol=1e-14)


CASES = [
    ("truss", elements.truss_state, np.array([[0.0, 0.0], [1.0, 0.2]]), BAR, 4),
    ("quad4", elements.quad_state, SKEWED, PLATE, 8),
    ("quad4_eas", elements.eas_quad_state, SKEWED, PLATE, 8),
]


@pytest.mark.parametrize("name,state,X,mat,n", CASES, ids=[c[0] for c in CASES])
@settings(max_examples=15, deadline=None)
@given(data=st.data())
def test_finite_difference_consistency(name, state, X, mat, n, data):
    d = data.draw(arrays(float, n, elements=st.floats(-0.1, 0.1)))
    f_err, k_err = element_fd_errors(state, X, d, mat)
    assert f_err < 1e-6
    assert k_err < 1e-5 or np.linalg.norm(state(X, d, mat).k_t) < 1e-8


@pytest.mark.parametrize("name,state,X,mat,n", CASES, ids=[c[0] for c in CASES])
@settings(max_examples=15, deadline=None)
@given(theta=st.floats(-np.pi, np.pi), t=arrays(float, 2, elements=st.floats(-5, 5)))
def test_rigid_body_motion_is_free(name, state, X, mat, n, theta, t):
    d = (X @ rotation(theta).T + t - X).ravel()
    st_ = state(X, d, mat)
    vol = elements.element_volume("truss" if name == "truss" else "quad", X, mat)
    assert st_.energy <= 1e-12 * mat.youngs_modulus * vol
    assert np.abs(st_.f_int).max() <= 1e-9 * mat.youngs_modulus * vol


@pytest.mark.parametrize("name,state,X,mat,n", CASES, ids=[c[0] for c in CASES])
@settings(max_examples=15, deadline=None)
@given(data=st.data())
def test_tangent_symmetric(name, state, X, mat, n, data):
    d = data.draw(arrays(float, n, elements=st.floats(-0.1, 0.1)))
    k = state(X, d, mat).k_t
    assert np.abs(k - k.T).max() <= 1e-12 * max(np.abs(k).max(), 1.0)


def test_tributary_volumes_sum_to_element_volumes():
    for name in ("two_bar_truss", "quad_fold", "arch_eas"):
        mesh = benchmarks.BUILDERS[name]().mesh
        V, total = elements.tributary_volume(mesh)
        X = mesh.coordinates
        direct = sum(elements.element_volume(el.kind, X[list(el.nodes)], mesh.materials[el.material])
                     for el in mesh.elements)
        assert total == pytest.approx(direct, rel=1e-12)
        assert np.all(V > 0)


def test_tributary_volumes_two_bar():
    mesh = benchmarks.two_bar_truss().mesh
    V, total = elements.tributary_volume(mesh)
    half = 0.5 * mesh.materials[mesh.elements[0].material].area * np.hypot(1.0, 0.2)
    assert np.allclose(V, [half, 2 * half, half])


def test_quad_volume():
    assert elements.element_volume("quad4", UNIT_SQUARE, Material(1.0, 0.0, thickness=0.5)) == pytest.approx(0.5)
