import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from collective_lp.geometry import (
    cotangent_lift,
    fiber_lift,
    from_complex,
    hopf_project,
    infinitesimal_generator,
    momentum_M,
    momentum_pairing,
    random_rotation,
    random_su2,
    rotation_of_su2,
    su2_action,
    su2_from_vec,
    to_complex,
    u1_act,
)

reals = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
vec4 = arrays(np.float64, 4, elements=reals)
vec3 = arrays(np.float64, 3, elements=reals)
angles = st.floats(-2 * np.pi, 2 * np.pi, allow_nan=False)


def fd_jacobian(fn, x, delta=1e-5):
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = delta
        cols.append((fn(x + e) - fn(x - e)) / (2 * delta))
    return np.stack(cols, axis=-1)


def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


@pytest.mark.parametrize(
    "z, expected",
    [
        ([1, 0, 0, 0], [0, 0, 0.25]),
        ([0, 0, 0, 0], [0, 0, 0]),
        ([1, 1, 1, 1], [1, 0, 0]),
    ],
)
def test_hopf_project_examples(z, expected):
    npt.assert_array_equal(hopf_project(np.array(z, dtype=float)), expected)


def test_hopf_project_rejects_nonfinite():
    with pytest.raises(ValueError):
        hopf_project([np.nan, 0, 0, 0])
    with pytest.raises(ValueError):
        hopf_project([1.0, 2.0, 3.0])


def test_fiber_lift_examples():
    npt.assert_allclose(fiber_lift([0, 0, 0.25]), [1, 0, 0, 0], atol=1e-15)
    npt.assert_array_equal(fiber_lift([0.0, 0.0, 0.0], 1.3), np.zeros(4))
    npt.assert_allclose(fiber_lift([0.5, 0, 0]), [1, 1, 0, 0], atol=1e-15)
    npt.assert_allclose(hopf_project(np.array([1.0, 1.0, 0.0, 0.0])), [0.5, 0, 0])


def test_fiber_lift_south_branch():
    w = np.array([0.1, -0.2, -3.0])
    z = fiber_lift(w)
    npt.assert_allclose(hopf_project(z), w, atol=1e-15)
    assert z[2] != 0 or z[0] != 0
    npt.assert_allclose(z[1], np.sqrt(2 * (np.linalg.norm(w) - w[2])))


def test_fiber_lift_near_south_pole_is_accurate():
    w = np.array([1e-9, 2e-9, -1.0])
    npt.assert_allclose(hopf_project(fiber_lift(w)), w, rtol=0, atol=1e-15)


def test_u1_act_examples():
    z = np.array([0.3, -1.2, 2.0, 0.7])
    npt.assert_array_equal(u1_act(z, 0.0), z)
    npt.assert_allclose(u1_act([1.0, 0, 0, 0], np.pi / 2), [0, 0, 1, 0], atol=1e-16)
    npt.assert_allclose(u1_act(z, np.pi), -z, atol=1e-15)


def test_u1_act_matches_complex_phase():
    z = np.array([0.3, -1.2, 2.0, 0.7])
    expected = from_complex(to_complex(z) * np.exp(0.4j))
    npt.assert_allclose(u1_act(z, 0.4), expected, atol=1e-15)


@pytest.mark.parametrize("z, m", [([1, 0, 0, 0], 1), ([0, 0, 0, 0], 0), ([1, 1, 1, 1], 4)])
def test_momentum_M_examples(z, m):
    assert momentum_M(np.array(z, dtype=float)) == m


def test_cotangent_lift_examples():
    npt.assert_array_equal(
        cotangent_lift([1.0, 0, 0, 0]), 0.5 * np.array([[0, 0, 1], [1, 0, 0], [0, 0, 0], [0, 1, 0]])
    )
    npt.assert_array_equal(cotangent_lift(np.zeros(4)), np.zeros((4, 3)))


def test_cotangent_lift_is_transposed_jacobian():
    rng = np.random.default_rng(1)
    for _ in range(20):
        z = rng.normal(size=4)
        jac = fd_jacobian(hopf_project, z)
        assert np.max(np.abs(cotangent_lift(z) - jac.T)) < 1e-7


def test_su2_from_vec_examples():
    npt.assert_array_equal(su2_from_vec([0, 0, 1.0]), 0.5 * np.diag([-1j, 1j]))
    npt.assert_array_equal(su2_from_vec(np.zeros(3)), np.zeros((2, 2)))
    npt.assert_array_equal(su2_from_vec([1.0, 0, 0]), 0.5 * np.array([[0, -1j], [-1j, 0]]))


def test_su2_from_vec_is_lie_algebra_isomorphism():
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=(2, 3))
    X, Y = su2_from_vec(x), su2_from_vec(y)
    npt.assert_allclose(X @ Y - Y @ X, su2_from_vec(np.cross(x, y)), atol=1e-14)
    npt.assert_allclose(X.conj().T, -X)
    assert abs(np.trace(X)) < 1e-15


def test_infinitesimal_generator_examples():
    npt.assert_array_equal(infinitesimal_generator([0, 0, 1.0], [1.0, 0, 0, 0]), [0, 0, -0.5, 0])
    z = np.array([0.3, -1.2, 2.0, 0.7])
    npt.assert_array_equal(infinitesimal_generator(np.zeros(3), z), np.zeros(4))


def test_infinitesimal_generator_matches_matrix_action():
    rng = np.random.default_rng(3)
    for _ in range(100):
        x = rng.normal(size=3)
        z = rng.normal(size=4)
        oracle = from_complex(su2_from_vec(x) @ to_complex(z))
        assert np.max(np.abs(infinitesimal_generator(x, z) - oracle)) < 1e-14


def test_momentum_pairing_examples():
    assert momentum_pairing([0, 0, 1.0], [1.0, 0, 0, 0]) == 0.25
    assert momentum_pairing([1.0, 0, 0], [1.0, 1, 1, 1]) == 1.0
    assert momentum_pairing([0.3, 2, -1], np.zeros(4)) == 0.0


def test_su2_action_examples():
    z = np.array([0.3, -1.2, 2.0, 0.7])
    npt.assert_array_equal(su2_action(np.eye(2), z), z)
    phi = np.pi / 2
    U = np.diag([np.exp(-1j * phi), np.exp(1j * phi)])
    npt.assert_allclose(su2_action(U, [1.0, 0, 0, 0]), [0, 0, -1, 0], atol=1e-16)


def test_su2_action_preserves_M():
    rng = np.random.default_rng(4)
    for _ in range(50):
        U = random_su2(rng)
        z = rng.normal(size=4)
        assert abs(momentum_M(su2_action(U, z)) - momentum_M(z)) < 1e-13


def test_non_unitary_rejected():
    with pytest.raises(ValueError, match="unitary"):
        su2_action(np.array([[1.0, 1e-6], [0, 1.0]]), np.zeros(4))
    with pytest.raises(ValueError, match="unitary"):
        rotation_of_su2(2 * np.eye(2))


def test_rotation_of_su2_examples():
    npt.assert_allclose(rotation_of_su2(np.eye(2)), np.eye(3), atol=1e-15)
    npt.assert_allclose(rotation_of_su2(-np.eye(2)), np.eye(3), atol=1e-15)
    for phi in (0.3, 1.1, -2.0):
        U = np.diag([np.exp(-1j * phi), np.exp(1j * phi)])
        npt.assert_allclose(rotation_of_su2(U), rot_z(2 * phi), atol=1e-15)


def test_rotation_of_su2_is_a_rotation_and_homomorphism():
    rng = np.random.default_rng(5)
    for _ in range(20):
        U, V = random_su2(rng), random_su2(rng)
        R = rotation_of_su2(U)
        npt.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(R) - 1) < 1e-12
        assert np.max(np.abs(rotation_of_su2(U @ V) - R @ rotation_of_su2(V))) < 1e-12


def test_random_rotation_is_proper():
    R = random_rotation(np.random.default_rng(6))
    npt.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) > 0


def test_batched_inputs():
    rng = np.random.default_rng(7)
    Z = rng.normal(size=(5, 2, 4))
    W = hopf_project(Z)
    assert W.shape == (5, 2, 3)
    npt.assert_allclose(W[3, 1], hopf_project(Z[3, 1]))
    npt.assert_allclose(hopf_project(fiber_lift(W, 0.7)), W, atol=1e-13)


@given(vec4)
def test_norm_relation(z):
    w = hopf_project(z)
    r2 = z @ z
    assert abs(np.linalg.norm(w) - r2 / 4) <= 1e-14 * (1 + r2)


@given(vec3, angles)
def test_lift_then_project_roundtrip(w, theta):
    z = fiber_lift(w, theta)
    assert np.max(np.abs(hopf_project(z) - w)) <= 1e-13 * (1 + np.linalg.norm(w))
    assert abs(z @ z - 4 * np.linalg.norm(w)) <= 1e-13 * (1 + np.linalg.norm(w))


@given(vec3)
def test_phase_post_composes_with_u1(w):
    npt.assert_allclose(fiber_lift(w, 0.9), u1_act(fiber_lift(w), 0.9), atol=1e-13)


@given(vec4, angles)
def test_u1_preserves_fibers(z, theta):
    diff = hopf_project(u1_act(z, theta)) - hopf_project(z)
    assert np.max(np.abs(diff)) <= 1e-13 * (1 + z @ z)


@given(vec3, vec3, vec4, reals)
def test_generator_bilinear(x, y, z, a):
    lhs = infinitesimal_generator(x + a * y, z)
    rhs = infinitesimal_generator(x, z) + a * infinitesimal_generator(y, z)
    scale = 1 + np.abs(z).max() * (np.abs(x).max() + abs(a) * np.abs(y).max())
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * scale
    lhs = infinitesimal_generator(x, z * a)
    assert np.max(np.abs(lhs - a * infinitesimal_generator(x, z))) <= 1e-13 * scale


@given(vec3, vec4)
def test_pairing_identity(x, z):
    scale = 1 + np.abs(x).max() * (z @ z)
    assert abs(momentum_pairing(x, z) - hopf_project(z) @ x) <= 1e-14 * scale


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), vec4)
def test_hopf_equivariance(seed, z):
    U = random_su2(np.random.default_rng(seed))
    lhs = hopf_project(su2_action(U, z))
    rhs = rotation_of_su2(U) @ hopf_project(z)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + z @ z)
