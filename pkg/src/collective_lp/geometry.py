"""Hopf momentum map between T*R^2 and R^3 = su(2)*, and the group actions around it.

Collective points are stored as real 4-vectors ``(q1, q2, p1, p2)``; the complex
view ``(z1, z2) = (q1 + i p1, q2 + i p2)`` is derived on demand.  Momentum points
are real 3-vectors ``(w1, w2, w3)``.  Every function accepts arrays with
arbitrary leading batch dimensions and acts on the trailing axis.
"""

import numpy as np

#: Largest accepted max-abs entry of ``U^H U - I`` for SU(2) inputs.
UNITARITY_TOL = 1e-9


def _finite(x, name, size):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (size,):
        raise ValueError(f"{name} must have trailing dimension {size}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    return x


# (q1, q2, p1, p2) index order.  w_k = z . _QUAD[k] . z
_QUAD = np.zeros((3, 4, 4))
_QUAD[0, 0, 1] = _QUAD[0, 1, 0] = _QUAD[0, 2, 3] = _QUAD[0, 3, 2] = 0.25
_QUAD[1, 0, 3] = _QUAD[1, 3, 0] = 0.25
_QUAD[1, 1, 2] = _QUAD[1, 2, 1] = -0.25
_QUAD[2, 0, 0] = _QUAD[2, 2, 2] = 0.25
_QUAD[2, 1, 1] = _QUAD[2, 3, 3] = -0.25

# generator of x at z: sum_k x_k _GEN[k] @ z
_GEN = np.zeros((3, 4, 4))
for _k, _rows in enumerate(
    [
        [(0, 3, 1), (1, 2, 1), (2, 1, -1), (3, 0, -1)],
        [(0, 1, -1), (1, 0, 1), (2, 3, -1), (3, 2, 1)],
        [(0, 2, 1), (1, 3, -1), (2, 0, -1), (3, 1, 1)],
    ]
):
    for _i, _j, _sign in _rows:
        _GEN[_k, _i, _j] = 0.5 * _sign
_GEN.setflags(write=False)
_QUAD.setflags(write=False)


def _project(z):
    return np.einsum("...i,kij,...j->...k", z, _QUAD, z)


def _generator(x, z):
    return np.einsum("...k,kij,...j->...i", x, _GEN, z)


def hopf_project(z):
    """Project collective points to R^3.

    Satisfies ``|hopf_project(z)| = |z|**2 / 4``.

    >>> hopf_project([1.0, 1.0, 1.0, 1.0])
    array([1., 0., 0.])
    """
    return _project(_finite(z, "z", 4))


def to_complex(z):
    """Complex view ``(q1 + i p1, q2 + i p2)`` of a real collective point."""
    z = np.asarray(z, dtype=float)
    return np.stack([z[..., 0] + 1j * z[..., 2], z[..., 1] + 1j * z[..., 3]], axis=-1)


def from_complex(c):
    c = np.asarray(c, dtype=complex)
    return np.stack([c[..., 0].real, c[..., 1].real, c[..., 0].imag, c[..., 1].imag], axis=-1)


def u1_act(z, theta):
    """Multiply both complex components of ``z`` by ``exp(i theta)``."""
    z = _finite(z, "z", 4)
    cos, sin = np.cos(theta), np.sin(theta)
    cos = np.asarray(cos)[..., None]
    sin = np.asarray(sin)[..., None]
    q = z[..., :2]
    p = z[..., 2:]
    return np.concatenate([cos * q - sin * p, sin * q + cos * p], axis=-1)


def fiber_lift(w, phase=0.0):
    """Return a point on the fiber of the projection above ``w``.

    The base point is taken from whichever chart is well conditioned (north
    chart for ``w3 >= 0``, south chart otherwise) and then rotated along the
    fiber by ``phase``.  The origin lifts to the zero vector.
    """
    w = _finite(w, "w", 3)
    w1, w2, w3 = w[..., 0], w[..., 1], w[..., 2]
    r = np.linalg.norm(w, axis=-1)
    north = w3 >= 0
    a = np.sqrt(2.0 * (r + np.abs(w3)))
    safe = np.where(a > 0, a, 1.0)
    big = np.where(a > 0, a, 0.0)
    re = 2.0 * w1 / safe
    im = 2.0 * w2 / safe
    # north: z1 = a, z2 = (2w1 + 2i w2)/a ; south: z1 = (2w1 - 2i w2)/b, z2 = b
    q1 = np.where(north, big, re)
    p1 = np.where(north, 0.0, -im)
    q2 = np.where(north, re, big)
    p2 = np.where(north, im, 0.0)
    z = np.stack([q1, q2, p1, p2], axis=-1)
    if np.any(phase != 0):
        z = u1_act(z, phase)
    return z


def momentum_M(z):
    """The U(1) momentum ``|z1|^2 + |z2|^2``."""
    z = _finite(z, "z", 4)
    return np.sum(z * z, axis=-1)


def cotangent_lift(z):
    """Transpose of the Jacobian of :func:`hopf_project` at ``z``, shape ``(..., 4, 3)``."""
    z = _finite(z, "z", 4)
    q1, q2, p1, p2 = z[..., 0], z[..., 1], z[..., 2], z[..., 3]
    rows = [
        [q2, p2, q1],
        [q1, -p1, -q2],
        [p2, -q2, p1],
        [p1, q1, -p2],
    ]
    return 0.5 * np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def su2_from_vec(x):
    """Map ``x`` in (R^3, cross product) to the matching traceless skew-Hermitian matrix."""
    x = _finite(x, "x", 3)
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    out = np.empty(x.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = -0.5j * x3
    out[..., 0, 1] = 0.5 * (-1j * x1 - x2)
    out[..., 1, 0] = 0.5 * (-1j * x1 + x2)
    out[..., 1, 1] = 0.5j * x3
    return out


def vec_from_su2(xi):
    """Inverse of :func:`su2_from_vec` (the anti-Hermitian part is assumed)."""
    xi = np.asarray(xi, dtype=complex)
    return np.stack(
        [-2.0 * xi[..., 0, 1].imag, -2.0 * xi[..., 0, 1].real, -2.0 * xi[..., 0, 0].imag],
        axis=-1,
    )


def infinitesimal_generator(x, z):
    """Vector field on T*R^2 generated by the su(2) element matching ``x``, evaluated at ``z``."""
    return _generator(_finite(x, "x", 3), _finite(z, "z", 4))


def momentum_pairing(x, z):
    """Hamiltonian of :func:`infinitesimal_generator`; equals ``hopf_project(z) @ x``."""
    x = _finite(x, "x", 3)
    z = _finite(z, "z", 4)
    q1, q2, p1, p2 = z[..., 0], z[..., 1], z[..., 2], z[..., 3]
    return (
        0.5 * (q1 * q2 + p1 * p2) * x[..., 0]
        + 0.5 * (q1 * p2 - q2 * p1) * x[..., 1]
        + 0.25 * (q1 * q1 + p1 * p1 - q2 * q2 - p2 * p2) * x[..., 2]
    )


def unitarity_defect(U):
    U = np.asarray(U, dtype=complex)
    return float(np.max(np.abs(U.conj().T @ U - np.eye(2))))


def _check_su2(U):
    U = np.asarray(U, dtype=complex)
    if U.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {U.shape}")
    if not np.all(np.isfinite(U)):
        raise ValueError("U must be finite")
    defect = unitarity_defect(U)
    if defect > UNITARITY_TOL:
        raise ValueError(f"U is not unitary (defect {defect:.3e})")
    return U


def su2_action(U, z):
    """Act on ``z`` by matrix multiplication in the complex view."""
    U = _check_su2(U)
    c = to_complex(_finite(z, "z", 4))
    return from_complex(c @ U.T)


def rotation_of_su2(U):
    """The rotation ``R`` with ``hopf_project(su2_action(U, z)) == R @ hopf_project(z)``.

    Column ``k`` is read off from ``U xi_k U^H`` where ``xi_k`` is the su(2)
    image of the ``k``-th unit vector.
    """
    U = _check_su2(U)
    basis = su2_from_vec(np.eye(3))
    conj = U @ basis @ U.conj().T
    return vec_from_su2(conj).T


def random_su2(rng):
    """Haar-distributed SU(2) element drawn from ``rng``."""
    a = rng.standard_normal(4)
    a /= np.linalg.norm(a)
    alpha = a[0] + 1j * a[1]
    beta = a[2] + 1j * a[3]
    return np.array([[alpha, -beta.conjugate()], [beta, alpha.conjugate()]])


def random_rotation(rng):
    """Haar-distributed SO(3) element drawn from ``rng``."""
    return rotation_of_su2(random_su2(rng))
