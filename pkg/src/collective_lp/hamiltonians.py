"""Hamiltonians on R^3, their collective lifts to T*R^2, and the built-in models."""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import OriginSingularity, VortexCollision
from .geometry import _QUAD, _finite, _generator, _project

#: Radius of the excluded ball for sphere-restricted Hamiltonians.
ORIGIN_RADIUS = 1e-8
#: Minimum chord distance between two vortices.
COLLISION_CHORD = 1e-10


@dataclass(frozen=True)
class HamiltonianSystem:
    """A Hamiltonian on R^3 given as a value/gradient pair.

    Both callables take arrays of shape ``(..., 3)``; ``value`` returns shape
    ``(...)`` and ``gradient`` returns shape ``(..., 3)``.  They must be pure.
    """

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    name: str = "H"

    def __call__(self, w):
        return self.value(np.asarray(w, dtype=float))

    def rotated(self, A):
        """The Hamiltonian ``w -> H(A w)``."""
        A = np.asarray(A, dtype=float)
        return HamiltonianSystem(
            value=lambda w: self.value(w @ A.T),
            gradient=lambda w: self.gradient(w @ A.T) @ A,
            name=f"{self.name}∘A",
        )


def hamiltonian_vf_r3(H, w):
    """Lie-Poisson vector field ``w x grad H(w)``."""
    w = _finite(w, "w", 3)
    return np.cross(w, H.gradient(w))


def collective_value(H, z):
    """``H(hopf_project(z))``; constant along fibers."""
    return H.value(_project(_finite(z, "z", 4)))


def _lifted(H, z):
    # d(H o pi)/dz = sum_k dH/dw_k * 2 Q_k z, then q' = dH/dp, p' = -dH/dq
    g = 2.0 * np.einsum("...k,kij,...j->...i", H.gradient(_project(z)), _QUAD, z)
    out = np.empty_like(g)
    out[..., :2] = g[..., 2:]
    out[..., 2:] = -g[..., :2]
    return out


def lifted_vf(H, z):
    """Hamiltonian vector field of the collective Hamiltonian ``H o hopf_project``.

    Computed as ``J^{-1} (T*pi) grad H(pi(z))``; at every ``z`` it coincides with
    the infinitesimal generator of ``grad H(hopf_project(z))``.  Its projection is ``grad H x w``, i.e. the negative of
    :func:`hamiltonian_vf_r3`: the collective flow of ``H`` descends to the
    Lie-Poisson flow traversed in the opposite orientation.
    """
    return _lifted(H, _finite(z, "z", 4))


def rigid_body(I1, I2, I3):
    """Free rigid body ``H = sum(w_i**2 / I_i) / 2`` with moments of inertia ``I1, I2, I3``."""
    inertia = np.array([I1, I2, I3], dtype=float)
    if not np.all(np.isfinite(inertia)) or np.any(inertia <= 0):
        raise ValueError(f"moments of inertia must be positive, got {inertia.tolist()}")
    inv = 1.0 / inertia

    def value(w):
        return 0.5 * np.sum(w * w * inv, axis=-1)

    def gradient(w):
        return w * inv

    return HamiltonianSystem(value, gradient, name=f"rigid_body{tuple(inertia.tolist())}")


def linear(a):
    """``H = a . w``; its collective field is linear and the flow is a rotation."""
    a = np.asarray(a, dtype=float)

    def value(w):
        return w @ a

    def gradient(w):
        return np.broadcast_to(a, np.shape(w)).copy()

    return HamiltonianSystem(value, gradient, name=f"linear{tuple(a.tolist())}")


def sphere_extend(Hbar):
    """Radial extension ``w -> Hbar(w / |w|)`` of a function given on the unit sphere.

    ``Hbar`` is any :class:`HamiltonianSystem`; only its values and gradients
    at unit vectors are used.  Evaluating inside ``|w| < 1e-8`` raises
    :class:`OriginSingularity`.
    """

    def unit(w):
        r = np.linalg.norm(w, axis=-1)
        if np.any(r < ORIGIN_RADIUS):
            raise OriginSingularity(f"sphere-restricted Hamiltonian evaluated at |w| = {np.min(r):.3e}")
        return w / r[..., None], r

    def value(w):
        x, _ = unit(w)
        return Hbar.value(x)

    def gradient(w):
        x, r = unit(w)
        g = Hbar.gradient(x)
        radial = np.sum(g * x, axis=-1)[..., None]
        return (g - radial * x) / r[..., None]

    return HamiltonianSystem(value, gradient, name=f"sphere({Hbar.name})")


@dataclass(frozen=True)
class ProductVortexSystem:
    """``N`` point vortices on the unit sphere with circulations ``gammas``.

    Factor ``i`` of the product carries the bracket weight ``1 / gammas[i]``.
    """

    gammas: np.ndarray = field()

    def __post_init__(self):
        g = np.array(self.gammas, dtype=float).reshape(-1)
        if g.size == 0:
            raise ValueError("at least one vortex is required")
        if not np.all(np.isfinite(g)) or np.any(g == 0):
            raise ValueError(f"vortex strengths must be finite and nonzero, got {g.tolist()}")
        g.setflags(write=False)
        object.__setattr__(self, "gammas", g)
        # constants of the gradient kernel
        object.__setattr__(self, "_coupling", np.outer(g, g) / (2.0 * np.pi))
        object.__setattr__(self, "_diag", np.diag(np.full(g.size, np.inf)))
        object.__setattr__(self, "_weights", (1.0 / g)[:, None])

    @property
    def N(self):
        return self.gammas.size

    @property
    def weights(self):
        return 1.0 / self.gammas


def _directions(W):
    r = np.sqrt(np.einsum("...i,...i->...", W, W))
    if np.any(r <= 0):
        raise VortexCollision("vortex state at the origin has no direction")
    return W / r[..., None], r


def _chord2(X, diag):
    """Squared chord distances with ``inf`` on the diagonal; raises on collisions."""
    diff = X[..., :, None, :] - X[..., None, :, :]
    chord2 = np.einsum("...k,...k->...", diff, diff) + diag
    if diag.shape[0] > 1 and np.min(chord2) <= COLLISION_CHORD**2:
        smallest = np.sqrt(np.min(chord2))
        raise VortexCollision(f"vortex chord distance {smallest:.3e} below {COLLISION_CHORD:.0e}")
    return chord2


def vortex_hamiltonian(sys, states):
    """Interaction energy ``-(1/4 pi) sum_{i<j} G_i G_j ln(2 - 2 x_i . x_j)``.

    ``states`` has shape ``(..., N, 3)``; only the directions matter.
    """
    W = _finite(states, "states", 3)
    if W.shape[-2] != sys.N:
        raise ValueError(f"expected {sys.N} vortex states, got {W.shape[-2]}")
    X, _ = _directions(W)
    chord2 = _chord2(X, sys._diag)
    off = np.isfinite(chord2)
    gg = sys.gammas[:, None] * sys.gammas[None, :]
    logs = np.log(np.where(off, chord2, 1.0))
    return -np.sum(np.where(off, gg * logs, 0.0), axis=(-2, -1)) / (8.0 * np.pi)


def vortex_gradient(sys, states):
    """Gradient of :func:`vortex_hamiltonian` with respect to each ``w_i``; shape ``(..., N, 3)``."""
    W = np.asarray(states, dtype=float)
    X, r = _directions(W)
    # d/dx_i = (1/4 pi) sum_j G_i G_j x_j / (1 - x_i.x_j) and 1 - x_i.x_j = chord^2 / 2
    coeff = sys._coupling / _chord2(X, sys._diag)
    g = coeff @ X
    radial = np.einsum("...i,...i->...", g, X)[..., None]
    return (g - radial * X) / r[..., None]


def vortex_lifted_vf(sys, Z):
    """Collective vector field on ``(T*R^2)^N``; ``Z`` has shape ``(..., N, 4)``.

    Block ``i`` is ``(1 / G_i)`` times the collective field of the interaction
    energy with respect to ``w_i``, evaluated at ``z_i``.
    """
    Z = _finite(Z, "Z", 4)
    return _vortex_lifted(sys, Z)


def _vortex_lifted(sys, Z):
    grads = vortex_gradient(sys, _project(Z))
    return sys._weights * _generator(grads, Z)


def vortex_velocity(sys, states):
    """Velocities of the projected vortex dynamics driven by :func:`vortex_lifted_vf`.

    Returns ``(1/4 pi) sum_j G_j (x_j x x_i) / (1 - x_i . x_j)`` for unit states.
    """
    W = _finite(states, "states", 3)
    return sys.weights[:, None] * np.cross(vortex_gradient(sys, W), W)
