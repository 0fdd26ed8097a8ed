"""Symplectic Runge-Kutta stepping on T*R^2 and the lift/step/project driver.

States passed to :func:`rk_step` have shape ``(..., m)``: the trailing axis is
the phase-space vector and any leading axes are independent batch members.
Each batch member converges on its own; a member that has met the tolerance
is frozen, so its result does not depend on what else is in the batch.
"""

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .errors import NonConvergence
from .geometry import _finite, _project, fiber_lift
from .hamiltonians import _lifted, _vortex_lifted

RELIFT_POLICIES = ("persistent", "per_step")


@dataclass(frozen=True)
class ButcherTableau:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    name: str = ""

    def __post_init__(self):
        for key in ("A", "b", "c"):
            arr = np.array(getattr(self, key), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)
        s = self.b.size
        if self.A.shape != (s, s) or self.c.shape != (s,):
            raise ValueError(f"inconsistent tableau shapes A{self.A.shape} b{self.b.shape} c{self.c.shape}")

    @property
    def s(self):
        return self.b.size

    @property
    def explicit(self):
        return bool(np.all(np.triu(self.A) == 0))

    @property
    def symplecticity_defect(self):
        """``max |b_i a_ij + b_j a_ji - b_i b_j|``."""
        M = self.b[:, None] * self.A
        return float(np.max(np.abs(M + M.T - np.outer(self.b, self.b))))

    @property
    def symplectic(self):
        return self.symplecticity_defect < 1e-14

    @property
    def consistency_defect(self):
        return max(abs(float(np.sum(self.b)) - 1.0), float(np.max(np.abs(self.A.sum(axis=1) - self.c))))


def gauss_tableau(s):
    """Gauss-Legendre collocation with ``s`` stages (order ``2 s``)."""
    if s == 1:
        return ButcherTableau([[0.5]], [1.0], [0.5], name="gauss1")
    if s == 2:
        r3 = sqrt(3.0)
        return ButcherTableau(
            [[0.25, 0.25 - r3 / 6], [0.25 + r3 / 6, 0.25]],
            [0.5, 0.5],
            [0.5 - r3 / 6, 0.5 + r3 / 6],
            name="gauss2",
        )
    if s == 3:
        r15 = sqrt(15.0)
        return ButcherTableau(
            [
                [5 / 36, 2 / 9 - r15 / 15, 5 / 36 - r15 / 30],
                [5 / 36 + r15 / 24, 2 / 9, 5 / 36 - r15 / 24],
                [5 / 36 + r15 / 30, 2 / 9 + r15 / 15, 5 / 36],
            ],
            [5 / 18, 4 / 9, 5 / 18],
            [0.5 - r15 / 10, 0.5, 0.5 + r15 / 10],
            name="gauss3",
        )
    raise ValueError(f"Gauss-Legendre tableau available for s in (1, 2, 3), got {s!r}")


def explicit_euler_tableau():
    """Forward Euler; not symplectic, used as a negative control."""
    return ButcherTableau([[0.0]], [1.0], [0.0], name="euler")


METHODS = {
    "gauss1": lambda: gauss_tableau(1),
    "gauss2": lambda: gauss_tableau(2),
    "gauss3": lambda: gauss_tableau(3),
    "euler": explicit_euler_tableau,
}


def tableau(name):
    try:
        return METHODS[name]()
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {sorted(METHODS)}") from None


@dataclass(frozen=True)
class SolverOptions:
    rtol: float = 1e-14
    atol: float = 1e-14
    max_iter: int = 200
    newton: bool = True
    fd_step: float = 1e-7

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("solver tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")


DEFAULT_OPTIONS = SolverOptions()


def _stages(z, h, A, F):
    # einsum accumulates over stages in a fixed order for every element,
    # so the result does not depend on the batch shape
    return z + h * np.einsum("ij,j...->i...", A, F)


def _combine(b, F, z, h):
    return z + h * np.einsum("j,j...->...", b, F)


def _newton(f, z, h, A, Z0, opts):
    """Solve the stage equations of a single member by Newton with an FD Jacobian."""
    s, m = A.shape[0], z.size
    Z = Z0.copy() if np.all(np.isfinite(Z0)) else np.broadcast_to(z, (s, m)).copy()
    eye = np.eye(s * m)
    delta = np.inf
    for _ in range(opts.max_iter):
        F = f(Z)
        G = (Z - _stages(z, h, A, F)).reshape(-1)
        blocks = []
        for j in range(s):
            eps = opts.fd_step * (1.0 + np.max(np.abs(Z[j])))
            P = Z[j] + eps * np.eye(m)
            blocks.append(((f(P) - F[j]) / eps).T)
        J = eye.copy()
        for i in range(s):
            for j in range(s):
                J[i * m:(i + 1) * m, j * m:(j + 1) * m] -= h * A[i, j] * blocks[j]
        step = np.linalg.solve(J, G).reshape(s, m)
        Z = Z - step
        delta = float(np.max(np.abs(step)))
        if not np.isfinite(delta):
            break
        if delta <= opts.atol + opts.rtol * float(np.max(np.abs(Z))):
            return Z
    raise NonConvergence(f"Newton stage solve did not converge (last increment {delta:.3e})", residual=delta)


def rk_step(f, z, h, tab, opts=DEFAULT_OPTIONS):
    """One Runge-Kutta step of ``dz/dt = f(z)`` from ``z`` with step ``h``.

    Explicit tableaus are evaluated stage by stage.  Otherwise the stage
    equations ``Z_i = z + h sum_j a_ij f(Z_j)`` are solved by fixed-point
    iteration from ``Z_i = z``; members that stall or diverge fall back to
    Newton when ``opts.newton`` is set.  Raises :class:`NonConvergence`
    otherwise.
    """
    z = np.asarray(z, dtype=float)
    A, b = tab.A, tab.b
    s = tab.s
    if h == 0:
        return z.copy()
    if tab.explicit:
        return _explicit_step(f, z, h, tab)
    batch = z.shape[:-1]
    Z = np.broadcast_to(z, (s,) + z.shape).copy()
    if not batch:
        Z = _fixed_point_single(f, z, h, A, Z, opts)
    else:
        Z = _fixed_point_batch(f, z, h, A, Z, opts)
    return _combine(b, f(Z), z, h)


def _explicit_step(f, z, h, tab):
    F = np.empty((tab.s,) + z.shape)
    for i in range(tab.s):
        F[i] = f(z + h * np.einsum("j,j...->...", tab.A[i, :i], F[:i]))
    out = _combine(tab.b, F, z, h)
    if not np.all(np.isfinite(out)):
        raise NonConvergence("explicit step produced a non-finite state", residual=float("inf"))
    return out


def _fixed_point_single(f, z, h, A, Z, opts):
    first = None
    delta = float("nan")
    for _ in range(opts.max_iter):
        Znew = _stages(z, h, A, f(Z))
        delta = float(np.max(np.abs(Znew - Z)))
        if first is None:
            first = max(delta, np.finfo(float).tiny)
        if not np.isfinite(delta) or delta > 1e6 * first:
            break
        Z = Znew
        if delta <= opts.atol + opts.rtol * float(np.max(np.abs(Z))):
            return Z
    if not opts.newton:
        raise NonConvergence(
            f"fixed-point stage solve did not converge in {opts.max_iter} iterations", residual=delta
        )
    return _newton(f, z, h, A, Z, opts)


def _fixed_point_batch(f, z, h, A, Z, opts):
    batch = z.shape[:-1]
    active = np.ones(batch, dtype=bool)
    failed = np.zeros(batch, dtype=bool)
    first = None
    delta = np.zeros(batch)
    for _ in range(opts.max_iter):
        Znew = _stages(z, h, A, f(Z))
        delta = np.max(np.abs(Znew - Z), axis=(0, -1))
        scale = np.max(np.abs(Znew), axis=(0, -1))
        if first is None:
            first = np.maximum(delta, np.finfo(float).tiny)
        bad = ~np.isfinite(delta) | (delta > 1e6 * first)
        failed |= bad & active
        active &= ~bad
        Z = np.where(active[None, ..., None], Znew, Z)
        active &= delta > opts.atol + opts.rtol * scale
        if not np.any(active):
            break
    failed |= active
    if np.any(failed):
        if not opts.newton:
            worst = float(np.max(np.where(failed, delta, 0.0)))
            raise NonConvergence(
                f"fixed-point stage solve did not converge in {opts.max_iter} iterations", residual=worst
            )
        for idx in np.ndindex(batch):
            if failed[idx]:
                Z[(slice(None),) + idx] = _newton(f, z[idx], h, A, Z[(slice(None),) + idx], opts)
    return Z


def collective_field(H):
    """The collective vector field of ``H`` as a callable on ``(..., 4)`` arrays."""
    return lambda z: _lifted(H, z)


def collective_step(H, w, h, tab, opts=DEFAULT_OPTIONS, phase=0.0):
    """Lift ``w`` to T*R^2, take one Runge-Kutta step there, project back."""
    z = fiber_lift(w, phase)
    return _project(rk_step(collective_field(H), z, h, tab, opts))


@dataclass
class Trajectory:
    """Fixed-step trajectory; arrays are indexed by step first, then batch."""

    h: float
    t: np.ndarray
    z: np.ndarray
    w: np.ndarray
    energy: np.ndarray
    orbit_norm: np.ndarray
    M: np.ndarray
    method: str = ""

    @property
    def n_steps(self):
        return self.t.size - 1


def _record(z, energy_fn):
    w = _project(z)
    return w, energy_fn(w), np.linalg.norm(w, axis=-1), np.sum(z * z, axis=-1)


def integrate(H, w0, h, n_steps, tab, opts=DEFAULT_OPTIONS, relift="persistent", phase=0.0, t0=0.0):
    """Integrate ``H`` from ``w0`` (shape ``(3,)`` or ``(B, 3)``) for ``n_steps`` steps.

    ``relift="persistent"`` keeps the collective point between steps;
    ``"per_step"`` re-lifts every projected point before stepping.  Both give
    the same projected trajectory up to solver tolerance.
    """
    if relift not in RELIFT_POLICIES:
        raise ValueError(f"relift policy must be one of {RELIFT_POLICIES}, got {relift!r}")
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    w0 = _finite(w0, "w0", 3)
    f = collective_field(H)
    z = fiber_lift(w0, phase)
    zs = np.empty((n_steps + 1,) + z.shape)
    zs[0] = z
    for k in range(n_steps):
        start = fiber_lift(_project(z), phase) if relift == "per_step" else z
        try:
            z = rk_step(f, start, h, tab, opts)
        except NonConvergence as exc:
            exc.step = k
            raise
        zs[k + 1] = z
    w, energy, norm, M = _record(zs, H.value)
    t = t0 + np.arange(n_steps + 1) * h
    return Trajectory(h=h, t=t, z=zs, w=w, energy=energy, orbit_norm=norm, M=M, method=tab.name)


def integrate_product(sys, states, h, n_steps, tab, opts=DEFAULT_OPTIONS, phase=0.0, t0=0.0):
    """Integrate ``N`` point vortices as one stacked ``4N``-dimensional collective system.

    Returns one :class:`Trajectory` per vortex; ``energy`` holds the shared
    interaction energy and ``M`` the per-factor momentum.
    """
    from .hamiltonians import vortex_hamiltonian

    W = _finite(states, "states", 3)
    if W.shape != (sys.N, 3):
        raise ValueError(f"expected states of shape ({sys.N}, 3), got {W.shape}")
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    N = sys.N

    def f(flat):
        Z = flat.reshape(flat.shape[:-1] + (N, 4))
        return _vortex_lifted(sys, Z).reshape(flat.shape)

    z = fiber_lift(W, phase).reshape(4 * N)
    f(z)  # fails loudly on collisions in the initial data
    zs = np.empty((n_steps + 1, 4 * N))
    zs[0] = z
    for k in range(n_steps):
        try:
            z = rk_step(f, z, h, tab, opts)
        except NonConvergence as exc:
            exc.step = k
            raise
        zs[k + 1] = z
    Z = zs.reshape(n_steps + 1, N, 4)
    w_all = _project(Z)
    energy = vortex_hamiltonian(sys, w_all) if N > 1 else np.zeros(n_steps + 1)
    t = t0 + np.arange(n_steps + 1) * h
    return [
        Trajectory(
            h=h,
            t=t,
            z=Z[:, i],
            w=w_all[:, i],
            energy=energy,
            orbit_norm=np.linalg.norm(w_all[:, i], axis=-1),
            M=np.sum(Z[:, i] ** 2, axis=-1),
            method=tab.name,
        )
        for i in range(N)
    ]
