"""Quantitative checks of the structural guarantees of collective integrators.

Every check evaluates all of its samples as one batch; batch members are
independent (see :mod:`collective_lp.integrators`), so results are ordered by
sample index and do not depend on how the work is grouped.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from .integrators import DEFAULT_OPTIONS, collective_step, gauss_tableau, integrate

#: Central-difference step for Jacobians of one-step maps.
FD_DELTA = 1e-5


@dataclass
class DriftReport:
    quantity: str
    values: np.ndarray
    max_drift: float
    step_of_max: int


def _drift(quantity, values):
    values = np.asarray(values, dtype=float)
    d = np.abs(values - values[0])
    idx = np.unravel_index(int(np.argmax(d)), d.shape)
    return DriftReport(quantity, values, float(d[idx]), int(idx[0]))


def orbit_drift(traj):
    """Drift of ``|w_k|``, the radius of the coadjoint sphere."""
    return _drift("orbit_norm", traj.orbit_norm)


def energy_drift(traj, H=None):
    values = traj.energy if H is None else H.value(traj.w)
    return _drift("energy", values)


def momentum_drift(traj):
    """Drift of the U(1) momentum ``M(z_k) = |z_k|^2``."""
    return _drift("M", traj.M)


@dataclass
class OrderEstimate:
    h_list: np.ndarray
    errors: np.ndarray
    slope: float
    correlation: float

    @property
    def valid(self):
        return self.h_list.size >= 3 and self.correlation >= 0.99


def _steps_for(t_end, h):
    n = int(round(t_end / h))
    if n < 1 or abs(n * h - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not an integer multiple of h={h}")
    return n


def convergence_order(H, w0, tab, h_list, t_end, opts=DEFAULT_OPTIONS, reference=None):
    """Fit the observed order of ``tab`` from errors at ``t_end``.

    The reference end point comes from ``gauss_tableau(3)`` at ``min(h_list) / 20``
    unless ``reference`` is given.
    """
    h_list = np.asarray(h_list, dtype=float)
    if h_list.size < 3:
        raise ValueError("at least three step sizes are required")
    ratios = h_list[1:] / h_list[:-1]
    if not np.allclose(ratios, ratios[0], rtol=1e-9, atol=0.0) or ratios[0] == 1.0:
        raise ValueError("step sizes must be geometrically spaced")
    if reference is None:
        h_ref = float(np.min(h_list)) / 20
        ref_traj = integrate(H, w0, h_ref, _steps_for(t_end, h_ref), gauss_tableau(3), opts)
        reference = ref_traj.w[-1]
    errors = []
    for h in h_list:
        traj = integrate(H, w0, h, _steps_for(t_end, h), tab, opts)
        errors.append(np.linalg.norm(traj.w[-1] - reference))
    errors = np.array(errors)
    x, y = np.log(h_list), np.log(errors)
    slope = float(np.polyfit(x, y, 1)[0])
    correlation = float(np.corrcoef(x, y)[0, 1])
    return OrderEstimate(h_list, errors, slope, correlation)


def _hat(w):
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1], out[..., 0, 2] = -w[..., 2], w[..., 1]
    out[..., 1, 0], out[..., 1, 2] = w[..., 2], -w[..., 0]
    out[..., 2, 0], out[..., 2, 1] = -w[..., 1], w[..., 0]
    return out


def poisson_check(H, tab, h, w_samples, opts=DEFAULT_OPTIONS, delta=FD_DELTA):
    """Max over samples of ``|D phi B(w) D phi^T - B(phi(w))|_max`` for the one-step map ``phi``.

    ``B(w) v = w x v`` is the Lie-Poisson bivector; ``D phi`` is taken by
    central differences with step ``delta``.
    """
    W = np.atleast_2d(np.asarray(w_samples, dtype=float))
    if h == 0:
        return 0.0
    E = delta * np.eye(3)
    probes = np.concatenate([W[:, None, :] + E, W[:, None, :] - E, W[:, None, :]], axis=1)
    out = collective_step(H, probes, h, tab, opts)
    D = ((out[:, :3] - out[:, 3:6]) / (2 * delta)).transpose(0, 2, 1)
    lhs = D @ _hat(W) @ D.transpose(0, 2, 1)
    return float(np.max(np.abs(lhs - _hat(out[:, 6]))))


def equivariance_check(H, tab, h, rotations, w_samples, opts=DEFAULT_OPTIONS):
    """Max over rotations ``A`` and samples of ``|phi_{H o A}(w) - A^T phi_H(A w)| / (1 + |w|)``."""
    W = np.atleast_2d(np.asarray(w_samples, dtype=float))
    scale = 1.0 + np.linalg.norm(W, axis=-1)
    worst = 0.0
    for A in rotations:
        A = np.asarray(A, dtype=float)
        lhs = collective_step(H.rotated(A), W, h, tab, opts)
        rhs = collective_step(H, W @ A.T, h, tab, opts) @ A
        worst = max(worst, float(np.max(np.linalg.norm(lhs - rhs, axis=-1) / scale)))
    return worst


def fiber_independence_check(H, tab, h, w_samples, thetas, opts=DEFAULT_OPTIONS):
    """Max over samples and fiber phases of the change in the projected step."""
    W = np.atleast_2d(np.asarray(w_samples, dtype=float))
    base = collective_step(H, W, h, tab, opts, phase=0.0)
    worst = 0.0
    for theta in thetas:
        moved = collective_step(H, W, h, tab, opts, phase=float(theta))
        worst = max(worst, float(np.max(np.linalg.norm(moved - base, axis=-1))))
    return worst


def random_unit_vectors(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclass
class CheckResult:
    """One pass/fail line of a diagnostic report."""

    quantity: str
    threshold: float
    observed: float
    passed: bool
    parameters: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)
