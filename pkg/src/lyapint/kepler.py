"""Kepler two-body problem with angular-momentum / Laplace-Runge-Lenz feedback.

Flat state layout: s[0:3] position x, s[3:6] velocity v, in canonical units.
The dynamics x' = v, v' = -mu x / |x|^3 conserve the angular momentum
L = x cross v and the Laplace-Runge-Lenz vector A = v cross L - mu x / |x|,
which together pin down a non-degenerate elliptic orbit. The stabilizing
function is V = k1/2 |L - L0|^2 + k2/2 |A - A0|^2.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .feedback import FeedbackSpec, FirstIntegralMap
from .numerics import cross, hat, norm

DIM = 6

STATE_NAMES = ("x0", "x1", "x2", "v0", "v1", "v2")

ORIGIN_RADIUS = 1e-12

BENCHMARK_MU = 1.0
BENCHMARK_X0 = (1.0, 0.0, 0.0)
BENCHMARK_V0 = (0.0, math.sqrt(1.8), 0.0)
BENCHMARK_GAINS = (4.0, 2.0)


@dataclass(frozen=True)
class KeplerParams:
    """Gravitational parameter, gains, and the target (L0, A0) orbit."""

    mu: float
    k1: float
    k2: float
    L0: np.ndarray
    A0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "L0", np.asarray(self.L0, dtype=float))
        object.__setattr__(self, "A0", np.asarray(self.A0, dtype=float))
        if self.mu <= 0.0:
            raise ValueError("gravitational parameter must be positive")
        if min(self.k1, self.k2) <= 0.0:
            raise ValueError("gains must be positive")
        lnorm = norm(self.L0)
        anorm = norm(self.A0)
        if lnorm == 0.0:
            raise ValueError("target angular momentum must be nonzero")
        if anorm >= self.mu:
            raise ValueError("target |A0| must be below mu (elliptic orbit)")
        if abs(float(self.L0 @ self.A0)) > 1e-12 * lnorm * max(anorm, 1.0):
            raise ValueError("target L0 and A0 must be orthogonal")

    @classmethod
    def from_initial(cls, mu, x0, v0, k1, k2) -> "KeplerParams":
        s = np.concatenate((np.asarray(x0, dtype=float), np.asarray(v0, dtype=float)))
        L, A, _ = _invariants(float(mu), s)
        return cls(mu=float(mu), k1=float(k1), k2=float(k2), L0=L, A0=A)


def benchmark_setup(k1=None, k2=None, mu=None):
    """Benchmark orbit: mu = 1, perihelion start (1,0,0) with speed sqrt(1.8)."""
    mu = BENCHMARK_MU if mu is None else mu
    gains = (BENCHMARK_GAINS[0] if k1 is None else k1, BENCHMARK_GAINS[1] if k2 is None else k2)
    x0 = np.concatenate((np.array(BENCHMARK_X0), np.array(BENCHMARK_V0)))
    return KeplerParams.from_initial(mu, x0[:3], x0[3:], *gains), x0


def _radius(s) -> float:
    r = math.sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2])
    if r < ORIGIN_RADIUS:
        raise DomainError(f"position radius {r:.3e} below {ORIGIN_RADIUS:.0e}")
    return r


def field(p: KeplerParams, s: np.ndarray) -> np.ndarray:
    """Original dynamics (v, -mu x / |x|^3)."""
    x0, x1, x2, v0, v1, v2 = s.tolist()
    r2 = x0 * x0 + x1 * x1 + x2 * x2
    r = math.sqrt(r2)
    if r < ORIGIN_RADIUS:
        raise DomainError(f"position radius {r:.3e} below {ORIGIN_RADIUS:.0e}")
    c = -p.mu / (r2 * r)
    return np.array((v0, v1, v2, c * x0, c * x1, c * x2))


def accel(p: KeplerParams, q: np.ndarray) -> np.ndarray:
    """Position-only acceleration -mu q / |q|^3 (for Stormer-Verlet stepping)."""
    q0, q1, q2 = q.tolist()
    r2 = q0 * q0 + q1 * q1 + q2 * q2
    r = math.sqrt(r2)
    if r < ORIGIN_RADIUS:
        raise DomainError(f"position radius {r:.3e} below {ORIGIN_RADIUS:.0e}")
    c = -p.mu / (r2 * r)
    return np.array((c * q0, c * q1, c * q2))


def _invariants(mu: float, s: np.ndarray):
    x = s[:3]
    v = s[3:]
    r = _radius(s)
    L = cross(x, v)
    A = cross(v, L) - (mu / r) * x
    E = 0.5 * float(v @ v) - mu / r
    return L, A, E


def invariants(p: KeplerParams, s: np.ndarray):
    """Angular momentum L, Laplace-Runge-Lenz vector A, and energy E."""
    return _invariants(p.mu, s)


def lyapunov(p: KeplerParams, s: np.ndarray) -> float:
    L, A, _ = _invariants(p.mu, s)
    dL = L - p.L0
    dA = A - p.A0
    return 0.5 * p.k1 * float(dL @ dL) + 0.5 * p.k2 * float(dA @ dA)


def lyapunov_gradient(p: KeplerParams, s: np.ndarray) -> np.ndarray:
    """Closed-form gradient of V:

    grad_x = k1 v x dL + k2 (v x (dA x v) - mu/|x| dA + mu/|x|^3 x (x . dA))
    grad_v = k1 dL x x + k2 ((x x v) x dA + x x (v x dA))
    """
    x = s[:3]
    v = s[3:]
    r = _radius(s)
    L = cross(x, v)
    A = cross(v, L) - (p.mu / r) * x
    dL = L - p.L0
    dA = A - p.A0
    gx = p.k1 * cross(v, dL) + p.k2 * (
        cross(v, cross(dA, v)) - (p.mu / r) * dA + (p.mu / r**3) * float(x @ dA) * x
    )
    gv = p.k1 * cross(dL, x) + p.k2 * (cross(L, dA) + cross(x, cross(v, dA)))
    return np.concatenate((gx, gv))


def modified_field(p: KeplerParams, s: np.ndarray) -> np.ndarray:
    """Feedback dynamics: original field minus the Lyapunov gradient."""
    return field(p, s) - lyapunov_gradient(p, s)


def gain_bound(p: KeplerParams) -> float:
    """Upper bound on admissible sublevel values c:

    min(k1 |L0|^2 / 2, k2 (mu - |A0|)^2 / 2).
    """
    return min(
        0.5 * p.k1 * float(p.L0 @ p.L0),
        0.5 * p.k2 * (p.mu - norm(p.A0)) ** 2,
    )


def orbit_geometry(p: KeplerParams):
    """Semi-major axis, eccentricity, and period of the (L0, A0) orbit.

    Uses e = |A0| / mu, the energy relation E = (|A0|^2 - mu^2) / (2 |L0|^2),
    a = -mu / (2 E) and T = 2 pi sqrt(a^3 / mu); only elliptic targets are
    accepted (|A0| < mu is enforced at construction).
    """
    e = norm(p.A0) / p.mu
    energy = (float(p.A0 @ p.A0) - p.mu**2) / (2.0 * float(p.L0 @ p.L0))
    if energy >= 0.0:
        raise ValueError("orbit geometry requires a bound (elliptic) target")
    a = -p.mu / (2.0 * energy)
    period = 2.0 * math.pi * math.sqrt(a**3 / p.mu)
    return a, e, period


def solve_kepler_equation(e: float, mean_anomaly: float, tol=1e-14, max_iter=64) -> float:
    """Eccentric anomaly psi with psi - e sin(psi) = mean_anomaly, by Newton."""
    psi = mean_anomaly if e < 0.8 else math.pi
    for _ in range(max_iter):
        delta = (psi - e * math.sin(psi) - mean_anomaly) / (1.0 - e * math.cos(psi))
        psi -= delta
        if abs(delta) <= tol:
            return psi
    raise RuntimeError("Kepler equation Newton iteration did not converge")


def _orbit_frame(p: KeplerParams):
    w = p.L0 / norm(p.L0)
    anorm = norm(p.A0)
    if anorm > 0.0:
        u = p.A0 / anorm
    else:
        # Circular target: any in-plane unit vector serves as periapsis axis.
        trial = np.array((1.0, 0.0, 0.0))
        if abs(float(trial @ w)) > 0.9:
            trial = np.array((0.0, 1.0, 0.0))
        u = trial - float(trial @ w) * w
        u /= norm(u)
    return u, cross(w, u)


def state_at_eccentric_anomaly(p: KeplerParams, psi: float) -> np.ndarray:
    """Point of the (L0, A0) orbit at eccentric anomaly psi (psi = 0 is perihelion)."""
    a, e, _ = orbit_geometry(p)
    b = a * math.sqrt(1.0 - e * e)
    u, n = _orbit_frame(p)
    mean_rate = math.sqrt(p.mu / a**3)
    cpsi = math.cos(psi)
    spsi = math.sin(psi)
    x = a * (cpsi - e) * u + b * spsi * n
    rate = mean_rate / (1.0 - e * cpsi)
    v = (-a * spsi * u + b * cpsi * n) * rate
    return np.concatenate((x, v))


def integral_map(p: KeplerParams) -> FirstIntegralMap:
    """Stacked map (L, A) of dimension 6."""

    def evaluate(s):
        L, A, _ = _invariants(p.mu, s)
        return np.concatenate((L, A))

    def jac_t(s, w):
        x = s[:3]
        v = s[3:]
        r = _radius(s)
        L = cross(x, v)
        wl = w[:3]
        wa = w[3:]
        gx = cross(v, wl) + cross(v, cross(wa, v)) - (p.mu / r) * wa \
            + (p.mu / r**3) * float(x @ wa) * x
        gv = cross(wl, x) + cross(L, wa) + cross(x, cross(v, wa))
        return np.concatenate((gx, gv))

    def jacobian(s):
        x = s[:3]
        v = s[3:]
        r = _radius(s)
        L = cross(x, v)
        rows = np.empty((6, 6))
        rows[:3, :3] = -hat(v)
        rows[:3, 3:] = hat(x)
        rows[3:, :3] = (float(v @ v) * np.eye(3) - np.outer(v, v)) \
            - (p.mu / r) * np.eye(3) + (p.mu / r**3) * np.outer(x, x)
        rows[3:, 3:] = -hat(L) + np.outer(x, v) - float(x @ v) * np.eye(3)
        return rows

    return FirstIntegralMap(
        dim_state=DIM, dim_values=6,
        eval=evaluate, jacobian_transpose_apply=jac_t, jacobian=jacobian,
    )


def feedback_spec(p: KeplerParams) -> FeedbackSpec:
    return FeedbackSpec(
        reference=np.concatenate((p.L0, p.A0)),
        gain_diag=np.array([p.k1] * 3 + [p.k2] * 3),
    )
