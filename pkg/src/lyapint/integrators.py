"""One-step integration schemes and the constraint-projection wrapper.

Every scheme is a pure function ``(field, x, h) -> x_next`` on flat state
vectors; trajectories are advanced by repeated application. Projection wraps
any base scheme and pulls the result back onto a target level set of a
first-integral map with a simplified Newton iteration.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError, ProjectionError, RankError
from .feedback import FirstIntegralMap, assemble_jacobian

# Relative cutoff below which Gram-matrix directions are treated as null.
# Constraint maps whose level sets contain whole trajectories (e.g. the
# six angular-momentum/eccentricity values of a Kepler orbit) are rank
# deficient by construction; the pseudo-inverse restricted to the usable
# spectrum still converges because the residual stays in the range.
_GRAM_CUTOFF = 1e-14


def euler_step(field, x, h):
    """Forward Euler: x + h * field(x)."""
    y = x + h * field(x)
    if not np.all(np.isfinite(y)):
        raise IntegrationError("non-finite state after Euler step")
    return y


def rk4_step(field, x, h):
    """Classical four-stage Runge-Kutta step."""
    k1 = field(x)
    k2 = field(x + (0.5 * h) * k1)
    k3 = field(x + (0.5 * h) * k2)
    k4 = field(x + h * k3)
    y = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y)):
        raise IntegrationError("non-finite state after RK4 step")
    return y


def stormer_verlet_step(accel, q, v, h, variant="A"):
    """One step of a Stormer-Verlet scheme for q'' = accel(q).

    Variant A is kick-drift-kick: a velocity half-step, a full position
    update, then the closing velocity half-step. Variant B is its adjoint,
    drift-kick-drift. Both are second order and symplectic; the acceleration
    may depend on position only.
    """
    if variant == "A":
        vh = v + (0.5 * h) * accel(q)
        q1 = q + h * vh
        v1 = vh + (0.5 * h) * accel(q1)
    elif variant == "B":
        qh = q + (0.5 * h) * v
        v1 = v + h * accel(qh)
        q1 = qh + (0.5 * h) * v1
    else:
        raise ValueError(f"unknown Stormer-Verlet variant {variant!r}")
    if not (np.all(np.isfinite(q1)) and np.all(np.isfinite(v1))):
        raise IntegrationError("non-finite state after Stormer-Verlet step")
    return q1, v1


@dataclass(frozen=True)
class ProjectionConfig:
    """Constraint map, target values, and Newton termination settings."""

    constraint: FirstIntegralMap
    target: np.ndarray
    tol: float
    max_iter: int = 25

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("projection tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


def _gram_pseudo_solver(jac):
    """Factor G = J J^T once; return a solver for G y = r restricted to the usable spectrum."""
    gram = jac @ jac.T
    u, s, _ = np.linalg.svd(gram)
    if s[0] <= 0.0 or not np.isfinite(s[0]):
        raise RankError("constraint Jacobian Gram matrix is numerically rank zero")
    inv = np.where(s > s[0] * _GRAM_CUTOFF, 1.0 / np.maximum(s, 1e-300), 0.0)

    def solve(r):
        return u @ (inv * (u.T @ r))

    return solve


def projection_step(base, cfg: ProjectionConfig, field, x, h):
    """Base step followed by pull-back onto the constraint level set.

    Computes xt = base(field, x, h), then solves f(xt + Df(xt)^T lam) = target
    for lam by simplified Newton with the Gram matrix Df Df^T frozen at xt.
    lam starts at zero each step. Returns once the residual norm is within
    cfg.tol; raises ProjectionError with the final residual otherwise.
    """
    xt = base(field, x, h)
    res = cfg.constraint.eval(xt) - cfg.target
    rnorm = math.sqrt(float(res @ res))
    if rnorm <= cfg.tol:
        return xt
    jac = assemble_jacobian(cfg.constraint, xt)
    solve = _gram_pseudo_solver(jac)
    lam = np.zeros(cfg.constraint.dim_values)
    y = xt
    for _ in range(cfg.max_iter):
        lam -= solve(res)
        y = xt + jac.T @ lam
        res = cfg.constraint.eval(y) - cfg.target
        rnorm = math.sqrt(float(res @ res))
        if rnorm <= cfg.tol:
            return y
    raise ProjectionError(
        f"projection residual {rnorm:.3e} above tolerance {cfg.tol:.3e} "
        f"after {cfg.max_iter} iterations",
        residual=rnorm,
    )


def steps_for(t_end: float, h: float) -> int:
    """floor(t_end / h) with a guard against float dust in the quotient."""
    return int(math.floor(t_end / h + 1e-9))


def rollout(advance, x0, h, n_steps, stride=1, on_step=None):
    """Advance ``x = advance(x, h)`` for n_steps, recording every ``stride``-th state.

    Step 0 and the final step are always recorded. ``on_step(k, x)``, when
    given, is called after every step at full resolution. Scheme and domain
    errors are re-raised with the 1-based failing step index attached.
    """
    x = np.array(x0, dtype=float)
    times = [0.0]
    states = [x.copy()]
    for k in range(1, n_steps + 1):
        try:
            x = advance(x, h)
        except IntegrationError as exc:
            exc.step = k
            raise
        except Exception as exc:
            exc.step = k
            raise
        if on_step is not None:
            on_step(k, x)
        if k % stride == 0 or k == n_steps:
            times.append(k * h)
            states.append(np.array(x))
    return np.array(times), np.array(states)
