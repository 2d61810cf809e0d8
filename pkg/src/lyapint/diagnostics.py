"""Drift metrics, hypothesis validators, and the step-size attractor study.

``measure_drift`` turns a trajectory into per-sample conservation errors
relative to the first state. ``check_rank_condition`` estimates the smallest
singular values of the stacked integral map's Jacobian over sample states.
``attractor_step_study`` measures, per step size, the level at which the
stabilizing function V plateaus when a one-step scheme integrates the
feedback field; the plateau shrinks as the step size decreases.
"""

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import BasinViolationError, DomainError
from .feedback import FirstIntegralMap, assemble_jacobian
from .integrators import steps_for
from .systems import SystemModel


@dataclass(frozen=True)
class DriftSample:
    t: float
    metrics: dict


def measure_drift(system: SystemModel, times: np.ndarray, states: np.ndarray):
    """Per-sample drift metrics against the trajectory's first state.

    Raises DomainError annotated with the failing sample index if a state
    leaves the system domain mid-trajectory.
    """
    if len(times) == 0:
        raise ValueError("empty trajectory")
    s0 = states[0]
    samples = []
    for i, (t, s) in enumerate(zip(times, states)):
        try:
            metrics = system.drift_metrics(s, s0)
        except DomainError as exc:
            raise DomainError(f"sample {i} (t = {t:g}): {exc}") from exc
        samples.append(DriftSample(t=float(t), metrics=metrics))
    return samples


def drift_maxima(samples) -> dict:
    out = {}
    for sample in samples:
        for key, value in sample.metrics.items():
            out[key] = max(out.get(key, 0.0), value)
    return out


def singular_values(a: np.ndarray) -> np.ndarray:
    """Descending singular values by one-sided Jacobi on the smaller dimension.

    Columns of the (tall) working copy are orthogonalized pairwise by plane
    rotations; on convergence the column norms are the singular values. The
    matrices here have at most 13 rows/columns, so a handful of sweeps
    converges to machine precision.
    """
    b = np.array(a if a.shape[0] >= a.shape[1] else a.T, dtype=float)
    n = b.shape[1]
    for _ in range(60):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(b[:, p] @ b[:, q])
                app = float(b[:, p] @ b[:, p])
                aqq = float(b[:, q] @ b[:, q])
                scale = math.sqrt(app * aqq)
                if scale > 0.0:
                    off = max(off, abs(apq) / scale)
                if apq == 0.0 or abs(apq) <= 1e-300:
                    continue
                tau = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                bp = b[:, p].copy()
                b[:, p] = c * bp - s * b[:, q]
                b[:, q] = s * bp + c * b[:, q]
        if off < 1e-15:
            break
    sv = np.sqrt(np.sum(b * b, axis=0))
    return np.sort(sv)[::-1]


@dataclass(frozen=True)
class RankReport:
    """Smallest singular value of Df over the samples, with full spectra."""

    min_singular_value: float
    spectra: tuple
    threshold: float

    @property
    def passed(self) -> bool:
        return self.min_singular_value > self.threshold


def check_rank_condition(f: FirstIntegralMap, samples: Sequence[np.ndarray],
                         threshold: float = 1e-8) -> RankReport:
    """Estimate min over samples of the smallest singular value of Df.

    PASS (report.passed) means the map is numerically a submersion at every
    sample. Maps whose joint level sets contain whole trajectories are rank
    deficient by construction and report a near-zero value; callers gate on
    the spectrum entry matching the rank they actually rely on.
    """
    spectra = []
    for s in samples:
        jac = assemble_jacobian(f, np.asarray(s, dtype=float))
        spectra.append(tuple(singular_values(jac)))
    smallest = min(spec[-1] for spec in spectra)
    return RankReport(min_singular_value=float(smallest), spectra=tuple(spectra),
                      threshold=threshold)


@dataclass(frozen=True)
class AttractorStudyResult:
    step_sizes: tuple
    plateau_values: tuple


def state_with_lyapunov(system: SystemModel, v_target: float, seed: int = 0) -> np.ndarray:
    """Deterministic state with V equal to v_target.

    Moves from the system's reference initial state along a fixed random
    direction and bisects the scaling until V matches to 1e-12 relative.
    """
    x0 = np.array(system.initial_state, dtype=float)
    if v_target == 0.0:
        return x0
    if v_target < 0.0:
        raise ValueError("v_target must be nonnegative")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(system.dim)
    direction /= math.sqrt(float(direction @ direction))

    def value(scale):
        return system.lyapunov(x0 + scale * direction)

    hi = 1e-6
    while value(hi) < v_target:
        hi *= 2.0
        if hi > 1e9:
            raise RuntimeError("failed to bracket the requested V level")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if value(mid) < v_target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    return x0 + hi * direction


def attractor_step_study(system: SystemModel, scheme: Callable,
                         step_sizes: Sequence[float], v_init: float,
                         horizon: float) -> AttractorStudyResult:
    """Plateau level of V per step size when `scheme` integrates the feedback field.

    For each h the trajectory starts at a state with V = v_init and runs to
    the horizon; the plateau is the median of V over the final tenth of the
    samples. Escaping the sublevel set V <= gain bound raises
    BasinViolationError.
    """
    steps = tuple(float(h) for h in step_sizes)
    if any(b >= a for a, b in zip(steps, steps[1:])):
        raise ValueError("step sizes must be strictly decreasing")
    if v_init >= system.gain_bound:
        raise ValueError(
            f"v_init {v_init:g} is not below the gain bound {system.gain_bound:g}")
    x0 = state_with_lyapunov(system, v_init)
    plateaus = []
    for h in steps:
        n = steps_for(horizon, h)
        values = np.empty(n + 1)
        values[0] = system.lyapunov(x0)
        x = x0
        for k in range(1, n + 1):
            x = scheme(system.modified_field, x, h)
            v = system.lyapunov(x)
            if v > system.gain_bound:
                raise BasinViolationError(
                    f"V = {v:.3e} escaped the basin bound {system.gain_bound:.3e}",
                    h=h, step=k, value=v)
            values[k] = v
        tail = values[-max(1, (n + 1) // 10):]
        plateaus.append(float(np.median(tail)))
    return AttractorStudyResult(step_sizes=steps, plateau_values=tuple(plateaus))


def perihelion_passages(times: np.ndarray, states: np.ndarray, r_gate: float = np.inf):
    """Perihelion times and apse angles from a sampled orbital trajectory.

    Local minima of the radius below ``r_gate`` mark passages; the minimum
    position is refined by a parabolic fit in time through the three
    bracketing samples, and the in-plane angle of the position there is
    returned unwrapped. States must hold position in the first three
    components.
    """
    rs = np.array([math.sqrt(float(s[:3] @ s[:3])) for s in states])
    t_list = []
    angles = []
    for i in range(1, len(rs) - 1):
        if rs[i] < rs[i - 1] and rs[i] <= rs[i + 1] and rs[i] < r_gate:
            denom = rs[i - 1] - 2.0 * rs[i] + rs[i + 1]
            shift = 0.5 * (rs[i - 1] - rs[i + 1]) / denom if denom > 0.0 else 0.0
            shift = min(0.5, max(-0.5, shift))
            j = i + 1 if shift > 0.0 else i - 1
            w = abs(shift)
            theta_i = math.atan2(states[i][1], states[i][0])
            theta_j = math.atan2(states[j][1], states[j][0])
            # local unwrap before blending the two sample angles
            if theta_j - theta_i > math.pi:
                theta_j -= 2.0 * math.pi
            elif theta_i - theta_j > math.pi:
                theta_j += 2.0 * math.pi
            angles.append((1.0 - w) * theta_i + w * theta_j)
            t_list.append((1.0 - w) * times[i] + w * times[j])
    return np.array(t_list), np.unwrap(np.array(angles))


def precession_rate(times: np.ndarray, states: np.ndarray) -> float:
    """Mean apse advance per radial period, in radians."""
    t_peri, angles = perihelion_passages(times, states)
    if len(angles) < 2:
        raise ValueError("need at least two perihelion passages to measure precession")
    return float((angles[-1] - angles[0]) / (len(angles) - 1))


@dataclass(frozen=True)
class OrthogonalityReport:
    """Worst scaled residual of <grad V, X> over random states."""

    max_scaled_residual: float
    n_samples: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_scaled_residual <= self.tolerance


def orthogonality_report(system: SystemModel, n_samples: int = 10_000,
                         seed: int = 0, tolerance: float = 1e-12) -> OrthogonalityReport:
    """Check <grad V(x), X(x)> = 0 at sampled states, scaled by 1 + |grad V| |X|."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        s = system.sample_state(rng)
        g = system.gradient(s)
        f = system.field(s)
        gnorm = math.sqrt(float(g @ g))
        fnorm = math.sqrt(float(f @ f))
        worst = max(worst, abs(float(g @ f)) / (1.0 + gnorm * fnorm))
    return OrthogonalityReport(max_scaled_residual=worst, n_samples=n_samples,
                               tolerance=tolerance)


@dataclass(frozen=True)
class GradientAgreementReport:
    """Worst scaled difference between analytic and Jacobian-transpose gradients."""

    max_scaled_difference: float
    n_samples: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_scaled_difference <= self.tolerance


def gradient_agreement_report(system: SystemModel, n_samples: int = 1000,
                              seed: int = 0, tolerance: float = 1e-12) -> GradientAgreementReport:
    """Compare the analytic gradient to Df^T K (f - f0) at sampled states."""
    from .feedback import generic_gradient

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        s = system.sample_state(rng)
        ga = system.gradient(s)
        gg = generic_gradient(system.integral_map, system.feedback_spec, s)
        diff = math.sqrt(float((ga - gg) @ (ga - gg)))
        scale = 1.0 + math.sqrt(float(ga @ ga))
        worst = max(worst, diff / scale)
    return GradientAgreementReport(max_scaled_difference=worst, n_samples=n_samples,
                                   tolerance=tolerance)
