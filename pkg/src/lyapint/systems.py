"""Uniform flat-vector view of the shipped systems.

A ``SystemModel`` bundles everything the drift diagnostics, validators and
the experiment runner need: the original and feedback vector fields, the
stacked integral map with its gain spec, drift metrics relative to a run's
initial state, and a sampler for randomized property checks.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kepler, perturbed_kepler, rigid_body
from .feedback import FeedbackSpec, FirstIntegralMap
from .numerics import I3, norm

SYSTEM_NAMES = ("rigid_body", "kepler", "perturbed_kepler")


@dataclass(frozen=True)
class SystemModel:
    name: str
    dim: int
    params: object
    field: Callable[[np.ndarray], np.ndarray]
    modified_field: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    lyapunov: Callable[[np.ndarray], float]
    integral_map: FirstIntegralMap
    feedback_spec: FeedbackSpec
    initial_state: np.ndarray
    state_names: tuple
    drift_names: tuple
    drift_metrics: Callable[[np.ndarray, np.ndarray], dict]
    sample_state: Callable[[np.random.Generator], np.ndarray]
    gain_bound: float
    period: float
    projection_tol: float
    accel: Optional[Callable[[np.ndarray], np.ndarray]] = None
    splitting_step: Optional[Callable[[np.ndarray, float], np.ndarray]] = None


def _rigid_sampler(rng: np.random.Generator) -> np.ndarray:
    # Attitudes near (but not on) the rotation group with positive determinant.
    while True:
        R = np.eye(3) + rng.uniform(-0.5, 0.5, size=(3, 3))
        if np.linalg.det(R) > 1e-3:
            break
    W = rng.uniform(-2.0, 2.0, size=3)
    return rigid_body.pack(R, W)


def _orbital_sampler(rng: np.random.Generator) -> np.ndarray:
    while True:
        x = rng.uniform(-2.0, 2.0, size=3)
        if norm(x) >= 0.2:
            break
    v = rng.uniform(-1.5, 1.5, size=3)
    return np.concatenate((x, v))


def rigid_body_system(params=None, initial_state=None, gains=None, inertia=None) -> SystemModel:
    if params is None:
        k0, k1, k2 = gains if gains is not None else rigid_body.BENCHMARK_GAINS
        params, default_initial = rigid_body.benchmark_setup(k0=k0, k1=k1, k2=k2, inertia=inertia)
        if initial_state is None:
            initial_state = default_initial
        else:
            initial_state = np.asarray(initial_state, dtype=float)
            R0, W0 = rigid_body.unpack(initial_state)
            params = rigid_body.RigidBodyParams.from_initial(
                params.inertia, R0, W0, params.k0, params.k1, params.k2)
    else:
        initial_state = np.asarray(initial_state, dtype=float)

    p = params
    E0, pi0 = rigid_body.integrals(p, initial_state)

    def drift(s, _s0, E0=E0, pi0=pi0):
        # single pass; expressions match integrals/so3_deviation/lyapunov
        R, W = rigid_body.unpack(s)
        momentum = p.inertia * W
        E = 0.5 * float(W @ momentum)
        pi = R @ momentum
        defect = R.T @ R - I3
        defect_sq = float(np.sum(defect * defect))
        dE_target = E - p.E0
        dpi_target = pi - p.pi0
        return {
            "dE": abs(E - E0),
            "dPi": norm(pi - pi0),
            "so3dev": math.sqrt(defect_sq),
            "V": (0.25 * p.k0 * defect_sq
                  + 0.5 * p.k1 * dE_target * dE_target
                  + 0.5 * p.k2 * float(dpi_target @ dpi_target)),
        }

    return SystemModel(
        name="rigid_body",
        dim=rigid_body.DIM,
        params=p,
        field=lambda s: rigid_body.field(p, s),
        modified_field=lambda s: rigid_body.modified_field(p, s),
        gradient=lambda s: rigid_body.lyapunov_gradient(p, s),
        lyapunov=lambda s: rigid_body.lyapunov(p, s),
        integral_map=rigid_body.integral_map(p),
        feedback_spec=rigid_body.feedback_spec(p),
        initial_state=initial_state,
        state_names=rigid_body.STATE_NAMES,
        drift_names=("dE", "dPi", "so3dev", "V"),
        drift_metrics=drift,
        sample_state=_rigid_sampler,
        gain_bound=rigid_body.gain_bound(p),
        period=rigid_body.BENCHMARK_OMEGA_PERIOD,
        projection_tol=1e-4,
        splitting_step=lambda s, h: rigid_body.splitting_step(p, s, h),
    )


def kepler_system(params=None, initial_state=None, gains=None, mu=None) -> SystemModel:
    if params is None:
        k1, k2 = gains if gains is not None else kepler.BENCHMARK_GAINS
        params, default_initial = kepler.benchmark_setup(k1=k1, k2=k2, mu=mu)
        if initial_state is None:
            initial_state = default_initial
        else:
            initial_state = np.asarray(initial_state, dtype=float)
            params = kepler.KeplerParams.from_initial(
                params.mu, initial_state[:3], initial_state[3:], params.k1, params.k2)
    else:
        initial_state = np.asarray(initial_state, dtype=float)

    p = params
    L0, A0, E0 = kepler.invariants(p, initial_state)
    _, _, period = kepler.orbit_geometry(p)

    def drift(s, _s0, L0=L0, A0=A0, E0=E0):
        L, A, E = kepler.invariants(p, s)
        dL_target = L - p.L0
        dA_target = A - p.A0
        return {
            "dL": norm(L - L0),
            "dA": norm(A - A0),
            "dE": abs(E - E0),
            "V": (0.5 * p.k1 * float(dL_target @ dL_target)
                  + 0.5 * p.k2 * float(dA_target @ dA_target)),
        }

    return SystemModel(
        name="kepler",
        dim=kepler.DIM,
        params=p,
        field=lambda s: kepler.field(p, s),
        modified_field=lambda s: kepler.modified_field(p, s),
        gradient=lambda s: kepler.lyapunov_gradient(p, s),
        lyapunov=lambda s: kepler.lyapunov(p, s),
        integral_map=kepler.integral_map(p),
        feedback_spec=kepler.feedback_spec(p),
        initial_state=initial_state,
        state_names=kepler.STATE_NAMES,
        drift_names=("dL", "dA", "dE", "V"),
        drift_metrics=drift,
        sample_state=_orbital_sampler,
        gain_bound=kepler.gain_bound(p),
        period=period,
        projection_tol=0.005,
        accel=lambda q: kepler.accel(p, q),
    )


def perturbed_kepler_system(params=None, initial_state=None, gains=None,
                            mu=None, delta=None, eccentricity=None) -> SystemModel:
    if params is None:
        k1, k2 = gains if gains is not None else perturbed_kepler.BENCHMARK_GAINS
        params, default_initial = perturbed_kepler.benchmark_setup(
            k1=k1, k2=k2, mu=mu, delta=delta, eccentricity=eccentricity)
        if initial_state is None:
            initial_state = default_initial
        else:
            initial_state = np.asarray(initial_state, dtype=float)
            params = perturbed_kepler.PerturbedKeplerParams.from_initial(
                params.potential, initial_state[:3], initial_state[3:],
                params.k1, params.k2)
    else:
        initial_state = np.asarray(initial_state, dtype=float)

    p = params
    E0, L0 = perturbed_kepler.invariants(p, initial_state)
    # Radial period estimate from the osculating Kepler ellipse of the start
    # point; adequate for choosing desk-scale horizons.
    a = -1.0 / (2.0 * E0) if E0 < 0.0 else 1.0
    period = 2.0 * math.pi * math.sqrt(abs(a) ** 3)

    def drift(s, _s0, E0=E0, L0=L0):
        E, L = perturbed_kepler.invariants(p, s)
        dE_target = E - p.E0
        dL_target = L - p.L0
        return {
            "dE": abs(E - E0),
            "dL": norm(L - L0),
            "V": (0.5 * p.k1 * dE_target * dE_target
                  + 0.5 * p.k2 * float(dL_target @ dL_target)),
        }

    def sampler(rng):
        # Keep radii away from the strongly repulsive inner region.
        while True:
            s = _orbital_sampler(rng)
            if norm(s[:3]) >= 0.25:
                return s

    return SystemModel(
        name="perturbed_kepler",
        dim=perturbed_kepler.DIM,
        params=p,
        field=lambda s: perturbed_kepler.field(p, s),
        modified_field=lambda s: perturbed_kepler.modified_field(p, s),
        gradient=lambda s: perturbed_kepler.lyapunov_gradient(p, s),
        lyapunov=lambda s: perturbed_kepler.lyapunov(p, s),
        integral_map=perturbed_kepler.integral_map(p),
        feedback_spec=perturbed_kepler.feedback_spec(p),
        initial_state=initial_state,
        state_names=perturbed_kepler.STATE_NAMES,
        drift_names=("dE", "dL", "V"),
        drift_metrics=drift,
        sample_state=sampler,
        gain_bound=float("inf"),
        period=period,
        projection_tol=1e-8,
        accel=lambda q: perturbed_kepler.accel(p, q),
    )


_BUILDERS = {
    "rigid_body": rigid_body_system,
    "kepler": kepler_system,
    "perturbed_kepler": perturbed_kepler_system,
}


def make_system(name: str, **kwargs) -> SystemModel:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown system {name!r}; choose from {SYSTEM_NAMES}") from None
    return builder(**kwargs)
