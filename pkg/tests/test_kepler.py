import math

import numpy as np
import pytest

from lyapint import kepler
from lyapint.errors import DomainError
from lyapint.integrators import euler_step


@pytest.fixture(scope="module")
def params():
    p, _ = kepler.benchmark_setup()
    return p


@pytest.fixture(scope="module")
def start():
    _, s0 = kepler.benchmark_setup()
    return s0


def test_params_validation():
    with pytest.raises(ValueError):
        kepler.KeplerParams(mu=1.0, k1=4, k2=2, L0=(0, 0, 0), A0=(0.1, 0, 0))
    with pytest.raises(ValueError):  # hyperbolic: |A0| >= mu
        kepler.KeplerParams(mu=1.0, k1=4, k2=2, L0=(0, 0, 1), A0=(1.5, 0, 0))
    with pytest.raises(ValueError):  # not orthogonal
        kepler.KeplerParams(mu=1.0, k1=4, k2=2, L0=(0, 0, 1), A0=(0.1, 0, 0.1))
    with pytest.raises(ValueError):
        kepler.KeplerParams(mu=1.0, k1=-1, k2=2, L0=(0, 0, 1), A0=(0.1, 0, 0))


def test_field_benchmark_value(params, start):
    out = kepler.field(params, start)
    assert np.array_equal(out[:3], start[3:])
    assert np.allclose(out[3:], [-1.0, 0.0, 0.0], atol=1e-15)


def test_field_circular_balance(params):
    s = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    out = kepler.field(params, s)
    speed_sq_over_r = float(s[3:] @ s[3:]) / 1.0
    assert np.linalg.norm(out[3:]) == pytest.approx(speed_sq_over_r, rel=1e-15)


def test_field_inverse_square_scaling(params):
    s = np.array([0.3, -0.7, 0.2, 0.1, 0.0, -0.4])
    lam = 2.0
    scaled = s.copy()
    scaled[:3] *= lam
    a1 = kepler.field(params, s)[3:]
    a2 = kepler.field(params, scaled)[3:]
    assert np.allclose(a2 * lam**2, a1, rtol=1e-14)


def test_field_rejects_origin(params):
    with pytest.raises(DomainError):
        kepler.field(params, np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]))
    with pytest.raises(DomainError):
        kepler.accel(params, np.zeros(3))


def test_invariants_benchmark_values(params, start):
    L, A, E = kepler.invariants(params, start)
    assert np.allclose(L, [0.0, 0.0, math.sqrt(1.8)], atol=1e-15)
    assert np.allclose(A, [0.8, 0.0, 0.0], atol=1e-15)
    assert E == pytest.approx(-0.1, abs=1e-15)


def test_energy_relation_at_benchmark(params, start):
    L, A, E = kepler.invariants(params, start)
    # |A|^2 = mu^2 + 2 E |L|^2: 0.64 = 1 + 2(-0.1)(1.8)
    assert float(A @ A) == pytest.approx(
        params.mu**2 + 2 * E * float(L @ L), abs=1e-14)


def test_energy_relation_random_states(params):
    rng = np.random.default_rng(30)
    for _ in range(2000):
        s = np.concatenate((rng.uniform(-2, 2, 3), rng.uniform(-1.5, 1.5, 3)))
        if np.linalg.norm(s[:3]) < 0.2:
            continue
        L, A, E = kepler.invariants(params, s)
        lhs = float(A @ A)
        rhs = params.mu**2 + 2 * E * float(L @ L)
        assert abs(lhs - rhs) <= 1e-12 * (1.0 + abs(lhs) + abs(rhs))


def test_angular_momentum_orthogonal_to_lrl(params):
    rng = np.random.default_rng(31)
    for _ in range(2000):
        s = np.concatenate((rng.uniform(-2, 2, 3), rng.uniform(-1.5, 1.5, 3)))
        if np.linalg.norm(s[:3]) < 0.2:
            continue
        L, A, _ = kepler.invariants(params, s)
        assert abs(float(L @ A)) <= 1e-12 * (1.0 + np.linalg.norm(L) * np.linalg.norm(A))


def test_gradient_vanishes_on_target_orbit(params):
    for psi in np.linspace(0.0, 2 * math.pi, 9):
        s = kepler.state_at_eccentric_anomaly(params, psi)
        g = kepler.lyapunov_gradient(params, s)
        assert np.linalg.norm(g) <= 1e-12


def test_modified_field_on_orbit_equals_field(params, start):
    assert np.array_equal(kepler.modified_field(params, start),
                          kepler.field(params, start))


def test_euler_step_decreases_v_off_orbit(params, start):
    s = start + np.array([0.02, -0.01, 0.0, 0.01, 0.02, 0.0])
    v0 = kepler.lyapunov(params, s)
    s1 = euler_step(lambda x: kepler.modified_field(params, x), s, 0.005)
    assert kepler.lyapunov(params, s1) < v0


def test_orbit_geometry_benchmark(params):
    a, e, period = kepler.orbit_geometry(params)
    assert a == pytest.approx(5.0, abs=1e-12)
    assert e == pytest.approx(0.8, abs=1e-15)
    assert period == pytest.approx(70.2481, abs=1e-4)


def test_orbit_geometry_circular():
    p = kepler.KeplerParams(mu=1.0, k1=1.0, k2=1.0, L0=(0.0, 0.0, 1.0),
                            A0=(0.0, 0.0, 0.0))
    a, e, period = kepler.orbit_geometry(p)
    assert e == 0.0
    assert a == pytest.approx(1.0, rel=1e-15)
    assert period == pytest.approx(2 * math.pi, rel=1e-15)


def test_gain_bound_benchmark(params):
    assert kepler.gain_bound(params) == pytest.approx(0.04, rel=1e-12)


def test_gain_bound_symmetric_case():
    p = kepler.KeplerParams(mu=2.0, k1=2.0, k2=2.0, L0=(0.0, 0.0, 1.0),
                            A0=(1.0, 0.0, 0.0))
    assert kepler.gain_bound(p) == pytest.approx(1.0, rel=1e-15)


def test_gain_bound_homogeneous(params):
    scaled = kepler.KeplerParams(mu=params.mu, k1=5 * params.k1, k2=5 * params.k2,
                                 L0=params.L0, A0=params.A0)
    assert kepler.gain_bound(scaled) == pytest.approx(5 * kepler.gain_bound(params),
                                                      rel=1e-15)


def test_kepler_equation_solver():
    rng = np.random.default_rng(32)
    for _ in range(500):
        e = rng.uniform(0.0, 0.95)
        m = rng.uniform(-3 * math.pi, 3 * math.pi)
        psi = kepler.solve_kepler_equation(e, m)
        assert abs(psi - e * math.sin(psi) - m) <= 1e-13


def test_state_at_perihelion_matches_benchmark_start(params, start):
    s = kepler.state_at_eccentric_anomaly(params, 0.0)
    assert np.allclose(s, start, atol=1e-12)


def test_orbit_sampling_stays_on_level_set(params):
    for psi in np.linspace(0.0, 2 * math.pi, 17):
        s = kepler.state_at_eccentric_anomaly(params, psi)
        assert kepler.lyapunov(params, s) <= 1e-25


def test_reference_flow_conserves_integrals(kepler_ref_period):
    assert kepler_ref_period.maxima["dL"] <= 1e-10
    assert kepler_ref_period.maxima["dA"] <= 1e-9


def test_no_spurious_critical_points_in_basin(params):
    # sampled states inside the admissible sublevel set have nonzero
    # gradient unless V is at numerical zero
    rng = np.random.default_rng(33)
    c = kepler.gain_bound(params)
    checked = 0
    for _ in range(5000):
        psi = rng.uniform(0.0, 2 * math.pi)
        s = kepler.state_at_eccentric_anomaly(params, psi)
        s = s + rng.uniform(-0.05, 0.05, 6)
        v = kepler.lyapunov(params, s)
        if v > c:
            continue
        checked += 1
        if np.linalg.norm(kepler.lyapunov_gradient(params, s)) <= 1e-10:
            assert v <= 1e-20
    assert checked > 500
