import math

import numpy as np
import pytest

from lyapint import kepler, perturbed_kepler as pk
from lyapint.errors import DomainError
from lyapint.integrators import euler_step, rk4_step, steps_for


@pytest.fixture(scope="module")
def params():
    p, _ = pk.benchmark_setup()
    return p


@pytest.fixture(scope="module")
def start():
    _, s0 = pk.benchmark_setup()
    return s0


def test_potential_rejects_bad_constants():
    with pytest.raises(ValueError):
        pk.inverse_cube_perturbed(-1.0, 0.1)
    with pytest.raises(ValueError):
        pk.inverse_cube_perturbed(1.0, -0.1)


def test_params_validation():
    pot = pk.inverse_cube_perturbed(1.0, 0.0025)
    with pytest.raises(ValueError):
        pk.PerturbedKeplerParams(potential=pot, k1=2, k2=3, E0=-0.5, L0=(0, 0, 0))
    with pytest.raises(ValueError):
        pk.PerturbedKeplerParams(potential=pot, k1=0, k2=3, E0=-0.5, L0=(0, 0, 1))


def test_potential_derivative_matches_finite_differences(params):
    pot = params.potential
    for r in np.geomspace(0.05, 50.0, 40):
        eps = 1e-6 * r
        fd = (pot.u(r + eps) - pot.u(r - eps)) / (2 * eps)
        assert pot.u_prime(r) == pytest.approx(fd, rel=1e-6)


def test_zero_delta_reduces_to_kepler(start):
    pot = pk.inverse_cube_perturbed(1.0, 0.0)
    pp = pk.PerturbedKeplerParams.from_initial(pot, start[:3], start[3:], 2.0, 3.0)
    kp = kepler.KeplerParams.from_initial(1.0, start[:3], start[3:], 4.0, 2.0)
    rng = np.random.default_rng(40)
    for _ in range(100):
        s = np.concatenate((rng.uniform(-2, 2, 3), rng.uniform(-1.5, 1.5, 3)))
        if np.linalg.norm(s[:3]) < 0.25:
            continue
        assert np.allclose(pk.field(pp, s), kepler.field(kp, s),
                           rtol=1e-14, atol=1e-14)
        assert np.allclose(pk.accel(pp, s[:3]), kepler.accel(kp, s[:3]),
                           rtol=1e-14, atol=1e-14)
        E, L = pk.invariants(pp, s)
        Lk, _, Ek = kepler.invariants(kp, s)
        assert E == pytest.approx(Ek, rel=1e-14, abs=1e-14)
        assert np.array_equal(L, Lk)


def test_field_benchmark_value(params):
    s = np.array([0.4, 0.0, 0.0, 0.0, 2.0, 0.0])
    out = pk.field(params, s)
    # U'(0.4) = 1/0.16 + 3 * 0.0025 / 0.4^4 = 6.54296875
    assert np.array_equal(out[:3], s[3:])
    assert out[3] == pytest.approx(-6.54296875, rel=1e-12)
    assert out[4] == 0.0 and out[5] == 0.0


def test_force_is_central(params):
    rng = np.random.default_rng(41)
    for _ in range(200):
        s = np.concatenate((rng.uniform(-2, 2, 3), rng.uniform(-1.5, 1.5, 3)))
        if np.linalg.norm(s[:3]) < 0.25:
            continue
        a = pk.field(params, s)[3:]
        torque = np.cross(s[:3], a)
        assert np.linalg.norm(torque) <= 1e-13 * (1.0 + np.linalg.norm(a))


def test_field_rejects_origin(params):
    with pytest.raises(DomainError):
        pk.field(params, np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]))


def test_invariants_benchmark_values(params, start):
    E, L = pk.invariants(params, start)
    assert E == pytest.approx(-0.5390625, abs=1e-15)
    assert np.allclose(L, [0.0, 0.0, 0.8], atol=1e-16)


def test_invariants_zero_velocity(params):
    s = np.array([0.5, 0.0, 0.0, 0.0, 0.0, 0.0])
    E, L = pk.invariants(params, s)
    assert E == params.potential.u(0.5)
    assert np.array_equal(L, np.zeros(3))


def test_invariants_rotation_property(params):
    from test_rigid_body import random_rotation

    rng = np.random.default_rng(42)
    s = np.array([0.7, -0.3, 0.4, 0.2, 1.1, -0.5])
    E_ref, L_ref = pk.invariants(params, s)
    for _ in range(20):
        Q = random_rotation(rng)
        rotated = np.concatenate((Q @ s[:3], Q @ s[3:]))
        E, L = pk.invariants(params, rotated)
        assert E == pytest.approx(E_ref, rel=1e-13)
        assert np.allclose(L, Q @ L_ref, atol=1e-13)


def test_gradient_vanishes_on_level_set(params, start, pk_runs):
    # states along the high-accuracy reference trajectory stay on the level set
    for s in pk_runs["reference"].states[:: len(pk_runs["reference"].states) // 8]:
        g = pk.lyapunov_gradient(params, s)
        assert np.linalg.norm(g) <= 1e-10


def test_orthogonality_identity(params):
    rng = np.random.default_rng(43)
    for _ in range(2000):
        s = np.concatenate((rng.uniform(-2, 2, 3), rng.uniform(-1.5, 1.5, 3)))
        if np.linalg.norm(s[:3]) < 0.25:
            continue
        g = pk.lyapunov_gradient(params, s)
        f = pk.field(params, s)
        assert abs(float(g @ f)) <= 1e-12 * (1.0 + np.linalg.norm(g) * np.linalg.norm(f))


def test_modified_field_on_level_set(params, start):
    assert np.array_equal(pk.modified_field(params, start),
                          pk.field(params, start))


def test_euler_step_decreases_v_away_from_perihelion(params):
    # apoapsis-region state slightly off the level set, benchmark step size
    s = np.array([1.35, 0.1, 0.0, -0.05, 0.62, 0.0])
    v0 = pk.lyapunov(params, s)
    s1 = euler_step(lambda x: pk.modified_field(params, x), s, 0.03)
    assert pk.lyapunov(params, s1) < v0


def test_reference_flow_conserves_integrals(pk_runs):
    assert pk_runs["reference"].maxima["dE"] <= 1e-10
    assert pk_runs["reference"].maxima["dL"] <= 1e-10


def test_level_set_trajectory_is_bounded(pk_sys):
    x = pk_sys.initial_state.copy()
    rmax = vmax = 0.0
    for _ in range(steps_for(pk_sys.period, 1e-3)):
        x = rk4_step(pk_sys.field, x, 1e-3)
        rmax = max(rmax, np.linalg.norm(x[:3]))
        vmax = max(vmax, np.linalg.norm(x[3:]))
    assert rmax <= 2.0 and vmax <= 3.0


def quadratic_root_oracle(mu, delta, l0_sq):
    # |L0|^2 = mu r + 3 delta / r  <=>  mu r^2 - |L0|^2 r + 3 delta = 0
    disc = l0_sq**2 - 12.0 * mu * delta
    if disc < 0.0:
        return []
    return sorted([(l0_sq - math.sqrt(disc)) / (2 * mu),
                   (l0_sq + math.sqrt(disc)) / (2 * mu)])


def test_hypothesis_benchmark_satisfied(params):
    report = pk.check_hypothesis(params)
    assert report.satisfied and not report.vacuous
    oracle = quadratic_root_oracle(1.0, 0.0025, 0.64)
    assert len(report.roots) == 2
    assert sorted(report.roots) == pytest.approx(oracle, abs=1e-9)
    # energy residuals at the two radii, via the explicit formulas
    for root, res in zip(report.roots, report.residuals):
        expected = abs(params.E0 - (-1.0 / (2 * root) + 0.0025 / (2 * root**3)))
        assert res == pytest.approx(expected, rel=1e-9)


def test_hypothesis_violated_for_circular_orbit_data():
    rc = 0.9
    pot = pk.inverse_cube_perturbed(1.0, 0.0)
    p = pk.PerturbedKeplerParams(potential=pot, k1=1.0, k2=1.0,
                                 E0=-1.0 / (2 * rc), L0=(0.0, 0.0, math.sqrt(rc)))
    report = pk.check_hypothesis(p)
    assert not report.satisfied
    assert any(abs(r - rc) <= 1e-9 for r in report.roots)


def test_hypothesis_vacuous_when_no_roots(params):
    p = pk.PerturbedKeplerParams(potential=params.potential, k1=1.0, k2=1.0,
                                 E0=-0.5, L0=(0.0, 0.0, 10.0))
    report = pk.check_hypothesis(p, r_min=0.1, r_max=1.0)
    assert report.satisfied and report.vacuous
    assert report.bracket == (0.1, 1.0)


def test_hypothesis_bracket_validation(params):
    with pytest.raises(ValueError):
        pk.check_hypothesis(params, r_min=1.0, r_max=0.5)
    with pytest.raises(ValueError):
        pk.check_hypothesis(params, n_grid=1)


def test_root_finding_against_dense_scan(params):
    # brute-force sign-change scan on a million-point log grid
    def dense_roots(p):
        l0_sq = float(p.L0 @ p.L0)
        grid = np.geomspace(*pk.DEFAULT_BRACKET, 1_000_000)
        vals = grid**3 * p.potential.u_prime(grid) - l0_sq
        hits = []
        for i in np.nonzero(np.signbit(vals[:-1]) != np.signbit(vals[1:]))[0]:
            hits.append(0.5 * (grid[i] + grid[i + 1]))
        return hits

    rc = 0.9
    circular = pk.PerturbedKeplerParams(
        potential=pk.inverse_cube_perturbed(1.0, 0.0), k1=1.0, k2=1.0,
        E0=-1.0 / (2 * rc), L0=(0.0, 0.0, math.sqrt(rc)))
    for p in (params, circular):
        scan = sorted(dense_roots(p))
        found = sorted(pk.check_hypothesis(p).roots)
        assert len(scan) == len(found)
        for refined, coarse in zip(found, scan):
            # dense-grid midpoints are accurate to half a (log) grid cell
            assert abs(refined - coarse) <= coarse * 2e-5 + 1e-12
