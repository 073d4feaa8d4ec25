import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticetrap.constants import AMU, E_CHARGE, EPS0, HBAR, YB171_MASS
from latticetrap.metrics import (
    LaserForceModel,
    MagneticForceModel,
    NoiseModel,
    coupling_and_beta,
    current_for_gradient,
    heating_and_ksim,
    ksim_closed_form,
    laser_force,
    laser_power_for_error,
    magnetic_force,
    metrics_report,
    optimal_detuning,
    optimized_closed_forms,
    optimized_interaction_time_laser,
    power_dissipation,
    secular_from_eta,
    sim_error,
    sim_error_heating,
    sim_error_laser,
    sim_error_mag,
    spontaneous_emission,
    unique_operating_point,
)

pos = lambda lo, hi: st.floats(lo, hi, allow_nan=False, allow_infinity=False)
masses = pos(1, 250).map(lambda u: u * AMU)
alphas = pos(0.05e-6, 3e-6)
etas = pos(0.02, 0.9)
k_rs = pos(30, 300)
k_As = pos(60, 600)
forces = pos(1e-24, 1e-20)
xs = pos(2, 4)


@settings(max_examples=60)
@given(forces, masses, k_rs, k_As, alphas, etas, xs, pos(1e-25, 1e-17))
def test_ksim_closed_form_matches_composition(F, m, k_r, k_A, alpha, eta, x, Xi):
    noise = NoiseModel(Xi, x)
    r, A = k_r * alpha, k_A * alpha
    omega = secular_from_eta(eta, alpha, m, r)
    _, K = heating_and_ksim(m, omega, A, r, F, noise)
    assert ksim_closed_form(F, m, r, alpha, eta, A, noise) == pytest.approx(K, rel=1e-12)
    w2, K2, T_J = optimized_closed_forms(k_r, k_A, alpha, m, eta, F, noise)
    assert w2 == pytest.approx(omega, rel=1e-12)
    assert K2 == pytest.approx(K, rel=1e-12)
    assert T_J == pytest.approx(coupling_and_beta(F, m, omega, A).T_J, rel=1e-12)


@settings(max_examples=60)
@given(forces, masses, k_rs, k_As, alphas, etas)
def test_general_x_at_four_equals_default(F, m, k_r, k_A, alpha, eta):
    default = NoiseModel.preset("room-temperature")
    explicit = NoiseModel(default.Xi, 4.0)
    r, A = k_r * alpha, k_A * alpha
    omega = secular_from_eta(eta, alpha, m, r)
    assert heating_and_ksim(m, omega, A, r, F, explicit)[1] == pytest.approx(
        heating_and_ksim(m, omega, A, r, F, default)[1], rel=1e-12)
    assert optimized_closed_forms(k_r, k_A, alpha, m, eta, F, explicit)[1] == pytest.approx(
        heating_and_ksim(m, omega, A, r, F, default)[1], rel=1e-12)


@settings(max_examples=60)
@given(forces, masses, pos(1e5, 1e8), st.integers(1, 5), pos(0, 3))
def test_heating_error_limit(F, m, omega, M, nbar):
    base = sim_error(F, m, omega, M, nbar)
    assert sim_error_heating(F, m, omega, M, nbar, math.inf) == base
    big = sim_error_heating(F, m, omega, M, nbar, 1e12)
    assert big == pytest.approx(base, rel=1e-11)
    assert sim_error_heating(F, m, omega, M, nbar, 2.0) > base


laser_models = st.builds(
    LaserForceModel,
    P=pos(0.01, 20),
    detuning=pos(1e12, 50e12).map(lambda d: 2 * math.pi * d),
    W=pos(5e-6, 100e-6),
    n_s=st.integers(2, 15),
    M_obs=st.integers(1, 4),
    nbar=pos(0, 2),
    cyclic_detuning=st.booleans(),
)


@settings(max_examples=80)
@given(laser_models, k_rs, k_As, alphas, masses, etas)
def test_laser_error_equals_composed(model, k_r, k_A, alpha, m, eta):
    F = laser_force(model, k_A, alpha)
    omega = secular_from_eta(eta, alpha, m, k_r * alpha)
    composed = sim_error(F, m, omega, model.M_obs, model.nbar)
    assert sim_error_laser(model, k_r, k_A, alpha, m, eta) == pytest.approx(composed, rel=1e-9)
    T_J = coupling_and_beta(F, m, omega, k_A * alpha).T_J
    assert optimized_interaction_time_laser(model, k_r, k_A, alpha, m, eta) == pytest.approx(T_J, rel=1e-9)


@settings(max_examples=80)
@given(pos(1, 2000), k_rs, pos(30, 300), alphas, masses, etas, st.integers(1, 4), pos(0, 2))
def test_magnetic_error_equals_composed(I, k_r, k_a, alpha, m, eta, M, nbar):
    model = MagneticForceModel(I, k_a, k_r, M_obs=M, nbar=nbar)
    _, _, F = magnetic_force(model, alpha)
    omega = secular_from_eta(eta, alpha, m, k_r * alpha)
    composed = sim_error(F, m, omega, M, nbar)
    assert sim_error_mag(model, alpha, m, eta) == pytest.approx(composed, rel=1e-9)


@settings(max_examples=40)
@given(laser_models, k_rs, k_As, masses, etas, alphas, pos(1.01, 5))
def test_laser_error_increases_with_alpha(model, k_r, k_A, m, eta, a, factor):
    e1 = sim_error_laser(model, k_r, k_A, a, m, eta)
    e2 = sim_error_laser(model, k_r, k_A, a * factor, m, eta)
    assert e2 > e1
    assert e2 / e1 == pytest.approx(factor, rel=1e-9)


@settings(max_examples=40)
@given(pos(1, 2000), k_rs, pos(30, 300), masses, etas, alphas, pos(1.01, 5))
def test_magnetic_error_decreases_with_alpha(I, k_r, k_a, m, eta, a, factor):
    model = MagneticForceModel(I, k_a, k_r)
    assert sim_error_mag(model, a * factor, m, eta) < sim_error_mag(model, a, m, eta)


@settings(max_examples=40)
@given(laser_models, k_rs, k_As, alphas, masses, etas, pos(0.01, 1))
def test_power_for_error_inverts(model, k_r, k_A, alpha, m, eta, target):
    P = laser_power_for_error(model, target, k_r, k_A, alpha, m, eta)
    from dataclasses import replace

    assert sim_error_laser(replace(model, P=P), k_r, k_A, alpha, m, eta) == pytest.approx(target, rel=1e-12)


def test_gradient_current_round_trip():
    model = MagneticForceModel(250.0, 100.0, 100.0)
    b_r, b_xz, F = magnetic_force(model, 0.3e-6)
    assert current_for_gradient(b_r, 0.3e-6, 100.0, 100.0) == pytest.approx(250.0, rel=1e-12)
    # gradient components: b_xz = b_r cos(theta) / 2
    assert b_xz == pytest.approx(b_r * math.cos(model.angle) / 2, rel=1e-12)


def test_beta_and_J_units():
    m, omega, A, F = YB171_MASS, 2 * math.pi * 1e6, 50e-6, 1e-22
    c = coupling_and_beta(F, m, omega, A)
    assert c.beta == pytest.approx(E_CHARGE**2 / (2 * math.pi * EPS0 * m * omega**2 * A**3))
    assert c.J == pytest.approx(c.beta * F**2 / (m * omega**2 * HBAR))
    assert c.short_range


def test_ksim_unit_scaling():
    # K_sim is dimensionless: invariant under rescaling r, A, alpha together when x = 4
    # and the force scales as 1/alpha^2 with Xi fixed (K ~ F^2 alpha^3)
    noise = NoiseModel(1e-20, 4.0)
    base = optimized_closed_forms(100, 170, 0.3e-6, YB171_MASS, 0.15, 1e-21, noise)[1]
    twice = optimized_closed_forms(100, 170, 0.6e-6, YB171_MASS, 0.15, 1e-21, noise)[1]
    assert twice / base == pytest.approx(8.0, rel=1e-12)


def test_spontaneous_emission_pole_guard():
    with pytest.raises(ValueError):
        LaserForceModel(P=1.0, detuning=2 * math.pi * 120e12)


def test_optimal_detuning_fractions():
    fs = 2 * math.pi * 100e12
    # stationary points of the two scattering-rate shapes are 1/3 and 1/(1 + 2^(1/3))
    assert optimal_detuning(fs, "force") / fs == pytest.approx(1 / 3, rel=1e-8)
    assert optimal_detuning(fs, "rabi") / fs == pytest.approx(1 / (1 + 2 ** (1 / 3)), rel=1e-8)


def test_unique_operating_point_and_dissipation():
    m, k_r, eta, alpha, q = YB171_MASS, 100.0, 0.15, 0.3e-6, 0.5
    V0, Om, PD = unique_operating_point(m, q, k_r, eta, alpha, C=1e-12, R_chip=1.0)
    assert Om == pytest.approx(V0 / alpha)
    r = k_r * alpha
    assert 2 * E_CHARGE * eta * V0 / (m * r**2 * Om**2) == pytest.approx(q, rel=1e-12)
    assert PD == pytest.approx(power_dissipation(V0, Om, 1e-12, 1.0), rel=1e-12)
    with pytest.raises(ValueError):
        unique_operating_point(m, 0.9, k_r, eta, alpha)


def test_report_carries_inputs():
    model = LaserForceModel(P=2.0)
    F = laser_force(model, 170, 0.3e-6)
    rep = metrics_report(F, YB171_MASS, 2 * math.pi * 1e6, 50e-6, 30e-6, NoiseModel.preset("cryogenic"),
                         laser=(model, 170, 0.3e-6), provenance={"source": "unit"})
    d = rep.to_dict()
    assert d["inputs"]["source"] == "unit" and d["L_sim"] == rep.T_S / rep.T_J
    assert rep.K_sim == pytest.approx(rep.T_ndot / rep.T_J)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(1e-20, 5.0)
    with pytest.raises(ValueError):
        NoiseModel(0.0)
    assert NoiseModel.preset("cryogenic").Xi == pytest.approx(NoiseModel.preset("room-temperature").Xi * 1e-3)
