import logging
import math

import numpy as np
import pytest

from src.core.errors import InvalidInputError, PhysicsDomainError
from src.core.phase_amplitude import (cumulative_phase, delta_A_envelope, delta_A_fit, fit_delta_A, log_envelope_form,
                                      milne_envelope, phase_integral, segment_cells, split_phase)
from src.core.radial_solver import SolverSettings, count_bound_states, phase_shift, scattering_length
from src.core.scales import barrier_geometry
from tests.oracles import hard_sphere_phase, phase_distance

SETTINGS = SolverSettings(steps_per_wavelength=200)


@pytest.mark.parametrize("ell", [0, 1, 3, 6])
def test_free_particle_phase_integral(free_channel, mu, ell):
    env = milne_envelope(free_channel, mu, 2.0, ell, settings=SETTINGS)
    assert phase_integral(env) == pytest.approx(0.0, abs=1e-6)


def test_hard_sphere_phase_integral(hard_sphere, mu):
    for k in (0.3, 2.0):
        env = milne_envelope(hard_sphere, mu, k * k / (2 * mu), 0, settings=SETTINGS)
        assert phase_integral(env) == pytest.approx(-k * hard_sphere.hard_core, abs=1e-9)


@pytest.mark.parametrize("E", [1.0, 10.0])
@pytest.mark.parametrize("ell", [0, 1, 3])
def test_milne_agrees_with_matching(square_well, mu, fine_settings, E, ell):
    env = milne_envelope(square_well, mu, E, ell, settings=fine_settings)
    exact = phase_shift(square_well, mu, E, ell, settings=fine_settings)
    assert phase_integral(env) == pytest.approx(exact.eta, abs=1e-5)


@pytest.mark.parametrize("E", [1.0, 10.0])
def test_envelope_sweep_crosses_the_well_edge(square_well, mu, E):
    # ell = 0 unit start coincides with the free start, so this runs the RK4 sweep
    settings = SolverSettings(steps_per_wavelength=400)
    env = milne_envelope(square_well, mu, E, 0, settings=settings, start='unit')
    assert env.theta is None
    exact = phase_shift(square_well, mu, E, 0, settings=settings)
    assert phase_integral(env) == pytest.approx(exact.eta, abs=1e-5)


@pytest.mark.parametrize("label", ['va', 'vb'])
@pytest.mark.parametrize("E", [0.05, 0.5, 5.0])
def test_milne_agrees_with_matching_on_model_channels(model_pair, mu, label, E):
    ch = getattr(model_pair, label)
    for ell in range(6):
        eta = phase_integral(milne_envelope(ch, mu, E, ell, settings=SETTINGS))
        exact = phase_shift(ch, mu, E, ell, settings=SETTINGS).eta
        assert eta == pytest.approx(exact, abs=1e-6), f"ell={ell}"


def test_envelope_sees_the_well_behind_a_barrier(model_pair, mu):
    ch = model_pair.va
    E, ell = 0.5, 3
    assert barrier_geometry(model_pair.tail, mu, ell).E_top > E
    env = milne_envelope(ch, mu, E, ell, settings=SETTINGS)
    assert env.theta is not None
    assert phase_integral(env) > math.pi
    assert np.all(np.diff(cumulative_phase(env)) > -1e-12)
    # 4 W^2 with W = k; cancellation spoils it where rho is large
    inside = env.rho[1:-1] < 100.0
    assert np.allclose(env.ermakov_invariant()[1:-1][inside], 4.0 * env.k ** 2, rtol=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("label", ['va', 'vb'])
def test_levinson_closure_at_low_energy(model_pair, mu, label):
    ch = getattr(model_pair, label)
    E = 1e-4
    k = math.sqrt(2.0 * mu * E)
    n_bound = count_bound_states(ch, mu).count
    a = scattering_length(ch, mu).value
    eta = phase_integral(milne_envelope(ch, mu, E, 0))
    assert eta == pytest.approx(n_bound * math.pi - math.atan(k * a), abs=1e-3)


def test_ermakov_invariant(hard_sphere, mu):
    k = 1.5
    env = milne_envelope(hard_sphere, mu, k * k / (2 * mu), 2, settings=SETTINGS)
    assert np.allclose(env.ermakov_invariant()[5:-5], 4 * k * k, rtol=1e-5)


def test_envelope_options_are_checked(square_well, mu):
    with pytest.raises(InvalidInputError):
        milne_envelope(square_well, mu, 1.0, 0, form='sourced')
    with pytest.raises(InvalidInputError):
        milne_envelope(square_well, mu, 1.0, 0, start='zero')
    with pytest.raises(InvalidInputError):
        milne_envelope(square_well, mu, -1.0, 0)


def test_continuous_lam_envelope_rejects_phase_integral(square_well, mu):
    env = milne_envelope(square_well, mu, 1.0, 1, lam=2.5)
    with pytest.raises(InvalidInputError):
        phase_integral(env)


def test_segment_cells_exact_on_cubics():
    h = 0.1
    r = np.arange(8) * h
    g = 1.0 - 2.0 * r + 3.0 * r ** 2 + 0.5 * r ** 3

    def antiderivative(x):
        return x - x ** 2 + x ** 3 + 0.125 * x ** 4

    cells = segment_cells(g, h)
    assert cells.size == r.size - 1
    assert np.allclose(cells, antiderivative(r[1:]) - antiderivative(r[:-1]), rtol=1e-12, atol=1e-15)


def test_segment_cells_short_inputs():
    assert segment_cells(np.array([1.0]), 0.1).size == 0
    assert segment_cells(np.array([1.0, 3.0]), 0.5)[0] == pytest.approx(1.0)
    # three samples of x^2 on [0, 2]
    assert segment_cells(np.array([0.0, 1.0, 4.0]), 1.0).sum() == pytest.approx(8.0 / 3.0)


def test_fit_delta_A_linear_data():
    ells = np.arange(1, 7)
    lam = ells * (ells + 1.0)
    deta = 0.3 - 0.02 * lam
    fit = fit_delta_A(ells, deta, energy=5.0)
    assert fit.value == pytest.approx(0.02)
    assert fit.intercept == pytest.approx(0.3)
    assert not fit.nonlinear
    assert fit.ell_range == tuple(range(1, 7))
    assert fit.method == 'fit'


def test_fit_delta_A_unwraps_by_pi():
    ells = np.arange(1, 6)
    lam = ells * (ells + 1.0)
    deta = 0.1 - 0.03 * lam
    wrapped = deta + np.array([0, math.pi, 0, -math.pi, 2 * math.pi])
    assert fit_delta_A(ells, wrapped).value == pytest.approx(0.03)


def test_fit_delta_A_flags_curvature_and_short_lists():
    ells = np.arange(1, 7)
    lam = ells * (ells + 1.0)
    assert fit_delta_A(ells, 1e-3 * lam ** 2).nonlinear
    with pytest.raises(InvalidInputError):
        fit_delta_A([1, 2, 3], [0.0, 0.1, 0.2])


def test_split_phase_reconstructs_eta(model_pair, mu):
    ch = model_pair.va
    E, ell = 0.5, 3
    barrier = barrier_geometry(model_pair.tail, mu, ell)
    assert barrier.E_top > E
    env = milne_envelope(ch, mu, E, ell, settings=SETTINGS)
    split = split_phase(env, barrier)
    assert split.n_inner >= 0
    exact = phase_shift(ch, mu, E, ell, settings=SETTINGS).eta
    assert split.n_inner * math.pi + split.eta_out == pytest.approx(exact, abs=1e-5)
    if split.n_inner > 0:
        h = env.base_step
        assert 0.8 * barrier.s_ell - h <= split.split_radius <= 1.2 * barrier.s_ell + h


def test_split_needs_barrier_above_energy(model_pair, mu):
    env = milne_envelope(model_pair.va, mu, 2.0, 1, settings=SETTINGS)
    with pytest.raises(PhysicsDomainError):
        split_phase(env, barrier_geometry(model_pair.tail, mu, 1))


def test_identical_channels_have_no_curvature_difference(identical_pair, mu):
    for ell in (0, 2):
        assert delta_A_envelope(identical_pair, mu, 1.0, ell).value == 0.0


def test_delta_A_rejects_negative_waves(model_pair, mu):
    with pytest.raises(InvalidInputError):
        delta_A_envelope(model_pair, mu, 1.0, -1)


def test_envelope_form_is_logged(caplog):
    with caplog.at_level(logging.INFO, logger="src.core.phase_amplitude"):
        log_envelope_form()
    assert "product" in caplog.text


@pytest.mark.slow
def test_unit_start_settles_on_free_envelope(hard_sphere, mu):
    k = 1.0
    env = milne_envelope(hard_sphere, mu, k * k / (2 * mu), 1, settings=SETTINGS, start='unit')
    assert phase_distance(phase_integral(env), hard_sphere_phase(1, k, 1.0)) < 1e-4


@pytest.mark.slow
def test_envelope_delta_A_matches_slope_fit(model_pair, mu):
    E = 1e3
    envelope = delta_A_envelope(model_pair, mu, E, 0)
    fit = delta_A_fit(model_pair, mu, E, ell_list=[1, 2, 3, 4])
    assert envelope.method == 'envelope-integral'
    assert envelope.value == pytest.approx(fit.value, rel=0.1, abs=1e-4)
