import math

import numpy as np
import pytest

from src.core.errors import ConvergenceError, InvalidInputError, PhysicsDomainError
from src.core.potentials import HardSphere, SquareWell
from src.core.radial_solver import (SolverSettings, _log_root, count_bound_states, effective_q, integrate_radial,
                                    jump_profile, make_grid, matching_radius, pair_phase_shifts, phase_shift,
                                    phase_shift_mod_pi, scattering_length, start_index)
from tests.oracles import hard_sphere_phase, phase_distance, square_well_length, square_well_phase

KR_VALUES = [0.01, 0.3, 1.0, 3.0, 10.0]
ELLS = [0, 1, 2, 5, 10]


@pytest.mark.parametrize("kR", KR_VALUES)
@pytest.mark.parametrize("ell", ELLS)
def test_hard_sphere_oracle(hard_sphere, mu, fine_settings, kR, ell):
    k = kR / hard_sphere.hard_core
    E = k * k / (2 * mu)
    eta = phase_shift_mod_pi(hard_sphere, mu, E, ell, settings=fine_settings)
    assert phase_distance(eta, hard_sphere_phase(ell, k, 1.0)) < 1e-6


@pytest.mark.parametrize("kR", KR_VALUES)
@pytest.mark.parametrize("ell", ELLS)
def test_square_well_oracle(square_well, mu, fine_settings, kR, ell):
    k = kR / square_well.radius
    E = k * k / (2 * mu)
    eta = phase_shift_mod_pi(square_well, mu, E, ell, settings=fine_settings)
    assert phase_distance(eta, square_well_phase(ell, k, square_well.depth, square_well.radius, mu)) < 1e-6


def test_free_particle_has_no_phase(free_channel, mu):
    settings = SolverSettings(steps_per_wavelength=200)
    for ell in (0, 1, 3, 10):
        record = phase_shift(free_channel, mu, 2.0, ell, settings=settings)
        assert abs(record.eta) < 1e-6
        assert not record.ill_conditioned


def test_hard_sphere_absolute_phase(hard_sphere, mu, fine_settings):
    # no branch ambiguity for s waves: eta_0 = -kR
    for k in (0.2, 1.5, 4.0):
        record = phase_shift(hard_sphere, mu, k * k / (2 * mu), 0, settings=fine_settings)
        assert record.eta == pytest.approx(-k, abs=1e-6)


def test_levinson_square_well(square_well, mu, fine_settings):
    assert count_bound_states(square_well, mu, 0).count == 2
    assert count_bound_states(square_well, mu, 1).count == 2
    k = 0.01
    record = phase_shift(square_well, mu, k * k / (2 * mu), 0, settings=fine_settings)
    principal = square_well_phase(0, k, square_well.depth, square_well.radius, mu)
    assert record.eta == pytest.approx(2 * math.pi + principal, abs=1e-6)


def test_bound_states_of_walls(hard_sphere, free_channel, mu):
    assert count_bound_states(hard_sphere, mu).count == 0
    assert count_bound_states(free_channel, mu).count == 0
    assert not count_bound_states(hard_sphere, mu).ambiguous


def test_square_well_count_tracks_depth(mu):
    # s-wave thresholds at K R = (n - 1/2) pi
    for depth, expected in ((1.0, 0), (10.0, 1), (120.0, 3)):
        assert count_bound_states(SquareWell(depth, 1.0), mu).count == expected


def test_scattering_lengths(hard_sphere, square_well, mu, fine_settings):
    a = scattering_length(hard_sphere, mu)
    assert a.value == pytest.approx(1.0, rel=1e-6)
    assert not a.uncertain
    assert len(a.k_values) == 3
    b = scattering_length(square_well, mu, fine_settings)
    assert b.value == pytest.approx(square_well_length(square_well.depth, square_well.radius, mu), rel=1e-5)


def test_matching_radius_rules(model_pair, mu):
    settings = SolverSettings()
    E, ell = 2.0, 3
    r_max = matching_radius(model_pair.channels(), mu, E, ell, settings)
    k = math.sqrt(2 * mu * E)
    assert r_max >= (math.sqrt(12.0) + math.pi) / k
    # |V|/E at r_max is below the match tolerance
    assert abs(float(model_pair.tail.value(r_max))) / E <= settings.match_tolerance * (1 + 1e-9)
    relaxed = matching_radius(model_pair.channels(), mu, E, ell,
                              SolverSettings(tail_correction=True, match_tolerance=1e-4))
    assert relaxed < r_max


def test_point_cap_suggests_tail_correction(model_pair, mu):
    with pytest.raises(PhysicsDomainError, match="tail_correction"):
        make_grid(model_pair.channels(), mu, 1e-3, 0, SolverSettings(max_points=10_000))


def test_shared_grid_and_nodes(model_pair, mu):
    E = 1.0
    grid = make_grid(model_pair.channels(), mu, E, 0)
    assert grid.r_min < model_pair.va.characteristic_radius()
    sol = integrate_radial(model_pair.va, mu, E, 0, grid)
    signs = np.sign(sol.u[sol.u != 0])
    assert sol.nodes == np.count_nonzero(signs[1:] != signs[:-1])
    rec_a, rec_b = pair_phase_shifts(model_pair, E, 0)
    assert rec_a.channel == 'a' and rec_b.channel == 'b'
    assert rec_a.eta == pytest.approx(phase_shift(model_pair.va, mu, E, 0, grid).eta, abs=0.0)


def test_identical_channels_give_identical_phases(identical_pair, mu):
    for ell in (0, 4):
        rec_a, rec_b = pair_phase_shifts(identical_pair, 3.0, ell)
        assert rec_a.eta == rec_b.eta


def test_coarse_grid_rejected(square_well, mu):
    with pytest.raises(InvalidInputError):
        SolverSettings(steps_per_wavelength=10)


def test_invalid_energy(square_well, mu):
    with pytest.raises(InvalidInputError):
        phase_shift(square_well, mu, 0.0, 0)
    with pytest.raises(InvalidInputError):
        phase_shift(square_well, mu, -1.0, 0)


def test_tail_correction_adds_born_phase(model_pair, mu):
    E = 1.0
    settings = SolverSettings(tail_correction=True, match_tolerance=1e-5)
    record = phase_shift(model_pair.va, mu, E, 2, settings=settings)
    assert record.tail_phase > 0
    exact = phase_shift(model_pair.va, mu, E, 2)
    assert record.eta == pytest.approx(exact.eta, abs=1e-4)


@pytest.mark.parametrize("ell", [9, 12, 20])
def test_start_behind_a_high_barrier(model_pair, mu, ell):
    E = 100.0
    grid = make_grid(model_pair.channels(), mu, E, ell)
    for ch in model_pair.channels():
        i0 = start_index(ch, mu, E, ell, grid)
        assert float(effective_q(ch, mu, E, ell * (ell + 1.0), grid.radius(i0))) > 0
    rec_a, rec_b = pair_phase_shifts(model_pair, E, ell)
    assert math.isfinite(rec_a.eta) and math.isfinite(rec_b.eta)


def test_jump_profile_marks_the_well_edge(square_well, mu):
    grid = make_grid([square_well], mu, 1.0, 0)
    r = grid.radii(1)
    dq = jump_profile(square_well, mu, r, grid.base_step)
    hits = np.nonzero(dq)[0]
    assert hits.size == 1
    assert r[hits[0]] == pytest.approx(square_well.radius)
    assert dq[hits[0]] == pytest.approx(2 * mu * square_well.depth)


def test_root_search_failures_become_convergence_errors():
    with pytest.raises(ConvergenceError):
        _log_root(lambda x: math.nan, 1.0, 10.0)

    def broken(x):
        return 1.0 - x if x < 0.1 or x > 2.9 else math.sqrt(-1.0)

    with pytest.raises(ConvergenceError):
        _log_root(broken, 1.0, math.exp(3.0))
