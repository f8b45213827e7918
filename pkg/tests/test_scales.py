import math

import numpy as np
import pytest

from src.core.errors import InvalidInputError
from src.core.scales import (AMU_TO_AU, TailSpec, barrier_geometry, cutoff_L, cutoff_lambda, derive_scales,
                             energy_from_lambda, g_factor, langevin_sigma, partial_wave_cutoff, reduced_mass,
                             table_coefficients, wavenumber)


def test_ion_atom_scales():
    tail = TailSpec(4, 72.5)
    mu = reduced_mass(171.936, 171.936)
    assert mu == pytest.approx(171.936 / 2 * AMU_TO_AU)
    scales = derive_scales(tail, mu)
    assert scales.R_star == pytest.approx(4.8e3, rel=0.02)
    assert scales.E_star == pytest.approx(1.4e-13, rel=0.02)
    assert scales.k_star == pytest.approx(1.0 / scales.R_star)


def test_reduced_units(tail, mu):
    scales = derive_scales(tail, mu)
    assert scales.R_star == pytest.approx(1.0)
    assert scales.E_star == pytest.approx(1.0)


def test_g_factor():
    assert g_factor(4) == 2.0
    for n in (3, 5, 6, 8, 12):
        assert 1.0 < g_factor(n) < 2.0
    with pytest.raises(InvalidInputError):
        g_factor(2)


@pytest.mark.parametrize("n", [3, 4, 6])
def test_langevin_closed_forms(n):
    rng = np.random.default_rng(n)
    for C, E in zip(10.0 ** rng.uniform(-2, 3, 10), 10.0 ** rng.uniform(-12, -2, 10)):
        tail = TailSpec(n, C)
        assert langevin_sigma(tail, 1.0, E) == pytest.approx(table_coefficients(tail, E), rel=1e-12)


def test_langevin_equals_partial_wave_form(tail):
    mu = 3.7
    for E in (1e-4, 0.3, 25.0):
        k = wavenumber(mu, E)
        assert langevin_sigma(tail, mu, E) == pytest.approx(math.pi / k ** 2 * cutoff_lambda(tail, mu, E),
                                                            rel=1e-12)


def test_table_has_no_generic_form():
    assert table_coefficients(TailSpec(5, 1.0), 1.0) is None


def test_cutoff_anchor(tail, mu):
    E = energy_from_lambda(tail, mu, 625.0)
    assert 9.5e4 <= E / derive_scales(tail, mu).E_star <= 1.0e5
    assert cutoff_lambda(tail, mu, E) == pytest.approx(625.0, rel=1e-12)


def test_cutoff_L():
    assert cutoff_L(6.0) == pytest.approx(2.0)
    assert cutoff_L(0.0) == 0.0
    assert partial_wave_cutoff(6.0) == 2
    assert partial_wave_cutoff(6.5) == 3
    lam = np.array([2.0, 12.0, 110.0])
    np.testing.assert_allclose(cutoff_L(lam), [1.0, 3.0, 10.0])


def test_lambda_scaling_with_energy(tail, mu):
    # Lambda grows as E^((n-2)/n)
    ratio = cutoff_lambda(tail, mu, 400.0) / cutoff_lambda(tail, mu, 4.0)
    assert ratio == pytest.approx(10.0)


def test_barrier_top(tail, mu):
    ell = 3
    lam = ell * (ell + 1.0)
    geo = barrier_geometry(tail, mu, ell)
    assert geo.s_ell == pytest.approx(math.sqrt(4.0 * mu / lam))
    assert geo.E_top == pytest.approx(lam ** 2 / (16.0 * mu ** 2))
    with pytest.raises(InvalidInputError):
        barrier_geometry(tail, mu, 0)


def test_invalid_inputs(tail):
    with pytest.raises(InvalidInputError):
        TailSpec(2, 1.0)
    with pytest.raises(InvalidInputError):
        TailSpec(4, -1.0)
    with pytest.raises(InvalidInputError):
        TailSpec(4, 1.0, extra=((4, 1.0),))
    with pytest.raises(InvalidInputError):
        derive_scales(tail, 0.0)
    with pytest.raises(ValueError):
        cutoff_lambda(tail, 1.0, -1.0)
    with pytest.raises(InvalidInputError):
        reduced_mass(0.0, 1.0)


def test_subleading_terms_leave_scales_alone():
    plain = TailSpec(4, 2.0)
    extended = TailSpec(4, 2.0, extra=((6, 5.0),))
    assert derive_scales(plain, 1.0) == derive_scales(extended, 1.0)
    r = np.array([1.0, 2.0])
    np.testing.assert_allclose(extended.value(r), plain.value(r) - 5.0 / r ** 6)
    np.testing.assert_allclose(extended.derivative(r), plain.derivative(r) + 30.0 / r ** 7)
