"""
Long-range tail physics.

Characteristic scales of an attractive -C_n/r^n tail, the Langevin cutoff
Lambda(E) and cross section, and the geometry of the centrifugal barrier.
Atomic units with hbar = 1 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from src.core.errors import InvalidInputError

# Electron masses per atomic mass unit
AMU_TO_AU = 1822.888486


@dataclass(frozen=True)
class TailSpec:
    """
    Attractive inverse-power tail V(r) = -C_n/r^n - sum_m C_m/r^m.

    Attributes
    ----------
    n : int
        Leading exponent, n >= 3.
    C_n : float
        Leading coefficient (energy x length^n), positive for attraction.
    extra : tuple of (int, float)
        Optional sub-leading terms (m, C_m) with m > n. They shape the
        potential but never the scales.
    """
    n: int
    C_n: float
    extra: tuple = field(default=())

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise InvalidInputError(f"Tail exponent must be an integer >= 3, got {self.n}")
        if not self.C_n > 0:
            raise InvalidInputError(f"Tail coefficient must be positive, got {self.C_n}")
        object.__setattr__(self, 'n', int(self.n))
        terms = tuple((int(m), float(c)) for m, c in self.extra)
        for m, _ in terms:
            if m <= self.n:
                raise InvalidInputError(f"Sub-leading tail power {m} must exceed n={self.n}")
        object.__setattr__(self, 'extra', terms)

    def value(self, r):
        r = np.asarray(r, dtype=float)
        v = -self.C_n / r**self.n
        for m, c in self.extra:
            v = v - c / r**m
        return v

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        dv = self.n * self.C_n / r**(self.n + 1)
        for m, c in self.extra:
            dv = dv + m * c / r**(m + 1)
        return dv

    def terms(self):
        """All (power, coefficient) pairs, leading term first"""
        return ((self.n, self.C_n),) + self.extra


@dataclass(frozen=True)
class ScaleSet:
    """Characteristic length, energy and wavenumber of a power-law tail"""
    R_star: float
    E_star: float
    k_star: float


@dataclass(frozen=True)
class BarrierGeometry:
    """Position and height of the centrifugal barrier top for a (continuous) ell"""
    s_ell: float
    E_top: float
    ell: float


def _check_mu(mu):
    if not mu > 0:
        raise InvalidInputError(f"Reduced mass must be positive, got {mu}")


def _check_energy(E):
    E = np.asarray(E, dtype=float)
    if np.any(~(E > 0)):
        raise InvalidInputError("Collision energy must be positive", {'energy': E.tolist()})
    return E


def _scalar_or_array(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def reduced_mass(mass_a_amu, mass_b_amu):
    """Reduced mass in electron masses from two masses in amu"""
    if not (mass_a_amu > 0 and mass_b_amu > 0):
        raise InvalidInputError(f"Masses must be positive, got {mass_a_amu}, {mass_b_amu}")
    return AMU_TO_AU * mass_a_amu * mass_b_amu / (mass_a_amu + mass_b_amu)


def wavenumber(mu, E):
    """k = sqrt(2 mu E)"""
    _check_mu(mu)
    return _scalar_or_array(np.sqrt(2.0 * mu * _check_energy(E)))


def derive_scales(tail: TailSpec, mu: float) -> ScaleSet:
    """
    Compute R*, E* and k* of the leading tail term.

    Args:
        tail: Tail specification
        mu: Reduced mass (a.u.)

    Returns:
        ScaleSet with R* = (2 mu C_n)^(1/(n-2)), E* = 1/(2 mu R*^2), k* = 1/R*
    """
    _check_mu(mu)
    R_star = (2.0 * mu * tail.C_n) ** (1.0 / (tail.n - 2))
    E_star = 1.0 / (2.0 * mu * R_star**2)
    return ScaleSet(R_star=R_star, E_star=E_star, k_star=1.0 / R_star)


def g_factor(n) -> float:
    """g_n = n/(n-2) * ((n-2)/2)^(2/n); 1 < g_n <= 2 with the maximum at n = 4"""
    if n <= 2:
        raise InvalidInputError(f"g_n is undefined for n <= 2, got {n}")
    return n / (n - 2.0) * ((n - 2.0) / 2.0) ** (2.0 / n)


def cutoff_lambda(tail: TailSpec, mu, E):
    """Langevin cutoff Lambda(E) = g_n (E/E*)^((n-2)/n)"""
    E = _check_energy(E)
    scales = derive_scales(tail, mu)
    n = tail.n
    return _scalar_or_array(g_factor(n) * (E / scales.E_star) ** ((n - 2.0) / n))


def energy_from_lambda(tail: TailSpec, mu, Lambda):
    """Inverse of cutoff_lambda: E = E* (Lambda/g_n)^(n/(n-2))"""
    Lambda = np.asarray(Lambda, dtype=float)
    if np.any(Lambda < 0):
        raise InvalidInputError("Lambda must be non-negative")
    scales = derive_scales(tail, mu)
    n = tail.n
    return _scalar_or_array(scales.E_star * (Lambda / g_factor(n)) ** (n / (n - 2.0)))


def cutoff_L(Lambda):
    """Real L with L(L+1) = Lambda"""
    Lambda = np.asarray(Lambda, dtype=float)
    return _scalar_or_array((np.sqrt(1.0 + 4.0 * Lambda) - 1.0) / 2.0)


def partial_wave_cutoff(Lambda) -> int:
    """Last partial wave of the truncated sum, ceil(L)"""
    return int(math.ceil(cutoff_L(float(Lambda))))


def langevin_sigma(tail: TailSpec, mu, E):
    """
    Generalized Langevin cross section.

    sigma_L = pi g_n (C_n/E)^(2/n), identical to (pi/k^2) Lambda(E).
    """
    _check_mu(mu)
    E = _check_energy(E)
    n = tail.n
    return _scalar_or_array(math.pi * g_factor(n) * (tail.C_n / E) ** (2.0 / n))


def barrier_geometry(tail: TailSpec, mu, ell) -> BarrierGeometry:
    """
    Top of the centrifugal barrier for the leading tail term.

    Args:
        tail: Tail specification
        mu: Reduced mass (a.u.)
        ell: Partial wave, continuous values allowed

    Returns:
        BarrierGeometry with s = (n C_n mu / ell(ell+1))^(1/(n-2)) and
        E_top = -C_n/s^n + ell(ell+1)/(2 mu s^2)
    """
    _check_mu(mu)
    lam = ell * (ell + 1.0)
    if not lam > 0:
        raise InvalidInputError(f"No centrifugal barrier for ell={ell}")
    n, C = tail.n, tail.C_n
    s = (n * C * mu / lam) ** (1.0 / (n - 2))
    E_top = -C / s**n + lam / (2.0 * mu * s**2)
    return BarrierGeometry(s_ell=s, E_top=E_top, ell=float(ell))


def table_coefficients(tail: TailSpec, E):
    """Langevin cross sections in the closed forms listed for n = 3, 4, 6"""
    E = _check_energy(E)
    C = tail.C_n
    forms = {
        3: lambda: 3.0 * math.pi * (C / (2.0 * E)) ** (2.0 / 3.0),
        4: lambda: 2.0 * math.pi * np.sqrt(C / E),
        6: lambda: 1.5 * math.pi * (2.0 * C / E) ** (1.0 / 3.0),
    }
    if tail.n not in forms:
        return None
    return _scalar_or_array(forms[tail.n]())
