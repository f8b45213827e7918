"""
Riccati-Bessel functions jhat = x j_l(x) and nhat = x y_l(x).

nhat comes from upward recurrence, which is stable for the irregular
function. jhat comes from downward (Miller) recurrence seeded with the
continued fraction for jhat_l/jhat_{l-1} and normalized against the
closed forms of jhat_0 or jhat_1. The free envelope jhat^2 + nhat^2 and the
continuous free phase are built on top of them.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import special

from src.core.errors import ConvergenceError, InvalidInputError

CF_TOLERANCE = 1e-16
CF_MAX_TERMS = 100000
_TINY = 1e-300
_BIG = 1e250


class RiccatiValues(NamedTuple):
    """Values and x-derivatives of jhat_l and nhat_l at one argument"""
    j: float
    dj: float
    n: float
    dn: float


def _check_x(x):
    if not x > 0:
        raise InvalidInputError(f"Riccati-Bessel argument must be positive, got {x}")


def riccati_yn(ell_max, x):
    """nhat_0 .. nhat_ell_max at x"""
    _check_x(x)
    out = np.empty(ell_max + 1)
    out[0] = -math.cos(x)
    if ell_max >= 1:
        out[1] = -math.cos(x) / x - math.sin(x)
    for l in range(1, ell_max):
        out[l + 1] = (2 * l + 1) / x * out[l] - out[l - 1]
    return out


def _ratio(ell, x):
    """jhat_ell / jhat_{ell-1} by the modified Lentz continued fraction"""
    f = _TINY
    c = f
    d = 0.0
    for j in range(1, CF_MAX_TERMS):
        a = x if j == 1 else -x * x
        b = 2.0 * (ell + j) - 1.0
        d = b + a * d
        if d == 0.0:
            d = _TINY
        c = b + a / c
        if c == 0.0:
            c = _TINY
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < CF_TOLERANCE:
            return f
    raise ConvergenceError(f"Continued fraction for jhat_{ell}({x}) did not converge")


def riccati_jn(ell_max, x):
    """jhat_0 .. jhat_ell_max at x"""
    _check_x(x)
    # start where jhat is monotone in ell so jhat_top cannot sit on a zero
    top = max(ell_max, int(x)) + 16
    out = np.empty(top + 1)
    out[top] = _TINY ** 0.5
    out[top - 1] = out[top] / _ratio(top, x)
    for l in range(top - 1, 0, -1):
        out[l - 1] = (2 * l + 1) / x * out[l] - out[l + 1]
        if abs(out[l - 1]) > _BIG:
            out[l - 1:] /= _BIG

    j0 = math.sin(x)
    j1 = math.sin(x) / x - math.cos(x)
    if abs(j0) >= abs(j1):
        out *= j0 / out[0]
    else:
        out *= j1 / out[1]
    return out[:ell_max + 1]


def riccati_functions(ell, x) -> RiccatiValues:
    """jhat_ell, nhat_ell and their derivatives with respect to x"""
    jn = riccati_jn(max(ell, 1), x)
    yn = riccati_yn(max(ell, 1), x)
    if ell == 0:
        return RiccatiValues(jn[0], math.cos(x), yn[0], math.sin(x))
    dj = jn[ell - 1] - ell * jn[ell] / x
    dn = yn[ell - 1] - ell * yn[ell] / x
    return RiccatiValues(jn[ell], dj, yn[ell], dn)


def riccati_continuous(lam, x) -> RiccatiValues:
    """jhat, nhat and x-derivatives for a continuous lam = nu^2 - 1/4 >= -1/4"""
    _check_x(x)
    if lam < -0.25:
        raise InvalidInputError(f"Centrifugal strength below -1/4: {lam}")
    nu = math.sqrt(lam + 0.25)
    s = math.sqrt(0.5 * math.pi * x)
    j, y = special.jv(nu, x), special.yv(nu, x)
    dj, dy = special.jvp(nu, x, 1), special.yvp(nu, x, 1)
    return RiccatiValues(s * j, s * (0.5 * j / x + dj), s * y, s * (0.5 * y / x + dy))


def _nearest_branch(raw, nu, x):
    if x > nu:
        guess = math.sqrt(x * x - nu * nu) - nu * math.acos(nu / x) + math.pi / 4.0
    else:
        guess = 0.0
    return raw + 2.0 * math.pi * round((guess - raw) / (2.0 * math.pi))


def free_phase(ell, x):
    """
    Continuous phase phi with jhat = M sin(phi), -nhat = M cos(phi).

    phi(0) = 0 and phi -> x - ell pi/2; the branch is taken nearest the
    Langer-WKB estimate.
    """
    v = riccati_functions(ell, x)
    return _nearest_branch(math.atan2(v.j, -v.n), ell + 0.5, x)


def free_phase_continuous(lam, x):
    """free_phase for a continuous centrifugal strength"""
    v = riccati_continuous(lam, x)
    return _nearest_branch(math.atan2(v.j, -v.n), math.sqrt(lam + 0.25), x)


def free_envelope(ell, x):
    """M^2 = jhat^2 + nhat^2 and its first two x-derivatives for integer ell"""
    v = riccati_functions(ell, x)
    lam = ell * (ell + 1.0)
    d2j = (lam / (x * x) - 1.0) * v.j
    d2n = (lam / (x * x) - 1.0) * v.n
    m2 = v.j * v.j + v.n * v.n
    dm2 = 2.0 * (v.j * v.dj + v.n * v.dn)
    d2m2 = 2.0 * (v.dj * v.dj + v.j * d2j + v.dn * v.dn + v.n * d2n)
    return m2, dm2, d2m2


def _bessel_envelope(nu, x):
    """(pi x/2)(J_nu^2 + Y_nu^2) and two x-derivatives for real order nu"""
    j = special.jv(nu, x)
    y = special.yv(nu, x)
    dj = special.jvp(nu, x, 1)
    dy = special.yvp(nu, x, 1)
    d2j = -dj / x - (1.0 - nu * nu / (x * x)) * j
    d2y = -dy / x - (1.0 - nu * nu / (x * x)) * y
    s0 = j * j + y * y
    s1 = j * dj + y * dy
    s2 = dj * dj + j * d2j + dy * dy + y * d2y
    half_pi = 0.5 * math.pi
    return half_pi * x * s0, half_pi * s0 + math.pi * x * s1, 2.0 * math.pi * s1 + math.pi * x * s2


def free_envelope_continuous(lam, x):
    """Free envelope for a continuous centrifugal strength lam = ell(ell+1) >= -1/4"""
    _check_x(x)
    if lam < -0.25:
        raise InvalidInputError(f"Centrifugal strength below -1/4: {lam}")
    return _bessel_envelope(math.sqrt(lam + 0.25), x)
