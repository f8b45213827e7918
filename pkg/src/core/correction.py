"""
Analytic models of the quantal correction function.

F_closed integrates sin^2 of the linear phase model
Delta eta(lambda) = Delta delta_0 - lambda Delta A_0 over [0, Lambda];
f_locking is its frozen-phase limit. classify turns a scan into the
Wigner / locking / unlocking taxonomy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np
from scipy.integrate import quad

from src.core.errors import ConvergenceError, InvalidInputError

if TYPE_CHECKING:
    from src.core.scan import ExchangeScan

logger = logging.getLogger(__name__)

TAYLOR_LIMIT = 1e-6
QUAD_TOLERANCE = 1e-8
SUPPRESSED_LIMIT = math.pi / 6
AVERAGE_LIMIT = math.pi / 3
UNLOCK_GAP = 0.1
SUSTAIN_DECADES = 0.5
PLATEAU_FACTOR = 100.0
PLATEAU_DRIFT = 0.2
CASE_TAGS = ('suppressed', 'average', 'enhanced')
REGIMES = ('Wigner', 'locking', 'unlocking')
CRITERIA = ('gap', 'phase')


@dataclass(frozen=True)
class CorrectionInputs:
    delta_delta0: float
    delta_A0: float
    lambda_: float

    def __post_init__(self):
        if not self.lambda_ >= 0:
            raise InvalidInputError(f"Lambda must be non-negative, got {self.lambda_}")

    @property
    def x(self):
        return self.lambda_ * self.delta_A0


@dataclass(frozen=True)
class RegimeLabel:
    """
    Regime taxonomy of one scan.

    regime is the label at the plateau energy; use regime_at for the
    label of any other energy.
    """
    regime: str
    case_tag: str
    boundaries: tuple
    plateau_delta0: float
    criterion: str = 'gap'
    low_confidence: bool = False
    drift: float = 0.0


def _sinc(x):
    if abs(x) < TAYLOR_LIMIT:
        x2 = x * x
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    return math.sin(x) / x


def _oscillation(inp: CorrectionInputs):
    """sin(x)/(2x) cos(2 Delta delta_0 - x)"""
    x = inp.x
    return 0.5 * _sinc(x) * math.cos(2.0 * inp.delta_delta0 - x)


def F_closed(inp: CorrectionInputs) -> float:
    """F = 1/2 - sin(x)/(2x) cos(2 Delta delta_0 - x) with x = Lambda Delta A_0"""
    return 0.5 - _oscillation(inp)


def F_quadrature(delta_eta_of_lambda, Lambda, tolerance=QUAD_TOLERANCE) -> float:
    """
    (1/Lambda) int_0^Lambda sin^2[Delta eta(lambda)] d lambda by adaptive quadrature.

    Raises ConvergenceError when quad reports failure.
    """
    if not Lambda >= 0:
        raise InvalidInputError(f"Lambda must be non-negative, got {Lambda}")
    if Lambda == 0:
        return math.sin(delta_eta_of_lambda(0.0)) ** 2

    def integrand(lam):
        return math.sin(delta_eta_of_lambda(lam)) ** 2

    out = quad(integrand, 0.0, Lambda, epsabs=0.1 * tolerance * Lambda, epsrel=0.0,
               limit=max(200, int(Lambda)), full_output=1)
    if len(out) > 3:
        raise ConvergenceError(f"F quadrature did not converge: {out[3]}",
                               {'Lambda': Lambda, 'abserr': out[1]})
    return out[0] / Lambda


def linear_phase_model(inp: CorrectionInputs):
    """Delta eta(lambda) = Delta delta_0 - lambda Delta A_0"""
    return lambda lam: inp.delta_delta0 - lam * inp.delta_A0


def f_locking(delta_delta0) -> float:
    return math.sin(delta_delta0) ** 2


def sigma_model(sigma0, F, sigma_L) -> float:
    """sigma_exc ~ sigma0 + F sigma_L"""
    if sigma0 < 0 or F < 0 or sigma_L < 0:
        raise InvalidInputError("Cross sections and F must be non-negative",
                                {'sigma0': sigma0, 'F': F, 'sigma_L': sigma_L})
    return sigma0 + F * sigma_L


def sigma_lock(k, sigma_L, delta_delta0) -> float:
    """Locking approximation (pi/k^2 + sigma_L) sin^2 Delta delta_0"""
    if not k > 0:
        raise InvalidInputError(f"Wavenumber must be positive, got {k}")
    return (math.pi / k ** 2 + sigma_L) * f_locking(delta_delta0)


def sigma_osc(inp: CorrectionInputs, sigma_L) -> float:
    """Oscillating part, so that sigma0 + F sigma_L = sigma0 + sigma_L/2 - sigma_osc"""
    return sigma_L * _oscillation(inp)


def wigner_correction(k, delta_a) -> float:
    """Threshold form sin^2(k Delta a)"""
    return math.sin(k * delta_a) ** 2


def case_tag(delta_delta0) -> str:
    d = abs(delta_delta0)
    if d < SUPPRESSED_LIMIT:
        return 'suppressed'
    if d < AVERAGE_LIMIT:
        return 'average'
    return 'enhanced'


def band_centre(tag) -> float:
    """Target |Delta delta_0| in the middle of a band"""
    if tag not in CASE_TAGS:
        raise InvalidInputError(f"Unknown case tag {tag!r}")
    return {'suppressed': math.pi / 12, 'average': math.pi / 4, 'enhanced': 5 * math.pi / 12}[tag]


def _first_sustained(energies, hot, valid):
    """First energy from which hot holds at every valid point over SUSTAIN_DECADES"""
    span = 10.0 ** SUSTAIN_DECADES
    top = energies[-1]
    for i, e in enumerate(energies):
        if not (valid[i] and hot[i]):
            continue
        if e * span > top * (1.0 + 1e-12):
            break
        window = (energies >= e) & (energies <= e * span) & valid
        if np.all(hot[window]):
            return float(e)
    return math.inf


def _plateau_drift(scan: 'ExchangeScan', e_plateau, plateau_delta0):
    lo, hi = e_plateau / math.sqrt(10.0), e_plateau * math.sqrt(10.0)
    window = (scan.energies >= lo) & (scan.energies <= hi) & ~scan.resonance
    if not np.any(window):
        return 0.0
    spread = np.max(np.abs(scan.delta_delta0[window] - plateau_delta0))
    return float(spread / max(abs(plateau_delta0), math.pi / 12))


def classify(plateau_delta0, scan: 'ExchangeScan', criterion='gap') -> RegimeLabel:
    """
    Case tag from the plateau Delta delta_0 and regime boundaries from the scan.

    E_wigner is E*. E_unlock is the first energy above E_wigner from which
    the unlocking test holds over a half decade at every resonance-free
    point: |F - f| > 0.1 for criterion 'gap', |Lambda Delta A_0| >=
    |Delta delta_0| for criterion 'phase'.
    """
    if criterion not in CRITERIA:
        raise InvalidInputError(f"Unknown unlocking criterion {criterion!r}")
    energies = scan.energies
    e_wigner = scan.scales.E_star
    if energies.size < 2 or energies[-1] / energies[0] < 1e6 * (1.0 - 1e-9):
        logger.warning("Scan covers less than six decades; regime boundaries may be unreliable")

    valid = ~scan.resonance & (energies > e_wigner)
    if criterion == 'gap':
        hot = np.abs(scan.F_model - scan.f_lock) > UNLOCK_GAP
    else:
        hot = np.abs(scan.lambdas * scan.delta_A0) >= np.abs(scan.delta_delta0)
    e_unlock = _first_sustained(energies, hot, valid)
    if math.isinf(e_unlock):
        logger.info("No unlocking detected within the scanned range")

    e_plateau = PLATEAU_FACTOR * e_wigner
    drift = _plateau_drift(scan, e_plateau, plateau_delta0)
    low = drift > PLATEAU_DRIFT
    if low:
        logger.warning(f"Delta delta_0 drifts by {drift:.0%} around the plateau; classification is low confidence")
    label = RegimeLabel(regime='locking', case_tag=case_tag(plateau_delta0), boundaries=(e_wigner, e_unlock),
                        plateau_delta0=plateau_delta0, criterion=criterion, low_confidence=low, drift=drift)
    return replace(label, regime=regime_at(e_plateau, label))


def regime_at(E, label: RegimeLabel) -> str:
    e_wigner, e_unlock = label.boundaries
    if E < e_wigner:
        return 'Wigner'
    if E < e_unlock:
        return 'locking'
    return 'unlocking'
