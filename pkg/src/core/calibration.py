"""
Calibration of a channel pair to a locking-regime case.

The core coefficient of channel b is tuned until the plateau phase
difference Delta delta_0 (at 100 E*) sits at the centre of the requested
band. A log-spaced sweep finds sign changes of sin^2 Delta delta_0 -
sin^2 theta_target and brentq refines the one closest to the template.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from src.core.correction import CASE_TAGS, PLATEAU_FACTOR, band_centre, case_tag
from src.core.errors import CalibrationError, ConvergenceError, ExchangeError, InvalidInputError
from src.core.exchange import fold_phase, solve_partial_wave
from src.core.potentials import ChannelPair, ModelPotential, make_pair
from src.core.radial_solver import DEFAULT_SETTINGS, scattering_length
from src.core.scales import derive_scales

logger = logging.getLogger(__name__)

# sweep range of C_rep(b) as multiples of the template value
DEFAULT_SPAN = (0.25, 4.0)
SWEEP_POINTS = 33
PARAMETER_RTOL = 1e-12


@dataclass(frozen=True)
class CalibrationResult:
    pair: ChannelPair
    target: str
    parameter: float
    delta_delta0: float
    delta_a: float
    plateau_energy: float
    iterations: int
    trace: tuple


def plateau_energy(pair: ChannelPair):
    return PLATEAU_FACTOR * derive_scales(pair.tail, pair.mu).E_star


def plateau_delta0(pair: ChannelPair, settings=DEFAULT_SETTINGS):
    """Folded s-wave phase difference at the plateau energy"""
    _, deta, _ = solve_partial_wave(pair, plateau_energy(pair), 0, settings)
    return fold_phase(deta)[1]


def with_core(template: ChannelPair, c_rep):
    """Template pair with the core coefficient of channel b replaced"""
    vb = template.vb
    return make_pair(template.va, ModelPotential(c_rep, template.tail, label='b', power=vb.power),
                     template.tail, template.mu)


def _scattering_difference(pair, settings):
    a = scattering_length(pair.va, pair.mu, settings)
    b = scattering_length(pair.vb, pair.mu, settings)
    if a.uncertain or b.uncertain:
        logger.warning("Scattering lengths of the calibrated pair are uncertain")
    return b.value - a.value


def calibrate_case(template: ChannelPair, target, settings=DEFAULT_SETTINGS, bounds=None,
                   sweep_points=SWEEP_POINTS) -> CalibrationResult:
    """
    Tune C_rep of channel b so the plateau Delta delta_0 lands in the target band.

    Args:
        template: Pair whose channel b is a ModelPotential
        target: 'suppressed', 'average' or 'enhanced'
        settings: Solver tolerances
        bounds: (low, high) for C_rep(b); defaults to DEFAULT_SPAN around the template
        sweep_points: Log-spaced sweep size

    Returns:
        CalibrationResult; iterations is 0 when the template already lies in the band

    Raises:
        CalibrationError: with the sweep trace when no bracket exists
    """
    if target not in CASE_TAGS:
        raise InvalidInputError(f"Unknown calibration target {target!r}")
    if not isinstance(template.vb, ModelPotential):
        raise InvalidInputError("Calibration tunes the core of channel b, which must be a model potential")
    e_plat = plateau_energy(template)
    c0 = template.vb.c_rep
    trace = []

    def evaluate(c_rep):
        try:
            delta = plateau_delta0(with_core(template, c_rep), settings)
        except ExchangeError as e:
            trace.append({'parameter': c_rep, 'delta_delta0': None, 'error': e.message})
            return math.nan
        trace.append({'parameter': c_rep, 'delta_delta0': delta})
        return delta

    delta = evaluate(c0)
    if not math.isnan(delta) and case_tag(delta) == target:
        logger.info(f"Template already {target}: Delta delta_0 = {delta:.6f}")
        return CalibrationResult(pair=template, target=target, parameter=c0, delta_delta0=delta,
                                 delta_a=_scattering_difference(template, settings), plateau_energy=e_plat,
                                 iterations=0, trace=tuple(trace))

    lo, hi = bounds if bounds is not None else (c0 * DEFAULT_SPAN[0], c0 * DEFAULT_SPAN[1])
    if not (0 < lo < hi) or sweep_points < 2:
        raise CalibrationError(f"Degenerate calibration sweep [{lo}, {hi}]", trace,
                               {'target': target, 'bounds': [lo, hi]})
    goal = math.sin(band_centre(target)) ** 2

    def mismatch(c_rep):
        d = evaluate(c_rep)
        return math.sin(d) ** 2 - goal if not math.isnan(d) else math.nan

    params = np.geomspace(lo, hi, sweep_points)
    values = np.array([mismatch(p) for p in params])
    brackets = [i for i in range(sweep_points - 1)
                if np.isfinite(values[i]) and np.isfinite(values[i + 1]) and values[i] * values[i + 1] <= 0]
    if not brackets:
        raise CalibrationError(f"No {target} bracket for C_rep(b) in [{lo:.6g}, {hi:.6g}]", trace,
                               {'target': target, 'bounds': [lo, hi]})
    log_c0 = math.log(c0)
    best = min(brackets, key=lambda i: abs(0.5 * (math.log(params[i]) + math.log(params[i + 1])) - log_c0))
    a, b = params[best], params[best + 1]
    logger.info(f"Refining {target} calibration in C_rep(b) = [{a:.6g}, {b:.6g}]")
    if values[best] == 0:
        c_star = a
    elif values[best + 1] == 0:
        c_star = b
    else:
        def refine(c_rep):
            value = mismatch(c_rep)
            if math.isnan(value):
                raise ConvergenceError(f"Plateau phase failed at C_rep(b) = {c_rep:.6g} inside the bracket",
                                       {'bracket': [a, b], 'trace': list(trace)})
            return value

        try:
            c_star = brentq(refine, a, b, rtol=PARAMETER_RTOL, xtol=PARAMETER_RTOL * a)
        except (ValueError, RuntimeError) as e:
            raise ConvergenceError(f"Calibration root search failed in [{a:.6g}, {b:.6g}]: {e}",
                                   {'bracket': [a, b], 'trace': list(trace)}) from e

    pair = with_core(template, c_star)
    delta = plateau_delta0(pair, settings)
    if case_tag(delta) != target:
        raise CalibrationError(f"Calibrated pair landed in the {case_tag(delta)} band instead of {target}",
                               trace, {'parameter': c_star, 'delta_delta0': delta})
    logger.info(f"Calibrated {target}: C_rep(b) = {c_star:.12g}, Delta delta_0 = {delta:.6f}")
    return CalibrationResult(pair=pair, target=target, parameter=float(c_star), delta_delta0=delta,
                             delta_a=_scattering_difference(pair, settings), plateau_energy=e_plat,
                             iterations=len(trace) - 1, trace=tuple(trace))
