"""
Resonant-exchange observables of a channel pair.

Phase differences Delta eta_ell = eta_ell^b - eta_ell^a are taken from
absolute phases computed on one lattice per (ell, E) task, so long-range
discretization errors cancel between the channels.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import median_filter

from src.core.errors import InvalidInputError, PhysicsDomainError
from src.core.phase_amplitude import milne_envelope, phase_integral
from src.core.potentials import ChannelPair
from src.core.radial_solver import DEFAULT_SETTINGS, count_bound_states, make_grid, pair_phase_shifts
from src.core.scales import cutoff_L, cutoff_lambda, langevin_sigma, partial_wave_cutoff

logger = logging.getLogger(__name__)

TRUNCATION_MARGIN = 5
# sin^2 Delta eta assumed for every partial wave dropped from the sum
DROPPED_TERM_BOUND = 1e-6
REMAINDER_TERMS = 10
CEILING_FRACTION = 0.2
WARNING_FRACTION = 0.01
RESOLVE_SHIFT = 1e-9
RESONANCE_FACTOR = 1e3
RESONANCE_WINDOW = 11
METHODS = ('matching', 'milne')


@dataclass(frozen=True)
class DeltaEtaSeries:
    """Phase differences for ell = 0 .. truncated_at at one energy"""
    energy: float
    entries: tuple
    cutoff_L: float
    truncated_at: int
    method: str = 'matching'
    provenance: tuple = field(default=())

    def delta_eta(self, ell):
        return self.entries[ell][1]

    def values(self):
        return np.array([e[1] for e in self.entries])


@dataclass(frozen=True)
class ExchangePoint:
    energy: float
    sigma0: float
    sigma_exc: float
    sigma_L: float
    lambda_: float
    f_exact: float
    delta_delta0: float
    delta_N0: int
    truncation_remainder: float = 0.0


@dataclass(frozen=True)
class LevinsonDecomposition:
    """
    Delta eta_0 = pi delta_N0 + delta_delta0 with delta_delta0 in (-pi/2, pi/2].

    bound_difference is N_0^b - N_0^a from the node counts; it equals
    delta_N0 once Delta delta_0 has settled into its folded branch.
    """
    delta_N0: int
    delta_delta0: float
    delta_eta0: float
    bound_difference: int
    ambiguous: bool = False


def fold_phase(delta_eta):
    """(n, delta) with delta_eta = n pi + delta and delta in (-pi/2, pi/2]"""
    n = math.ceil(delta_eta / math.pi - 0.5)
    return int(n), delta_eta - n * math.pi


def track_branch(values):
    """Unwrap a sequence of phases defined modulo pi"""
    return np.unwrap(np.asarray(values, dtype=float), period=math.pi)


def energy_ceiling(pair: ChannelPair):
    """Largest allowed collision energy, or None for pairs without a well"""
    try:
        return CEILING_FRACTION * pair.v_depth()
    except PhysicsDomainError:
        return None


def check_energy(pair: ChannelPair, E):
    if not E > 0:
        raise InvalidInputError(f"Collision energy must be positive, got {E}")
    ceiling = energy_ceiling(pair)
    if ceiling is None:
        return
    if E >= ceiling:
        raise PhysicsDomainError(
            f"E={E:.4g} a.u. is above the validity ceiling {ceiling:.4g} a.u. "
            f"({CEILING_FRACTION} of the shallower well depth)", {'energy': E, 'ceiling': ceiling})
    if E > WARNING_FRACTION / CEILING_FRACTION * ceiling:
        logger.warning(f"E={E:.4g} a.u. exceeds {WARNING_FRACTION} of the well depth")


def partial_wave_range(pair: ChannelPair, E, margin=TRUNCATION_MARGIN, ell_max=None):
    """(L, truncated_at) for the partial-wave sum at E"""
    if pair.tail is None:
        if ell_max is None:
            raise InvalidInputError("Pairs without a tail need an explicit ell_max")
        return float(ell_max), int(ell_max) + margin
    lam = cutoff_lambda(pair.tail, pair.mu, E)
    return float(cutoff_L(lam)), partial_wave_cutoff(lam) + margin


def _difference(pair, E, ell, settings, method):
    if method == 'matching':
        rec_a, rec_b = pair_phase_shifts(pair, E, ell, settings)
        return rec_b.eta - rec_a.eta, rec_a.ill_conditioned or rec_b.ill_conditioned
    grid = make_grid(pair.channels(), pair.mu, E, ell, settings)
    etas = [phase_integral(milne_envelope(ch, pair.mu, E, ell, grid, settings)) for ch in pair.channels()]
    return etas[1] - etas[0], False


def solve_partial_wave(pair: ChannelPair, E, ell, settings=DEFAULT_SETTINGS, method='matching'):
    """
    One (ell, E) task: (ell, Delta eta, note).

    An ill-conditioned match is re-solved at E (1 + RESOLVE_SHIFT) and the
    note records it.
    """
    if method not in METHODS:
        raise InvalidInputError(f"Unknown phase method {method!r}")
    deta, ill = _difference(pair, E, ell, settings, method)
    note = ''
    if ill:
        shifted = E * (1.0 + RESOLVE_SHIFT)
        logger.info(f"Ill-conditioned match at ell={ell}, E={E:.6g}; re-solving at {shifted:.9g}")
        deta, _ = _difference(pair, shifted, ell, settings, method)
        note = f"ell={ell} re-solved at E*(1+{RESOLVE_SHIFT:g})"
    return ell, deta, note


def assemble_series(E, L, truncated_at, results, method='matching') -> DeltaEtaSeries:
    """Series from task results in any order"""
    ordered = sorted(results, key=lambda t: t[0])
    if [t[0] for t in ordered] != list(range(truncated_at + 1)):
        raise InvalidInputError("Partial-wave results are incomplete", {'truncated_at': truncated_at})
    entries = tuple((ell, float(d), math.sin(d) ** 2) for ell, d, _ in ordered)
    notes = tuple(n for _, _, n in ordered if n)
    for ell, _, s2 in entries:
        if ell > math.ceil(L) and s2 >= DROPPED_TERM_BOUND:
            logger.warning(f"sin^2 Delta eta_{ell} = {s2:.2e} above the truncation bound at E={E:.4g}")
    return DeltaEtaSeries(energy=E, entries=entries, cutoff_L=L, truncated_at=truncated_at,
                          method=method, provenance=notes)


def delta_eta_series(pair: ChannelPair, mu, E, settings=DEFAULT_SETTINGS, margin=TRUNCATION_MARGIN,
                     method='matching', ell_max=None) -> DeltaEtaSeries:
    """
    Phase differences for ell = 0 .. ceil(L) + margin.

    Args:
        pair: Channel pair
        mu: Reduced mass (a.u.), must match the pair
        E: Collision energy (a.u.)
        settings: Solver tolerances
        margin: Partial waves kept beyond ceil(L)
        method: 'matching' or 'milne'
        ell_max: Stand-in for L on pairs without a tail

    Returns:
        DeltaEtaSeries
    """
    if not math.isclose(mu, pair.mu, rel_tol=1e-12):
        raise InvalidInputError("Reduced mass differs from the one of the pair")
    check_energy(pair, E)
    L, top = partial_wave_range(pair, E, margin, ell_max)
    results = [solve_partial_wave(pair, E, ell, settings, method) for ell in range(top + 1)]
    return assemble_series(E, L, top, results, method)


def truncation_remainder(k, truncated_at, terms=REMAINDER_TERMS):
    """Bound (pi/k^2) sum (2 ell + 1) 1e-6 over the next partial waves"""
    ells = np.arange(truncated_at + 1, truncated_at + 1 + terms)
    return math.pi / k ** 2 * float(np.sum(2 * ells + 1)) * DROPPED_TERM_BOUND


def exchange_cross_section(series: DeltaEtaSeries, k):
    """
    (sigma_exc, sigma0) from the truncated partial-wave sum.

    sigma0 = (pi/k^2) sin^2 Delta eta_0 and sigma_exc adds (2 ell + 1)
    sin^2 Delta eta_ell for ell = 1 .. truncated_at.
    """
    if not k > 0:
        raise InvalidInputError(f"Wavenumber must be positive, got {k}")
    if len(series.entries) != series.truncated_at + 1:
        raise InvalidInputError("Delta eta series is incomplete")
    pref = math.pi / k ** 2
    sigma0 = pref * series.entries[0][2]
    rest = math.fsum((2 * ell + 1) * s2 for ell, _, s2 in series.entries[1:])
    return sigma0 + pref * rest, sigma0


def exact_correction(pt: ExchangePoint) -> float:
    """F_exact = (sigma_exc - sigma0)/sigma_L, unclamped"""
    if not pt.energy > 0:
        raise InvalidInputError(f"Collision energy must be positive, got {pt.energy}")
    if not pt.sigma_L > 0:
        raise InvalidInputError("Langevin cross section must be positive")
    return (pt.sigma_exc - pt.sigma0) / pt.sigma_L


def levinson_decompose(pair: ChannelPair, mu, E, settings=DEFAULT_SETTINGS, delta_eta0=None) -> LevinsonDecomposition:
    """Fold Delta eta_0 into pi delta_N0 + delta_delta0 and report the bound-state difference"""
    if delta_eta0 is None:
        check_energy(pair, E)
        _, delta_eta0, _ = solve_partial_wave(pair, E, 0, settings)
    n, delta = fold_phase(delta_eta0)
    counts = [count_bound_states(ch, mu, 0, settings) for ch in pair.channels()]
    ambiguous = any(c.ambiguous for c in counts)
    if ambiguous:
        logger.warning(f"Bound-state counts are ambiguous: {[c.candidates for c in counts]}")
    return LevinsonDecomposition(delta_N0=n, delta_delta0=delta, delta_eta0=delta_eta0,
                                 bound_difference=counts[1].count - counts[0].count, ambiguous=ambiguous)


def exchange_point(pair: ChannelPair, series: DeltaEtaSeries) -> ExchangePoint:
    """Cross sections and F_exact at the energy of series"""
    E = series.energy
    k = math.sqrt(2.0 * pair.mu * E)
    sigma_exc, sigma0 = exchange_cross_section(series, k)
    if pair.tail is None:
        raise InvalidInputError("The Langevin cross section needs a tail")
    sigma_L = langevin_sigma(pair.tail, pair.mu, E)
    n, delta = fold_phase(series.delta_eta(0))
    pt = ExchangePoint(energy=E, sigma0=sigma0, sigma_exc=sigma_exc, sigma_L=sigma_L,
                       lambda_=cutoff_lambda(pair.tail, pair.mu, E), f_exact=0.0, delta_delta0=delta,
                       delta_N0=n, truncation_remainder=truncation_remainder(k, series.truncated_at))
    return replace(pt, f_exact=exact_correction(pt))


def flag_resonances(series_list, factor=RESONANCE_FACTOR):
    """
    Energies where some Delta eta_ell with ell <= L changes abnormally fast.

    The rate |d Delta eta_ell / d ln E| of each partial wave is compared with
    its running median over RESONANCE_WINDOW intervals; both ends of an
    offending interval are flagged.
    """
    n = len(series_list)
    flags = np.zeros(n, dtype=bool)
    if n < 3:
        return flags
    energies = np.array([s.energy for s in series_list])
    if np.any(np.diff(energies) <= 0):
        raise InvalidInputError("Series must be sorted by increasing energy")
    log_e = np.log(energies)
    top = min(s.truncated_at for s in series_list)
    for ell in range(top + 1):
        phases = track_branch([s.delta_eta(ell) for s in series_list])
        rate = np.abs(np.diff(phases) / np.diff(log_e))
        local = median_filter(rate, size=RESONANCE_WINDOW, mode='nearest')
        inside = np.array([ell <= math.ceil(s.cutoff_L) for s in series_list])
        hot = (rate > factor * local) & inside[:-1] & inside[1:]
        flags[:-1] |= hot
        flags[1:] |= hot
    return flags


def wigner_cross_section(delta_a):
    """Zero-energy limit pi (a_a - a_b)^2"""
    return math.pi * delta_a ** 2
