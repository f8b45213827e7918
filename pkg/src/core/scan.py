"""
Energy scans of a channel pair.

Every (ell, E) phase-difference task and every per-energy Delta A_0 task is
independent; they run on a process pool and are re-sorted by (E, ell)
before any reduction, so the worker count never changes the numbers.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from src.core.correction import CorrectionInputs, F_closed, f_locking, sigma_model
from src.core.errors import ExchangeError, InvalidInputError
from src.core.exchange import (TRUNCATION_MARGIN, DeltaEtaSeries, ExchangePoint, assemble_series, check_energy,
                               exchange_point, flag_resonances, partial_wave_range, solve_partial_wave)
from src.core.phase_amplitude import delta_A_envelope
from src.core.potentials import ChannelPair
from src.core.radial_solver import DEFAULT_SETTINGS, SolverSettings, count_bound_states
from src.core.scales import ScaleSet, derive_scales

logger = logging.getLogger(__name__)


@dataclass
class ExchangeScan:
    """Per-energy observables of one pair, sorted by increasing energy"""
    pair: ChannelPair
    scales: ScaleSet
    energies: np.ndarray
    points: list
    series: list
    delta_A0: np.ndarray
    F_model: np.ndarray
    f_lock: np.ndarray
    sigma_model: np.ndarray
    resonance: np.ndarray
    bound_counts: tuple = (0, 0)
    provenance: list = field(default_factory=list)

    @property
    def lambdas(self):
        return np.array([p.lambda_ for p in self.points])

    @property
    def delta_delta0(self):
        return np.array([p.delta_delta0 for p in self.points])

    def column(self, name):
        return np.array([getattr(p, name) for p in self.points])


def energy_grid(E_star, start_decade, decades, per_decade):
    """E* 10^(start + i/per_decade) for i = 0 .. decades*per_decade"""
    if per_decade < 4:
        raise InvalidInputError(f"At least 4 points per decade are required, got {per_decade}")
    if not decades > 0:
        raise InvalidInputError(f"Scan must cover a positive number of decades, got {decades}")
    n = int(round(decades * per_decade))
    return E_star * 10.0 ** (start_decade + np.arange(n + 1) / per_decade)


def default_jobs():
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, 'sched_getaffinity') else (os.cpu_count() or 1))


def _phase_task(args):
    pair, E, ell, settings, method = args
    return solve_partial_wave(pair, E, ell, settings, method)


def _delta_A_task(args):
    pair, E, settings = args
    try:
        return delta_A_envelope(pair, pair.mu, E, 0, settings).value, ''
    except ExchangeError as e:
        return math.nan, f"Delta A_0 unavailable at E={E:.6g}: {e.message}"


def _run(func, tasks, jobs):
    if jobs <= 1 or len(tasks) < 2:
        return [func(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, tasks, chunksize=chunk))


def compute_series(pair: ChannelPair, energies, settings: SolverSettings = DEFAULT_SETTINGS, jobs=1,
                   margin=TRUNCATION_MARGIN, method='matching', ell_max=None) -> list[DeltaEtaSeries]:
    """Delta eta series at every energy, distributed over (ell, E) tasks"""
    energies = np.sort(np.asarray(energies, dtype=float))
    ranges = []
    tasks = []
    for E in energies:
        check_energy(pair, E)
        L, top = partial_wave_range(pair, E, margin, ell_max)
        ranges.append((L, top))
        tasks.extend((pair, float(E), ell, settings, method) for ell in range(top + 1))
    logger.info(f"Solving {len(tasks)} partial-wave tasks at {energies.size} energies on {jobs} worker(s)")
    results = _run(_phase_task, tasks, jobs)

    out = []
    pos = 0
    for E, (L, top) in zip(energies, ranges):
        chunk = results[pos:pos + top + 1]
        pos += top + 1
        out.append(assemble_series(float(E), L, top, chunk, method))
    return out


def compute_scan(pair: ChannelPair, energies, settings: SolverSettings = DEFAULT_SETTINGS, jobs=1,
                 margin=TRUNCATION_MARGIN, method='matching', with_delta_A=True) -> ExchangeScan:
    """
    Full exchange scan: cross sections, F_exact, the model F and f, resonance flags.

    Args:
        pair: Channel pair with a tail
        energies: Collision energies (a.u.), any order
        settings: Solver tolerances, shared by every task
        jobs: Worker processes; 1 runs serially
        margin: Partial waves kept beyond ceil(L)
        method: 'matching' or 'milne' phase differences
        with_delta_A: Compute Delta A_0 (needed by the model F)

    Returns:
        ExchangeScan
    """
    if pair.tail is None:
        raise InvalidInputError("Exchange scans need a pair with a tail")
    energies = np.sort(np.asarray(energies, dtype=float))
    if energies.size == 0:
        raise InvalidInputError("Energy grid is empty")
    if np.any(np.diff(energies) <= 0):
        raise InvalidInputError("Energy grid contains duplicates")

    series = compute_series(pair, energies, settings, jobs, margin, method)
    points: list[ExchangePoint] = [exchange_point(pair, s) for s in series]
    provenance = [note for s in series for note in s.provenance]

    if with_delta_A:
        dA = _run(_delta_A_task, [(pair, float(E), settings) for E in energies], jobs)
        provenance.extend(note for _, note in dA if note)
        delta_A0 = np.array([v for v, _ in dA])
    else:
        delta_A0 = np.full(energies.size, math.nan)

    F_vals = np.empty(energies.size)
    f_vals = np.empty(energies.size)
    model = np.empty(energies.size)
    for i, (pt, dA0) in enumerate(zip(points, delta_A0)):
        f_vals[i] = f_locking(pt.delta_delta0)
        if math.isnan(dA0):
            F_vals[i] = math.nan
            model[i] = math.nan
            continue
        F_vals[i] = F_closed(CorrectionInputs(pt.delta_delta0, dA0, pt.lambda_))
        model[i] = sigma_model(pt.sigma0, F_vals[i], pt.sigma_L)

    flags = flag_resonances(series)
    counts = tuple(count_bound_states(ch, pair.mu, 0, settings).count for ch in pair.channels())
    logger.info(f"Scan done: {int(flags.sum())} resonance point(s), bound s-states {counts}")
    return ExchangeScan(pair=pair, scales=derive_scales(pair.tail, pair.mu), energies=energies, points=points,
                        series=series, delta_A0=delta_A0, F_model=F_vals, f_lock=f_vals, sigma_model=model,
                        resonance=flags, bound_counts=counts, provenance=provenance)
