"""Command line front end: one subcommand per scan mode"""

import argparse
import json
import logging
import os
import sys

from src import __version__
from src.cli.config import FORMATS, MODES, RunConfig, load_config
from src.cli.export import write_metadata, write_table
from src.core import jit
from src.core.calibration import calibrate_case, plateau_delta0
from src.core.correction import classify, regime_at
from src.core.errors import ConfigError, ConvergenceError, ExchangeError
from src.core.phase_amplitude import log_envelope_form
from src.core.scales import (derive_scales, energy_from_lambda, g_factor, langevin_sigma, table_coefficients)
from src.core.scan import compute_scan, compute_series, default_jobs

logger = logging.getLogger(__name__)

LOG_ENV = 'REXCH_LOG_LEVEL'
# Lambda of the cutoff reported by the scales subcommand
REFERENCE_LAMBDA = 625.0


def setup_logging():
    level = os.environ.get(LOG_ENV, 'INFO').upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s', stream=sys.stderr)


def build_parser():
    parser = argparse.ArgumentParser(prog='rexch', description="Resonant-exchange scattering toolkit")
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest='mode', required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument('--config', required=True, help="INI run configuration")
        p.add_argument('--out', help="Output directory (overrides [output] directory)")
        p.add_argument('--jobs', type=int, default=0, help="Worker processes, 0 for all available")
        p.add_argument('--format', choices=FORMATS, help="Output format (overrides [output] format)")
    return parser


def _metadata(cfg: RunConfig, mode, jobs, **extra):
    data = {
        'config_hash': cfg.config_hash(),
        'config': cfg.to_dict(),
        'mode': mode,
        'version': __version__,
        'kernels': jit.describe(),
        'jobs': jobs,
    }
    data.update(extra)
    return data


def run_scales(cfg: RunConfig, out, fmt, jobs):
    tail = cfg.tail()
    mu = cfg.system.mu
    scales = derive_scales(tail, mu)
    e_ref = energy_from_lambda(tail, mu, REFERENCE_LAMBDA)
    rows = [
        {'quantity': 'R_star_au', 'value': scales.R_star},
        {'quantity': 'E_star_au', 'value': scales.E_star},
        {'quantity': 'k_star_au', 'value': scales.k_star},
        {'quantity': 'g_n', 'value': g_factor(tail.n)},
        {'quantity': 'E_Lambda625_au', 'value': e_ref},
        {'quantity': 'E_Lambda625_over_E_star', 'value': e_ref / scales.E_star},
        {'quantity': 'sigma_L_at_E_star_au2', 'value': langevin_sigma(tail, mu, scales.E_star)},
    ]
    table = table_coefficients(tail, scales.E_star)
    if table is not None:
        rows.append({'quantity': 'sigma_L_closed_form_at_E_star_au2', 'value': table})
    write_table(out, 'scales', rows, fmt)
    write_metadata(out, _metadata(cfg, 'scales', jobs))


def run_phase_shifts(cfg: RunConfig, out, fmt, jobs):
    pair = cfg.pair()
    h = cfg.config_hash()
    series = compute_series(pair, cfg.energies(), cfg.tolerances, jobs, cfg.scan.margin, cfg.scan.method)
    rows = [{'E_au': s.energy, 'ell': ell, 'delta_eta_rad': d, 'sin2_delta_eta': s2, 'config_hash': h}
            for s in series for ell, d, s2 in s.entries]
    write_table(out, 'phase_shifts', rows, fmt)
    write_metadata(out, _metadata(cfg, 'phase-shifts', jobs,
                                  provenance=[n for s in series for n in s.provenance]))


def _scan_rows(cfg: RunConfig, scan, label):
    h = cfg.config_hash()
    rows = []
    for i, pt in enumerate(scan.points):
        rows.append({
            'E_au': pt.energy, 'sigma0_au2': pt.sigma0, 'sigma_exc_au2': pt.sigma_exc, 'sigma_L_au2': pt.sigma_L,
            'Lambda': pt.lambda_, 'truncated_at': scan.series[i].truncated_at,
            'truncation_remainder_au2': pt.truncation_remainder, 'F_exact': pt.f_exact,
            'F_model': float(scan.F_model[i]), 'f_lock': float(scan.f_lock[i]),
            'delta_delta0_rad': pt.delta_delta0, 'delta_N0': pt.delta_N0, 'deltaA0': float(scan.delta_A0[i]),
            'regime': regime_at(pt.energy, label) if label else '', 'case_tag': label.case_tag if label else '',
            'resonance_flag': bool(scan.resonance[i]), 'sigma_model_au2': float(scan.sigma_model[i]),
            'config_hash': h,
        })
    return rows


def run_scan(cfg: RunConfig, out, fmt, jobs, mode):
    """cross-section, correction and compare modes"""
    pair = cfg.pair()
    scan = compute_scan(pair, cfg.energies(), cfg.tolerances, jobs, cfg.scan.margin, cfg.scan.method,
                        with_delta_A=mode != 'cross-section')
    label = None
    if mode != 'cross-section':
        label = classify(plateau_delta0(pair, cfg.tolerances), scan, cfg.scan.criterion)
    rows = _scan_rows(cfg, scan, label)
    family = {'cross-section': 'cross_sections', 'correction': 'correction', 'compare': 'compare'}[mode]
    write_table(out, family, rows, fmt)
    extra = {'bound_counts': list(scan.bound_counts), 'provenance': scan.provenance,
             'scales': {'R_star': scan.scales.R_star, 'E_star': scan.scales.E_star},
             'boundary_R': pair.boundary_R, 'resonance_points': int(scan.resonance.sum())}
    if label is not None:
        extra['regime'] = {'case_tag': label.case_tag, 'E_wigner': label.boundaries[0],
                           'E_unlock': label.boundaries[1], 'plateau_delta0': label.plateau_delta0,
                           'criterion': label.criterion, 'low_confidence': label.low_confidence,
                           'drift': label.drift}
    write_metadata(out, _metadata(cfg, mode, jobs, **extra))


def run_calibrate(cfg: RunConfig, out, fmt, jobs):
    cal = cfg.calibration
    if cal.target is None:
        raise ConfigError("The calibrate mode needs [calibration] target")
    bounds = (cal.low, cal.high) if cal.low is not None and cal.high is not None else None
    result = calibrate_case(cfg.pair(), cal.target, cfg.tolerances, bounds, cal.sweep_points)
    trace = [{'parameter': t['parameter'], 'delta_delta0_rad': t.get('delta_delta0')} for t in result.trace]
    write_table(out, 'calibration_trace', trace, fmt)
    write_metadata(out, _metadata(cfg, 'calibrate', jobs, calibration={
        'target': result.target, 'parameter': result.parameter, 'delta_delta0': result.delta_delta0,
        'delta_a': result.delta_a, 'plateau_energy': result.plateau_energy,
        'iterations': result.iterations, 'boundary_R': result.pair.boundary_R}))
    logger.info(f"C_rep(b) = {result.parameter:.17g} gives Delta delta_0 = {result.delta_delta0:.6f} rad")


def report_error(e: ExchangeError):
    logger.error(f"{type(e).__name__}: {e.message}")
    sys.stderr.write(json.dumps(e.to_dict(), sort_keys=True, default=str) + '\n')
    sys.stderr.flush()
    return e.exit_code


def main(argv=None):
    """Entry point; returns the process exit code"""
    args = build_parser().parse_args(argv)
    setup_logging()
    jit.log_backend()
    log_envelope_form()
    try:
        cfg = load_config(args.config)
        out = args.out or cfg.output.directory
        fmt = args.format or cfg.output.format
        jobs = args.jobs if args.jobs and args.jobs > 0 else default_jobs()
        logger.info(f"Running {args.mode} (config {cfg.config_hash()[:12]}) into {out}")
        if args.mode == 'scales':
            run_scales(cfg, out, fmt, jobs)
        elif args.mode == 'phase-shifts':
            run_phase_shifts(cfg, out, fmt, jobs)
        elif args.mode == 'calibrate':
            run_calibrate(cfg, out, fmt, jobs)
        else:
            run_scan(cfg, out, fmt, jobs, args.mode)
    except ExchangeError as e:
        return report_error(e)
    except (ArithmeticError, ValueError, RuntimeError) as e:
        logger.debug("Numerical failure", exc_info=True)
        return report_error(ConvergenceError(f"Numerical failure: {e}", {'type': type(e).__name__}))
    return 0
