"""
Data export.

One CSV (or JSON) file per quantity family plus a metadata JSON file.
Floats are written with 17 significant digits so reruns diff exactly.
"""

import csv
import datetime
import json
import logging
import math
import os

from src.core.errors import ExchangeError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = '1.0'
UNITS = 'atomic units (hbar = m_e = e = 1); energies in hartree, cross sections in bohr^2'

PHASE_COLUMNS = ('E_au', 'ell', 'delta_eta_rad', 'sin2_delta_eta', 'config_hash')
CROSS_SECTION_COLUMNS = ('E_au', 'sigma0_au2', 'sigma_exc_au2', 'sigma_L_au2', 'Lambda',
                         'truncated_at', 'truncation_remainder_au2', 'resonance_flag', 'config_hash')
CORRECTION_COLUMNS = ('E_au', 'Lambda', 'F_exact', 'F_model', 'f_lock', 'delta_delta0_rad', 'delta_N0',
                      'deltaA0', 'regime', 'case_tag', 'resonance_flag', 'config_hash')
COMPARE_COLUMNS = ('E_au', 'sigma0_au2', 'sigma_exc_au2', 'sigma_L_au2', 'Lambda', 'F_exact', 'F_model',
                   'f_lock', 'delta_delta0_rad', 'deltaA0', 'regime', 'case_tag', 'resonance_flag',
                   'sigma_model_au2', 'config_hash')
SCALES_COLUMNS = ('quantity', 'value')
TRACE_COLUMNS = ('parameter', 'delta_delta0_rad')

FAMILIES = {
    'phase_shifts': PHASE_COLUMNS,
    'cross_sections': CROSS_SECTION_COLUMNS,
    'correction': CORRECTION_COLUMNS,
    'compare': COMPARE_COLUMNS,
    'scales': SCALES_COLUMNS,
    'calibration_trace': TRACE_COLUMNS,
}


def format_value(value):
    if value is None:
        return ''
    if isinstance(value, bool):
        return '1' if value else '0'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return 'nan'
        return format(value, '.17g')
    if hasattr(value, 'item'):
        return format_value(value.item())
    return str(value)


def _ensure_dir(directory):
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as e:
        logger.error(f"Error creating output directory {directory}: {e}")
        raise ExchangeError(f"Cannot create output directory {directory}: {e}")


def write_table(directory, family, rows, fmt='csv'):
    """
    Write rows (dicts) of a family with its pinned column order.

    Returns:
        Path of the written file
    """
    columns = FAMILIES[family]
    _ensure_dir(directory)
    path = os.path.join(directory, f"{family}.{fmt}")
    try:
        with open(path, 'w', newline='') as f:
            if fmt == 'csv':
                writer = csv.writer(f, lineterminator='\n')
                writer.writerow(columns)
                for row in rows:
                    writer.writerow([format_value(row.get(c)) for c in columns])
            else:
                body = [{c: format_value(row.get(c)) for c in columns} for row in rows]
                json.dump({'schema_version': SCHEMA_VERSION, 'columns': list(columns), 'rows': body},
                          f, indent=4, sort_keys=True)
                f.write('\n')
    except OSError as e:
        logger.error(f"Error writing {path}: {e}")
        raise ExchangeError(f"Cannot write {path}: {e}")
    logger.info(f"Wrote {len(rows)} row(s) to {path}")
    return path


def write_metadata(directory, metadata):
    """metadata.json with schema version, units and a UTC timestamp added"""
    _ensure_dir(directory)
    path = os.path.join(directory, 'metadata.json')
    data = dict(metadata)
    data.setdefault('schema_version', SCHEMA_VERSION)
    data.setdefault('units', UNITS)
    data['timestamp'] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    try:
        with open(path, 'w') as f:
            json.dump(_plain(data), f, indent=4, sort_keys=True)
            f.write('\n')
    except OSError as e:
        logger.error(f"Error writing {path}: {e}")
        raise ExchangeError(f"Cannot write {path}: {e}")
    return path


def _plain(value):
    """JSON-safe copy; non-finite floats become strings"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, 'item'):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value
