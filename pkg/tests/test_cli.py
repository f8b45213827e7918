import csv
import json

import numpy as np
import pytest

from src.cli import runner
from src.cli.config import OUTPUT_ENV, load_config, parse_config
from src.cli.export import (COMPARE_COLUMNS, CORRECTION_COLUMNS, CROSS_SECTION_COLUMNS, PHASE_COLUMNS, format_value,
                            write_table)
from src.cli.runner import main
from src.core.errors import ConfigError

BASE = """
[system]
n = 4
C_n = 1.0
mu = 0.5

[channel_a]
r_min = 0.08

[channel_b]
r_min = {r_min_b}

[energy]
start_decade = -1
decades = 1
points_per_decade = 4
"""


def _config(r_min_b=0.09, extra=''):
    return BASE.format(r_min_b=r_min_b) + extra


def _write(tmp_path, text, name='run.ini'):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_defaults():
    cfg = parse_config(_config())
    assert cfg.system.n == 4 and cfg.system.mu == 0.5
    assert cfg.scan.method == 'matching' and cfg.scan.criterion == 'gap' and cfg.scan.margin == 5
    assert cfg.tolerances.steps_per_wavelength == 70.0
    assert cfg.output.format == 'csv'
    assert cfg.calibration.target is None
    assert cfg.energies().size == 5
    pair = cfg.pair()
    assert pair.va.characteristic_radius() == pytest.approx(0.08)
    assert pair.vb.characteristic_radius() == pytest.approx(0.09)


def test_masses_and_extra_terms():
    text = _config().replace('mu = 0.5', 'mass_a = 174.0\nmass_b = 174.0\nextra = 6:2.5, 8:1.0')
    cfg = parse_config(text)
    assert cfg.system.mu > 0
    assert cfg.system.extra == ((6, 2.5), (8, 1.0))
    assert cfg.tail().extra == ((6, 2.5), (8, 1.0))


def test_output_directory_from_environment(monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, '/tmp/rexch-env')
    assert parse_config(_config()).output.directory == '/tmp/rexch-env'
    assert parse_config(_config(extra='[output]\ndirectory = here\n')).output.directory == 'here'


@pytest.mark.parametrize("text", [
    "[channel_a]\nr_min = 0.08\n",
    _config().replace('n = 4', 'n = four'),
    _config().replace('mu = 0.5', ''),
    _config().replace('r_min = 0.08', 'r_min = 0.08\nc_rep = 1.0'),
    _config(extra='[scan]\nmethod = wkb\n'),
    _config(extra='[scan]\ncriterion = slope\n'),
    _config(extra='[scan]\nmargin = -1\n'),
    _config().replace('points_per_decade = 4', 'points_per_decade = 3'),
    _config(extra='[output]\nformat = xml\n'),
    _config(extra='[calibration]\ntarget = strong\n'),
    _config(extra='[tolerances]\nsteps_per_wavelength = 5\n'),
    _config(extra='[tolerances]\ntail_correction = maybe\n'),
    _config().replace('r_min = 0.09', 'type = tabulated\nfile = curve.dat'),
    _config().replace('r_min = 0.09', 'type = spline'),
    "[system\n",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.exit_code == 2


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / 'absent.ini'))


def test_config_hash_is_stable():
    cfg = parse_config(_config())
    noisy = "# a comment\n" + _config().replace('n = 4', 'n   =   4   ; tail power') + "\n\n"
    assert parse_config(noisy).config_hash() == cfg.config_hash()
    moved = parse_config(_config(extra='[output]\ndirectory = elsewhere\nformat = json\n'))
    assert moved.config_hash() == cfg.config_hash()
    assert parse_config(_config(r_min_b=0.1)).config_hash() != cfg.config_hash()
    assert len(cfg.config_hash()) == 64


def test_pinned_columns():
    assert PHASE_COLUMNS == ('E_au', 'ell', 'delta_eta_rad', 'sin2_delta_eta', 'config_hash')
    assert COMPARE_COLUMNS == ('E_au', 'sigma0_au2', 'sigma_exc_au2', 'sigma_L_au2', 'Lambda', 'F_exact',
                               'F_model', 'f_lock', 'delta_delta0_rad', 'deltaA0', 'regime', 'case_tag',
                               'resonance_flag', 'sigma_model_au2', 'config_hash')


def test_format_value():
    assert format_value(0.1) == '0.10000000000000001'
    assert format_value(0.0) == '0'
    assert format_value(float('nan')) == 'nan'
    assert format_value(True) == '1'
    assert format_value(None) == ''
    assert format_value(3) == '3'
    assert format_value(np.float64(2.5)) == '2.5'
    assert format_value('locking') == 'locking'


def test_write_table_formats(tmp_path):
    rows = [{'E_au': 1.0, 'ell': 0, 'delta_eta_rad': 0.25, 'sin2_delta_eta': 0.0625, 'config_hash': 'abc'}]
    path = write_table(str(tmp_path), 'phase_shifts', rows)
    with open(path) as f:
        lines = f.read().splitlines()
    assert lines[0] == ','.join(PHASE_COLUMNS)
    assert lines[1] == '1,0,0.25,0.0625,abc'
    path = write_table(str(tmp_path), 'phase_shifts', rows, 'json')
    with open(path) as f:
        data = json.load(f)
    assert data['columns'] == list(PHASE_COLUMNS)
    assert data['rows'][0]['delta_eta_rad'] == '0.25'


def test_bad_config_exit_code(tmp_path, capsys):
    path = _write(tmp_path, _config().replace('mu = 0.5', ''))
    assert main(['scales', '--config', path, '--out', str(tmp_path / 'out')]) == 2
    err = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
    record = json.loads(err[-1])
    assert record['error'] == 'ConfigError'
    assert record['exit_code'] == 2


def test_calibrate_needs_target(tmp_path, capsys):
    path = _write(tmp_path, _config())
    assert main(['calibrate', '--config', path, '--out', str(tmp_path / 'out')]) == 2


def test_scales_run(tmp_path):
    out = tmp_path / 'out'
    path = _write(tmp_path, _config())
    assert main(['scales', '--config', path, '--out', str(out), '--jobs', '1']) == 0
    with open(out / 'scales.csv') as f:
        rows = {r['quantity']: float(r['value']) for r in csv.DictReader(f)}
    assert rows['R_star_au'] == pytest.approx(1.0)
    assert rows['E_star_au'] == pytest.approx(1.0)
    assert rows['g_n'] == pytest.approx(2.0)
    metadata = json.loads((out / 'metadata.json').read_text())
    assert metadata['config_hash'] == load_config(path).config_hash()
    assert metadata['mode'] == 'scales'


def test_identical_channels_cross_section_run(tmp_path):
    out = tmp_path / 'out'
    path = _write(tmp_path, _config(r_min_b=0.08))
    assert main(['cross-section', '--config', path, '--out', str(out), '--jobs', '1']) == 0
    with open(out / 'cross_sections.csv') as f:
        reader = csv.DictReader(f)
        assert tuple(reader.fieldnames) == CROSS_SECTION_COLUMNS
        rows = list(reader)
    assert len(rows) == 5
    assert all(r['sigma_exc_au2'] == '0' and r['sigma0_au2'] == '0' for r in rows)
    assert all(r['resonance_flag'] == '0' for r in rows)
    metadata = json.loads((out / 'metadata.json').read_text())
    assert metadata['bound_counts'][0] == metadata['bound_counts'][1]
    assert 'regime' not in metadata


def test_rerun_is_byte_identical(tmp_path):
    path = _write(tmp_path, _config(r_min_b=0.08))
    bodies = []
    for name in ('first', 'second'):
        assert main(['phase-shifts', '--config', path, '--out', str(tmp_path / name), '--jobs', '1']) == 0
        bodies.append((tmp_path / name / 'phase_shifts.csv').read_bytes())
    assert bodies[0] == bodies[1]


def test_degenerate_calibration_exit_code(tmp_path, capsys):
    extra = '[calibration]\ntarget = enhanced\nlow = 2.0\nhigh = 1.0\n'
    path = _write(tmp_path, _config(r_min_b=0.08, extra=extra))
    assert main(['calibrate', '--config', path, '--out', str(tmp_path / 'out')]) == 5
    err = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
    record = json.loads(err[-1])
    assert record['error'] == 'CalibrationError'
    assert len(record['diagnostics']['trace']) == 1


@pytest.mark.parametrize("mode, family, columns", [('compare', 'compare', COMPARE_COLUMNS),
                                                   ('correction', 'correction', CORRECTION_COLUMNS)])
def test_model_scan_run(tmp_path, mode, family, columns):
    out = tmp_path / 'out'
    path = _write(tmp_path, _config())
    assert main([mode, '--config', path, '--out', str(out), '--jobs', '1']) == 0
    with open(out / f'{family}.csv') as f:
        reader = csv.DictReader(f)
        assert tuple(reader.fieldnames) == columns
        rows = list(reader)
    assert len(rows) == 5
    for r in rows:
        assert r['regime'] in ('Wigner', 'locking', 'unlocking')
        assert r['case_tag'] in ('suppressed', 'average', 'enhanced')
        assert np.isfinite(float(r['F_exact'])) and np.isfinite(float(r['deltaA0']))
    metadata = json.loads((out / 'metadata.json').read_text())
    assert metadata['mode'] == mode
    assert metadata['config_hash'] == load_config(path).config_hash()
    assert metadata['regime']['case_tag'] == rows[0]['case_tag']


def test_numerical_failures_exit_as_convergence_errors(tmp_path, capsys, monkeypatch):
    def broken(*args):
        raise ValueError("f(a) and f(b) must have different signs")

    monkeypatch.setattr(runner, 'run_scales', broken)
    path = _write(tmp_path, _config())
    assert main(['scales', '--config', path, '--out', str(tmp_path / 'out')]) == 4
    err = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
    record = json.loads(err[-1])
    assert record['error'] == 'ConvergenceError'
    assert record['diagnostics']['type'] == 'ValueError'


@pytest.mark.slow
def test_default_scan_is_independent_of_jobs(tmp_path):
    # the default energy grid: six decades from 1e-3 E*
    text = BASE.format(r_min_b=0.09).split('[energy]')[0]
    path = _write(tmp_path, text)
    bodies = []
    for jobs in ('1', '2'):
        out = tmp_path / f'jobs{jobs}'
        assert main(['compare', '--config', path, '--out', str(out), '--jobs', jobs]) == 0
        bodies.append((out / 'compare.csv').read_bytes())
    assert bodies[0] == bodies[1]
    assert len(bodies[0].splitlines()) == 62
