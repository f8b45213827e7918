"""
Run configuration.

A run is described by one INI file with the sections [system],
[channel_a], [channel_b], [energy], [tolerances], [scan], [calibration]
and [output]. Missing keys fall back to the defaults below.
"""

import configparser
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field

from src.core.errors import ConfigError, ExchangeError
from src.core.potentials import CoreSpec, ChannelPair, core_for_minimum, load_tabulated, make_pair
from src.core.radial_solver import SolverSettings
from src.core.scales import TailSpec, derive_scales, reduced_mass
from src.core.scan import energy_grid

logger = logging.getLogger(__name__)

MODES = ('scales', 'phase-shifts', 'cross-section', 'correction', 'compare', 'calibrate')
FORMATS = ('csv', 'json')
OUTPUT_ENV = 'REXCH_OUTPUT_DIR'
DEFAULT_OUTPUT_DIR = 'rexch_output'

DEFAULT_MODE = 'compare'
DEFAULT_START_DECADE = -3.0
DEFAULT_DECADES = 6.0
DEFAULT_POINTS_PER_DECADE = 10
DEFAULT_MARGIN = 5
DEFAULT_METHOD = 'matching'
DEFAULT_CRITERION = 'gap'
DEFAULT_SWEEP_POINTS = 33


@dataclass(frozen=True)
class SystemConfig:
    n: int
    C_n: float
    mu: float
    extra: tuple = ()


@dataclass(frozen=True)
class ChannelConfig:
    """Either a model core (c_rep or r_min) or a tabulated curve"""
    kind: str = 'model'
    c_rep: float = None
    r_min: float = None
    power: int = 12
    file: str = None
    splice_radius: float = None


@dataclass(frozen=True)
class EnergyConfig:
    """Log grid in units of E*: 10^start_decade .. 10^(start_decade + decades)"""
    start_decade: float = DEFAULT_START_DECADE
    decades: float = DEFAULT_DECADES
    points_per_decade: int = DEFAULT_POINTS_PER_DECADE


@dataclass(frozen=True)
class ScanConfig:
    mode: str = DEFAULT_MODE
    margin: int = DEFAULT_MARGIN
    method: str = DEFAULT_METHOD
    criterion: str = DEFAULT_CRITERION


@dataclass(frozen=True)
class CalibrationConfig:
    target: str = None
    low: float = None
    high: float = None
    sweep_points: int = DEFAULT_SWEEP_POINTS


@dataclass(frozen=True)
class OutputConfig:
    directory: str = DEFAULT_OUTPUT_DIR
    format: str = 'csv'


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig
    channel_a: ChannelConfig
    channel_b: ChannelConfig
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    tolerances: SolverSettings = field(default_factory=SolverSettings)
    scan: ScanConfig = field(default_factory=ScanConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def tail(self):
        return TailSpec(self.system.n, self.system.C_n, self.system.extra)

    def pair(self) -> ChannelPair:
        tail = self.tail()
        return make_pair(_channel(self.channel_a, tail, 'a'), _channel(self.channel_b, tail, 'b'),
                         tail, self.system.mu)

    def energies(self):
        e_star = derive_scales(self.tail(), self.system.mu).E_star
        return energy_grid(e_star, self.energy.start_decade, self.energy.decades, self.energy.points_per_decade)

    def to_dict(self):
        """Physics content of the run; output placement is left out"""
        data = asdict(self)
        del data['output']
        return data

    def config_hash(self):
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _channel(cfg: ChannelConfig, tail, label):
    if cfg.kind == 'tabulated':
        return load_tabulated(cfg.file, tail, cfg.splice_radius, label=label)
    c_rep = cfg.c_rep if cfg.c_rep is not None else core_for_minimum(tail, cfg.r_min, cfg.power)
    return CoreSpec(c_rep, cfg.power)


def _get(parser, section, key, conv, default=None):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    if raw == '':
        return default
    try:
        return conv(raw)
    except ValueError as e:
        raise ConfigError(f"Invalid value for [{section}] {key}: {raw!r} ({e})", {'section': section, 'key': key})


def _bool(raw):
    value = raw.lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError("expected a boolean")


def _terms(raw):
    """'6:2.5, 8:1.0' -> ((6, 2.5), (8, 1.0))"""
    out = []
    for item in raw.split(','):
        power, coef = item.split(':')
        out.append((int(power), float(coef)))
    return tuple(out)


def _system(parser):
    if not parser.has_section('system'):
        raise ConfigError("Missing [system] section")
    n = _get(parser, 'system', 'n', int)
    C_n = _get(parser, 'system', 'c_n', float)
    if n is None or C_n is None:
        raise ConfigError("[system] needs n and C_n")
    mu = _get(parser, 'system', 'mu', float)
    if mu is None:
        m_a = _get(parser, 'system', 'mass_a', float)
        m_b = _get(parser, 'system', 'mass_b', float)
        if m_a is None or m_b is None:
            raise ConfigError("[system] needs mu or both mass_a and mass_b (amu)")
        mu = reduced_mass(m_a, m_b)
    return SystemConfig(n=n, C_n=C_n, mu=mu, extra=_get(parser, 'system', 'extra', _terms, ()))


def _channel_section(parser, section):
    if not parser.has_section(section):
        raise ConfigError(f"Missing [{section}] section")
    kind = _get(parser, section, 'type', str, 'model')
    cfg = ChannelConfig(kind=kind, c_rep=_get(parser, section, 'c_rep', float),
                        r_min=_get(parser, section, 'r_min', float), power=_get(parser, section, 'power', int, 12),
                        file=_get(parser, section, 'file', str),
                        splice_radius=_get(parser, section, 'splice_radius', float))
    if kind == 'model':
        if (cfg.c_rep is None) == (cfg.r_min is None):
            raise ConfigError(f"[{section}] needs exactly one of c_rep or r_min")
    elif kind == 'tabulated':
        if cfg.file is None or cfg.splice_radius is None:
            raise ConfigError(f"[{section}] tabulated channels need file and splice_radius")
    else:
        raise ConfigError(f"[{section}] unknown channel type {kind!r}")
    return cfg


def _tolerances(parser):
    s = 'tolerances'
    defaults = SolverSettings()
    kwargs = {
        'steps_per_wavelength': _get(parser, s, 'steps_per_wavelength', float, defaults.steps_per_wavelength),
        'match_tolerance': _get(parser, s, 'match_tolerance', float, defaults.match_tolerance),
        'born_tolerance': _get(parser, s, 'born_tolerance', float, defaults.born_tolerance),
        'decay_depth': _get(parser, s, 'decay_depth', float, defaults.decay_depth),
        'tail_correction': _get(parser, s, 'tail_correction', _bool, defaults.tail_correction),
        'max_points': int(_get(parser, s, 'max_points', float, defaults.max_points)),
    }
    try:
        return SolverSettings(**kwargs)
    except ExchangeError as e:
        raise ConfigError(f"Invalid [tolerances]: {e.message}", kwargs)


def parse_config(text, source='<string>') -> RunConfig:
    """Parse INI text into a validated RunConfig"""
    parser = configparser.ConfigParser(inline_comment_prefixes=('#', ';'))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"Error parsing {source}: {e}")

    try:
        system = _system(parser)
    except ConfigError:
        raise
    except ExchangeError as e:
        raise ConfigError(f"Invalid [system]: {e.message}")

    energy = EnergyConfig(
        start_decade=_get(parser, 'energy', 'start_decade', float, DEFAULT_START_DECADE),
        decades=_get(parser, 'energy', 'decades', float, DEFAULT_DECADES),
        points_per_decade=_get(parser, 'energy', 'points_per_decade', int, DEFAULT_POINTS_PER_DECADE))
    if energy.points_per_decade < 4:
        raise ConfigError(f"points_per_decade must be at least 4, got {energy.points_per_decade}")
    if not energy.decades > 0:
        raise ConfigError(f"decades must be positive, got {energy.decades}")

    scan = ScanConfig(mode=_get(parser, 'scan', 'mode', str, DEFAULT_MODE),
                      margin=_get(parser, 'scan', 'margin', int, DEFAULT_MARGIN),
                      method=_get(parser, 'scan', 'method', str, DEFAULT_METHOD),
                      criterion=_get(parser, 'scan', 'criterion', str, DEFAULT_CRITERION))
    if scan.mode not in MODES:
        raise ConfigError(f"Unknown scan mode {scan.mode!r}; expected one of {', '.join(MODES)}")
    if scan.method not in ('matching', 'milne'):
        raise ConfigError(f"Unknown phase method {scan.method!r}")
    if scan.criterion not in ('gap', 'phase'):
        raise ConfigError(f"Unknown unlocking criterion {scan.criterion!r}")
    if scan.margin < 0:
        raise ConfigError("margin must be non-negative")

    calibration = CalibrationConfig(target=_get(parser, 'calibration', 'target', str),
                                    low=_get(parser, 'calibration', 'low', float),
                                    high=_get(parser, 'calibration', 'high', float),
                                    sweep_points=_get(parser, 'calibration', 'sweep_points', int,
                                                      DEFAULT_SWEEP_POINTS))
    if calibration.target is not None and calibration.target not in ('suppressed', 'average', 'enhanced'):
        raise ConfigError(f"Unknown calibration target {calibration.target!r}")

    output = OutputConfig(
        directory=_get(parser, 'output', 'directory', str, os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT_DIR)),
        format=_get(parser, 'output', 'format', str, 'csv'))
    if output.format not in FORMATS:
        raise ConfigError(f"Unknown output format {output.format!r}")

    return RunConfig(system=system, channel_a=_channel_section(parser, 'channel_a'),
                     channel_b=_channel_section(parser, 'channel_b'), energy=energy,
                     tolerances=_tolerances(parser), scan=scan, calibration=calibration, output=output)


def load_config(path) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, 'r') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"Error reading config file {path}: {e}")
    logger.info(f"Loaded run configuration from {path}")
    return parse_config(text, source=path)
