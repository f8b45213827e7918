"""
Single-channel radial Schroedinger integration.

u'' = q(r) u with q = 2 mu (V - E) + lam/r^2 is integrated outward by a
fixed-step Numerov recurrence on a lattice r_i = origin + i h shared by
every channel of a task. Phase shifts come from matching to Riccati-Bessel
functions at two asymptotic points; the absolute branch is fixed by the
node count of the regular solution.

Constants
---------
MIN_STEPS_PER_WAVELENGTH : int
    Coarsest lattice accepted anywhere in the allowed region.
NUMEROV_STABILITY : float
    Largest h^2 q at which a forbidden-region start is accepted.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from src.core import jit
from src.core.errors import ConvergenceError, InvalidInputError, PhysicsDomainError
from src.core.potentials import ChannelPotential
from src.core.riccati import free_phase, riccati_functions
from src.core.scales import derive_scales

logger = logging.getLogger(__name__)

MIN_STEPS_PER_WAVELENGTH = 20
NUMEROV_STABILITY = 3.0
ILL_CONDITIONED = 1e-10


@dataclass(frozen=True)
class SolverSettings:
    """
    Tolerances and lattice policy of the radial solver.

    Attributes
    ----------
    steps_per_wavelength : float
        Lattice points per local de Broglie wavelength at the deepest point.
    match_tolerance : float
        |V(r_max)|/E at the matching radius.
    born_tolerance : float
        Largest first-order tail phase left beyond r_max when the tail
        correction is off.
    decay_depth : float
        Integral of kappa between a forbidden-region start and the first
        allowed point.
    tail_correction : bool
        Add the first-order phase of the tail beyond r_max to every phase.
    max_points : int
        Hard cap on lattice points per solve.
    """
    steps_per_wavelength: float = 70.0
    match_tolerance: float = 1e-8
    born_tolerance: float = 1e-7
    decay_depth: float = 15.0
    tail_correction: bool = False
    max_points: int = 20_000_000

    def __post_init__(self):
        if self.steps_per_wavelength < MIN_STEPS_PER_WAVELENGTH:
            raise InvalidInputError(
                f"At least {MIN_STEPS_PER_WAVELENGTH} steps per wavelength are required, "
                f"got {self.steps_per_wavelength}")
        for name in ('match_tolerance', 'born_tolerance', 'decay_depth'):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")
        if self.max_points < 100:
            raise InvalidInputError("max_points must be at least 100")


DEFAULT_SETTINGS = SolverSettings()


@dataclass(frozen=True)
class RadialGrid:
    """Uniform lattice r_i = origin + i * base_step, i = 1 .. n_points - 1"""
    r_min: float
    r_max: float
    base_step: float
    steps_per_wavelength: float
    origin: float = 0.0

    def __post_init__(self):
        if not (self.base_step > 0 and 0 <= self.origin < self.r_min < self.r_max):
            raise InvalidInputError("Invalid radial grid",
                                    {'r_min': self.r_min, 'r_max': self.r_max, 'step': self.base_step})

    @property
    def n_points(self):
        return int(round((self.r_max - self.origin) / self.base_step)) + 1

    def radius(self, index):
        return self.origin + index * self.base_step

    def radii(self, start=0, stop=None):
        stop = self.n_points if stop is None else stop
        return self.origin + self.base_step * np.arange(start, stop, dtype=float)


@dataclass
class RadialSolution:
    """Samples u(r_i) of the regular solution from lattice index start_index on"""
    r: np.ndarray
    u: np.ndarray
    q: np.ndarray
    nodes: int
    start_index: int
    ell: int
    energy: float
    channel: str
    rescales: int = 0
    mark: int = -1
    nodes_at_mark: int = 0


@dataclass(frozen=True)
class PhaseShiftRecord:
    """
    Phase shift of one channel and partial wave.

    eta is absolute (not reduced modulo pi); eta_mod_pi lies in [0, pi).
    """
    ell: int
    energy: float
    eta: float
    eta_mod_pi: float
    nodes: int
    method: str = 'matching'
    channel: str = 'a'
    ill_conditioned: bool = False
    tail_phase: float = 0.0


@dataclass(frozen=True)
class BoundStateCount:
    count: int
    ambiguous: bool = False
    candidates: tuple = ()
    r_max: float = 0.0


@dataclass(frozen=True)
class ScatteringLength:
    value: float
    error: float
    uncertain: bool = False
    k_values: tuple = field(default=())


@dataclass(frozen=True)
class MatchResult:
    eta_mod_pi: float
    eta: float
    numerator: float
    denominator: float
    ill_conditioned: bool
    nodes_ref: int


def effective_q(ch: ChannelPotential, mu, E, lam, r):
    """q(r) = 2 mu (V(r) - E) + lam / r^2"""
    r = np.asarray(r, dtype=float)
    with np.errstate(over='ignore'):
        return 2.0 * mu * (ch.value(r) - E) + lam / (r * r)


def _max_wavenumber(ch: ChannelPotential, mu, E):
    """Largest local wavenumber sqrt(2 mu (E - V)) on a log sample"""
    r_c = ch.characteristic_radius()
    r = np.geomspace(r_c * 1e-2, r_c * 1e2, 8001)
    r = r[r > ch.hard_core]
    with np.errstate(over='ignore', invalid='ignore'):
        kin = 2.0 * mu * (E - ch.value(r))
    kin = kin[np.isfinite(kin)]
    return math.sqrt(max(float(kin.max()) if kin.size else 0.0, 2.0 * mu * E))


def _log_root(func, lo, hi):
    """Root of func(log r) bracketed in [lo, hi], widening hi as needed"""
    x_lo, x_hi = math.log(lo), math.log(hi)
    try:
        for _ in range(60):
            if func(x_hi) < 0:
                break
            x_hi += math.log(10.0)
        else:
            raise ConvergenceError("Could not bracket the matching radius", {'lo': lo})
        if func(x_lo) <= 0:
            return lo
        return math.exp(brentq(func, x_lo, x_hi, xtol=1e-12))
    except (ValueError, RuntimeError) as e:
        raise ConvergenceError(f"Root search for the matching radius failed: {e}",
                               {'lo': lo, 'hi': math.exp(x_hi)}) from e


def tail_radius(ch: ChannelPotential, E, match_tolerance):
    """Radius beyond which |V|/E stays below match_tolerance"""
    if ch.tail is None:
        return ch.support_radius()
    lo = max(ch.support_radius(), ch.characteristic_radius())
    target = math.log(match_tolerance * E)

    def excess(x):
        return math.log(abs(float(ch.tail.value(math.exp(x))))) - target

    return _log_root(excess, lo, 10.0 * lo)


def born_tail_phase(ch: ChannelPotential, mu, k, r_max):
    """First-order phase of the attractive tail beyond r_max"""
    if ch.tail is None:
        return 0.0
    return sum(mu * c / ((m - 1.0) * k * r_max ** (m - 1)) for m, c in ch.tail.terms())


def born_radius(ch: ChannelPotential, mu, k, tolerance):
    """Radius beyond which the first-order tail phase is below tolerance"""
    if ch.tail is None:
        return 0.0
    lo = max(ch.support_radius(), ch.characteristic_radius())

    def excess(x):
        return math.log(born_tail_phase(ch, mu, k, math.exp(x))) - math.log(tolerance)

    return _log_root(excess, lo, 10.0 * lo)


def matching_radius(channels: Sequence[ChannelPotential], mu, E, ell, settings=DEFAULT_SETTINGS):
    """
    Outer end of the lattice.

    The largest of: the tail-tolerance radius, the first-order tail radius
    (unless the tail correction is on), a quarter wavelength plus margin
    beyond the potential support, and a wavelength beyond the centrifugal
    turning point.
    """
    k = math.sqrt(2.0 * mu * E)
    lam = ell * (ell + 1.0)
    r_max = (math.sqrt(lam) + math.pi) / k
    for ch in channels:
        r_max = max(r_max, tail_radius(ch, E, settings.match_tolerance),
                    ch.support_radius() + 1.5 * math.pi / (2.0 * k))
        if not settings.tail_correction:
            r_max = max(r_max, born_radius(ch, mu, k, settings.born_tolerance))
    return r_max


def _lattice_step(channels, mu, E, settings):
    k_max = max(_max_wavenumber(ch, mu, E) for ch in channels)
    if k_max == 0.0:
        r_scale = max(ch.characteristic_radius() for ch in channels)
        h = r_scale / (4.0 * settings.steps_per_wavelength)
    else:
        h = 2.0 * math.pi / (k_max * settings.steps_per_wavelength)
        # at least spw/(2 pi) points per characteristic radius
        r_small = min(ch.characteristic_radius() for ch in channels)
        h = min(h, 2.0 * math.pi * r_small / settings.steps_per_wavelength)
    breaks = [b for ch in channels for b in ch.breakpoints()]
    if breaks:
        b = breaks[0]
        if len(set(breaks)) > 1:
            logger.warning(f"Channels jump at different radii; the lattice is aligned to r = {b}")
        h = b / math.ceil(b / h)
    return h


def _lattice_origin(channels):
    cores = {ch.hard_core for ch in channels}
    if len(cores) > 1:
        raise InvalidInputError("Channels with different hard cores cannot share a lattice")
    return cores.pop()


def start_index(ch: ChannelPotential, mu, E, ell, grid: RadialGrid, settings=DEFAULT_SETTINGS, lam=None):
    """
    Lattice index where outward integration of ch begins.

    Hard walls start on the wall, regular potentials at m h with
    m >= max(1, sqrt(lam/3)), singular cores at max(r_decay, r_stab).
    r_decay is measured inward from the first allowed point, which is the
    outer turning point when the barrier hides the whole well.
    """
    h = grid.base_step
    lam = ell * (ell + 1.0) if lam is None else float(lam)
    if ch.hard_core > 0:
        return 0
    if not ch.singular:
        return max(1, int(math.ceil(math.sqrt(lam / 3.0))))

    r = np.geomspace(ch.characteristic_radius() * 1e-2, grid.r_max, 20001)
    q = effective_q(ch, mu, E, lam, r)
    allowed = np.nonzero(q < 0)[0]
    if allowed.size == 0:
        raise PhysicsDomainError(f"No classically allowed region for channel {ch.label}, ell={ell}")
    i_turn = allowed[0]
    kappa = np.sqrt(np.clip(q[:i_turn + 1], 0.0, None))
    depth = cumulative_trapezoid(kappa[::-1], -r[:i_turn + 1][::-1], initial=0.0)[::-1]
    deep = np.nonzero(depth >= settings.decay_depth)[0]
    if deep.size == 0:
        raise PhysicsDomainError(f"Core of channel {ch.label} is too soft to start the integration")
    r_decay = r[deep[-1]]

    stable = np.nonzero(h * h * q[:i_turn + 1] <= NUMEROV_STABILITY)[0]
    r_stab = r[stable[0]] if stable.size else r[i_turn]
    if r_stab > r_decay:
        logger.debug(f"Channel {ch.label}, ell={ell}: start moved out to r={r_stab:.4g} for Numerov stability")
    r_start = max(r_decay, r_stab)
    i0 = max(int(math.ceil((r_start - grid.origin) / h)), 1)

    r0 = grid.radius(i0)
    if not float(effective_q(ch, mu, E, lam, r0)) > 0:
        raise PhysicsDomainError(
            f"Lattice too coarse to start channel {ch.label} in the forbidden region",
            {'r_start': r0, 'step': h, 'ell': ell})
    return i0


def make_grid(channels: Sequence[ChannelPotential], mu, E, ell, settings=DEFAULT_SETTINGS) -> RadialGrid:
    """
    Lattice shared by every channel of one (ell, E) task.

    Args:
        channels: Channels integrated on this lattice
        mu: Reduced mass (a.u.)
        E: Collision energy (a.u.), positive
        ell: Partial wave
        settings: Solver tolerances

    Returns:
        RadialGrid resolving the deepest well with settings.steps_per_wavelength
    """
    if not E > 0:
        raise InvalidInputError(f"Collision energy must be positive, got {E}")
    if not mu > 0:
        raise InvalidInputError(f"Reduced mass must be positive, got {mu}")
    h = _lattice_step(channels, mu, E, settings)
    origin = _lattice_origin(channels)
    r_max = matching_radius(channels, mu, E, ell, settings)
    n = int(math.ceil((r_max - origin) / h))
    if n + 1 > settings.max_points:
        raise PhysicsDomainError(
            f"Matching radius {r_max:.4g} a.u. needs {n + 1} lattice points; "
            f"enable tail_correction or relax match_tolerance",
            {'r_max': r_max, 'points': n + 1, 'max_points': settings.max_points})
    rough = RadialGrid(r_min=origin + h, r_max=origin + n * h, base_step=h,
                       steps_per_wavelength=settings.steps_per_wavelength, origin=origin)
    first = min(start_index(ch, mu, E, ell, rough, settings) for ch in channels)
    return RadialGrid(r_min=max(rough.radius(first), origin + h), r_max=rough.r_max, base_step=h,
                      steps_per_wavelength=settings.steps_per_wavelength, origin=origin)


def step_nodes(ch: ChannelPotential, r, h):
    """Lattice indices of r sitting on a step of V"""
    hits = [np.nonzero(np.abs(r - b) <= 1e-9 * h)[0] for b in ch.breakpoints()]
    return np.concatenate(hits).astype(int) if hits else np.zeros(0, dtype=int)


def jump_profile(ch: ChannelPotential, mu, r, h):
    """q(r_i+) - q(r_i-) on the lattice, zero away from steps of V"""
    dq = np.zeros_like(r)
    eps = 1e-6 * h
    for i in step_nodes(ch, r, h):
        dq[i] = 2.0 * mu * float(ch.value(np.array([r[i] + eps]))[0] - ch.value(np.array([r[i] - eps]))[0])
    return dq


def _seed(ch, mu, E, lam, r0, r1, q0, q1):
    """Two starting samples of the regular solution"""
    if ch.hard_core > 0:
        return 0.0, 1.0
    if not ch.singular:
        # r^(nu + 1/2) with nu = sqrt(lam + 1/4)
        power = math.sqrt(lam + 0.25) + 0.5
        c = 2.0 * mu * (ch.value_at_origin() - E) / (2.0 * (2.0 * power + 1.0))
        return 1.0, (r1 / r0) ** power * (1.0 + c * r1 * r1) / (1.0 + c * r0 * r0)
    # WKB solution growing outward
    h = r1 - r0
    return 1.0, (q0 / q1) ** 0.25 * math.exp(0.5 * h * (math.sqrt(q0) + math.sqrt(q1)))


def _integrate(ch, mu, E, ell, grid, settings, mark=None, lam=None) -> RadialSolution:
    lam = ell * (ell + 1.0) if lam is None else float(lam)
    i0 = start_index(ch, mu, E, ell, grid, settings, lam=lam)
    r = grid.radii(i0)
    if r.size < 4:
        raise InvalidInputError("Radial grid holds fewer than four points")
    q = effective_q(ch, mu, E, lam, r)
    h = grid.base_step
    q_min = float(q.min())
    if q_min < 0 and h * math.sqrt(-q_min) > 2.0 * math.pi / MIN_STEPS_PER_WAVELENGTH:
        raise InvalidInputError(
            f"Radial step {h:.3e} a.u. gives fewer than {MIN_STEPS_PER_WAVELENGTH} steps per wavelength",
            {'step': h, 'k_local': math.sqrt(-q_min)})
    u0, u1 = _seed(ch, mu, E, lam, r[0], r[1], q[0], q[1])
    u = np.empty_like(r)
    mark = r.size - 1 if mark is None else mark
    nodes_mark, nodes, rescales = jit.numerov_sweep(q, jump_profile(ch, mu, r, h), h, u0, u1, mark, u)
    if not np.all(np.isfinite(u)):
        raise ConvergenceError(f"Radial solution overflowed for channel {ch.label}, ell={ell}",
                               {'energy': E, 'rescales': int(rescales)})
    return RadialSolution(r=r, u=u, q=q, nodes=int(nodes), start_index=i0, ell=ell, energy=E,
                          channel=ch.label, rescales=int(rescales), mark=int(mark),
                          nodes_at_mark=int(nodes_mark))


def integrate_radial(ch: ChannelPotential, mu, E, ell, grid: RadialGrid = None,
                     settings=DEFAULT_SETTINGS, lam=None) -> RadialSolution:
    """
    Regular solution on the lattice and its exact node count.

    lam overrides ell(ell+1) with a continuous centrifugal strength.
    Raises InvalidInputError when the lattice has fewer than
    MIN_STEPS_PER_WAVELENGTH points per local wavelength.
    """
    if not E > 0:
        raise InvalidInputError(f"Collision energy must be positive, got {E}")
    if grid is None:
        grid = make_grid([ch], mu, E, ell, settings)
    return _integrate(ch, mu, E, ell, grid, settings, lam=lam)


def matching_indices(size, k, h):
    """Last lattice index and the one a quarter wavelength inward"""
    i2 = size - 1
    return i2 - max(1, int(round(math.pi / (2.0 * k * h)))), i2


def match(sol: RadialSolution, k, settings=DEFAULT_SETTINGS, grid: RadialGrid = None) -> MatchResult:
    """Match the last lattice point and the one a quarter wavelength inward"""
    h = sol.r[1] - sol.r[0] if grid is None else grid.base_step
    i1, i2 = matching_indices(sol.r.size, k, h)
    if i1 < 1:
        raise PhysicsDomainError("Lattice too short for two matching points")
    if sol.q[i1] > 0 or sol.q[i2] > 0:
        raise PhysicsDomainError(
            f"Matching points lie in the classically forbidden region (ell={sol.ell})",
            {'r1': float(sol.r[i1]), 'r2': float(sol.r[i2])})

    f1 = riccati_functions(sol.ell, k * sol.r[i1])
    f2 = riccati_functions(sol.ell, k * sol.r[i2])
    u1, u2 = sol.u[i1], sol.u[i2]
    num = u2 * f1.j - u1 * f2.j
    den = u2 * f1.n - u1 * f2.n
    scale = max(abs(u1), abs(u2)) * max(math.hypot(f1.j, f1.n), math.hypot(f2.j, f2.n))
    ill = math.hypot(num, den) < ILL_CONDITIONED * scale
    eta_mod = math.atan2(num, den) % math.pi
    if eta_mod >= math.pi:
        eta_mod = 0.0

    # branch: the Milne phase phi(kr) + eta at the larger sample lies in (N pi, (N+1) pi)
    if abs(u1) >= abs(u2):
        i_ref = i1
        nodes_ref = sol.nodes_at_mark if sol.mark == i1 else _nodes_before(sol.u, i1)
    else:
        i_ref, nodes_ref = i2, sol.nodes
    phi = free_phase(sol.ell, k * sol.r[i_ref])
    m = nodes_ref - math.floor((phi + eta_mod) / math.pi)
    return MatchResult(eta_mod_pi=eta_mod, eta=eta_mod + m * math.pi, numerator=num,
                       denominator=den, ill_conditioned=ill, nodes_ref=nodes_ref)


def _solve_for_match(ch, mu, E, ell, grid, settings):
    k = math.sqrt(2.0 * mu * E)
    i0 = start_index(ch, mu, E, ell, grid, settings)
    n_local = grid.n_points - i0
    mark, _ = matching_indices(n_local, k, grid.base_step)
    sol = _integrate(ch, mu, E, ell, grid, settings, mark=mark)
    return sol, match(sol, k, settings, grid)


def phase_shift(ch: ChannelPotential, mu, E, ell, grid: RadialGrid = None,
                settings=DEFAULT_SETTINGS) -> PhaseShiftRecord:
    """
    Absolute phase shift by asymptotic matching.

    Args:
        ch: Channel potential
        mu: Reduced mass (a.u.)
        E: Collision energy (a.u.)
        ell: Partial wave
        grid: Shared lattice; built for this channel alone when omitted
        settings: Solver tolerances

    Returns:
        PhaseShiftRecord with method 'matching'
    """
    if not E > 0:
        raise InvalidInputError(f"Collision energy must be positive, got {E}")
    if grid is None:
        grid = make_grid([ch], mu, E, ell, settings)
    sol, res = _solve_for_match(ch, mu, E, ell, grid, settings)
    tail = 0.0
    if settings.tail_correction:
        tail = born_tail_phase(ch, mu, math.sqrt(2.0 * mu * E), grid.r_max)
    eta = res.eta + tail
    return PhaseShiftRecord(ell=ell, energy=E, eta=eta, eta_mod_pi=eta % math.pi, nodes=sol.nodes,
                            method='matching', channel=ch.label, ill_conditioned=res.ill_conditioned,
                            tail_phase=tail)


def phase_shift_mod_pi(ch: ChannelPotential, mu, E, ell, grid: RadialGrid = None,
                       settings=DEFAULT_SETTINGS) -> float:
    """Phase shift folded into [0, pi)"""
    return phase_shift(ch, mu, E, ell, grid, settings).eta_mod_pi


def _node_extrapolation(u, r, h, i, ell):
    """One more node beyond r_i if the growing r^(ell+1) part has opposite sign to u"""
    du = (-u[i + 2] + 8.0 * u[i + 1] - 8.0 * u[i - 1] + u[i - 2]) / (12.0 * h)
    growing = (ell * u[i] / r[i] + du) / ((2 * ell + 1) * r[i] ** ell)
    return 1 if growing * u[i] < 0 else 0


def _nodes_before(u, i):
    s = np.sign(u[:i + 1])
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def count_bound_states(ch: ChannelPotential, mu, ell=0, settings=DEFAULT_SETTINGS) -> BoundStateCount:
    """
    Number of bound states from the nodes of the zero-energy solution.

    The count at r_max is compared with the count at r_max/2; a mismatch
    signals a marginal zero-energy state and is reported as ambiguous.
    """
    if not mu > 0:
        raise InvalidInputError(f"Reduced mass must be positive, got {mu}")
    lam = ell * (ell + 1.0)
    h = _lattice_step([ch], mu, 0.0, settings)
    origin = ch.hard_core
    if ch.tail is not None:
        r_star = derive_scales(ch.tail, mu).R_star
        r_max = max(50.0 * r_star, 20.0 * ch.characteristic_radius())
    else:
        r_max = 2.0 * max(ch.support_radius(), ch.characteristic_radius())
    n = int(math.ceil((r_max - origin) / h))
    if n + 1 > settings.max_points:
        raise PhysicsDomainError("Zero-energy lattice exceeds max_points", {'points': n + 1})
    grid = RadialGrid(r_min=origin + h, r_max=origin + n * h, base_step=h,
                      steps_per_wavelength=settings.steps_per_wavelength, origin=origin)

    i0 = 0 if ch.hard_core > 0 else (max(1, int(math.ceil(math.sqrt(lam / 3.0)))) if not ch.singular
                                     else _zero_energy_start(ch, mu, lam, grid, settings))
    r = grid.radii(i0)
    q = effective_q(ch, mu, 0.0, lam, r)
    u0, u1 = _seed(ch, mu, 0.0, lam, r[0], r[1], q[0], q[1])
    u = np.empty_like(r)
    half = r.size // 2
    jit.numerov_sweep(q, jump_profile(ch, mu, r, h), h, u0, u1, half, u)
    if not np.all(np.isfinite(u)):
        raise ConvergenceError(f"Zero-energy solution overflowed for channel {ch.label}")

    i_full = r.size - 3
    full = _nodes_before(u, i_full) + _node_extrapolation(u, r, h, i_full, ell)
    half_count = _nodes_before(u, half) + _node_extrapolation(u, r, h, half, ell)
    if half_count != full:
        logger.warning(f"Bound-state count of channel {ch.label} (ell={ell}) is ambiguous: "
                       f"{half_count} at r={r[half]:.4g}, {full} at r={r[i_full]:.4g}")
        return BoundStateCount(count=full, ambiguous=True, candidates=(half_count, full), r_max=float(r[-1]))
    return BoundStateCount(count=full, candidates=(full,), r_max=float(r[-1]))


def _zero_energy_start(ch, mu, lam, grid, settings):
    """Forbidden-region start for E = 0 by the same decay and stability rules"""
    h = grid.base_step
    r = np.geomspace(ch.characteristic_radius() * 1e-2, grid.r_max, 20001)
    q = effective_q(ch, mu, 0.0, lam, r)
    allowed = np.nonzero(q < 0)[0]
    if allowed.size == 0:
        return max(1, int(math.ceil(ch.characteristic_radius() / h)))
    i_turn = allowed[0]
    kappa = np.sqrt(np.clip(q[:i_turn + 1], 0.0, None))
    depth = cumulative_trapezoid(kappa[::-1], -r[:i_turn + 1][::-1], initial=0.0)[::-1]
    deep = np.nonzero(depth >= settings.decay_depth)[0]
    stable = np.nonzero(h * h * q[:i_turn + 1] <= NUMEROV_STABILITY)[0]
    r_decay = r[deep[-1]] if deep.size else r[0]
    r_stab = r[stable[0]] if stable.size else r[i_turn]
    return max(1, int(math.ceil((max(r_decay, r_stab) - grid.origin) / h)))


def scattering_length(ch: ChannelPotential, mu, settings=DEFAULT_SETTINGS) -> ScatteringLength:
    """
    a from -tan(delta_0)/k at k0, k0/2, k0/4 with two Richardson stages.

    The first stage removes the term linear in k, the second the k^2 term.
    """
    if ch.tail is not None:
        if ch.tail.n <= 3:
            raise PhysicsDomainError(f"Scattering length is undefined for n={ch.tail.n} tails")
        length = derive_scales(ch.tail, mu).R_star
    else:
        length = max(ch.support_radius(), ch.characteristic_radius())
    k0 = 1e-2 / length
    ks = (k0, k0 / 2.0, k0 / 4.0)
    t = []
    for k in ks:
        E = k * k / (2.0 * mu)
        eta = phase_shift_mod_pi(ch, mu, E, 0, settings=settings)
        t.append(-math.tan(eta) / k)
    r1 = [2.0 * t[1] - t[0], 2.0 * t[2] - t[1]]
    r2 = (4.0 * r1[1] - r1[0]) / 3.0
    err = abs(r2 - r1[1])
    uncertain = err > 1e-3 * max(abs(r2), length)
    if uncertain:
        logger.warning(f"Scattering length of channel {ch.label} uncertain: a = {r2:.6g} +- {err:.2g}")
    return ScatteringLength(value=r2, error=err, uncertain=uncertain, k_values=ks)


def pair_phase_shifts(pair, E, ell, settings=DEFAULT_SETTINGS):
    """Phase shifts of both channels of a pair on one shared lattice"""
    grid = make_grid(pair.channels(), pair.mu, E, ell, settings)
    return tuple(phase_shift(ch, pair.mu, E, ell, grid, settings) for ch in pair.channels())
