"""
Phase-amplitude (Milne) representation of the radial problem.

The envelope rho solves rho''' - 4 U rho' - c U' rho = 0 with
U = 2 mu (V - E) + lam/r^2 and rho -> 1 at r_max. With c = 2 (the product
form) rho = k (f^2 + g^2)/W for the regular solution f and its irregular
partner g, both normalized like the free Riccati-Bessel functions, and the
absolute phase shift is

    eta = ell pi/2 + integral_0^inf (k/rho - k) dr.

The default envelope is built from f and g directly and carries the
running angle theta = atan2(f, g), whose derivative is k/rho. The inward
RK4 sweep of the third-order equation is kept for the printed coefficient
and the unit start. The same machinery gives the inner/outer split of eta
at the barrier top and the curvature coefficient A_ell of eta in
lam = ell(ell+1).
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d

from src.core import jit
from src.core.errors import ConvergenceError, InvalidInputError, PhysicsDomainError
from src.core.potentials import ChannelPair, ChannelPotential
from src.core.radial_solver import (DEFAULT_SETTINGS, RadialGrid, born_tail_phase, effective_q, integrate_radial,
                                    jump_profile, make_grid, matching_indices, pair_phase_shifts, step_nodes)
from src.core.riccati import (free_envelope, free_envelope_continuous, free_phase, riccati_continuous,
                              riccati_functions)
from src.core.scales import BarrierGeometry, cutoff_lambda, partial_wave_cutoff

logger = logging.getLogger(__name__)

# k/rho below which the innermost forbidden region is cut off
RHO_FLOOR = 1e-12
# largest h^2 U accepted by the inward RK4 sweep in the forbidden region
ENVELOPE_STABILITY = 1.0
# phase advance per cell above which a dip of rho is treated analytically
DIP_RESOLUTION = 0.1
PHASE_TAIL_TOLERANCE = 1e-6
RIPPLE_TOLERANCE = 1e-6
MAX_RIPPLE_PUSHES = 8
FIT_RESIDUAL_LIMIT = 0.05
MAX_FIT_ELL = 8
MIN_FIT_POINTS = 4
# lam step of the one-sided derivative at lam = 0
LAMBDA_STEP = 1e-3
IRREGULAR_CAP = 1e150
# f/g below -ANGLE_NOISE at the first kept point means f is about to cross zero
ANGLE_NOISE = 1e-8
ENVELOPE_FORMS = {'product': 2.0, 'printed': 1.0}


@dataclass
class EnvelopeSolution:
    """
    Envelope samples on the lattice from start_index to r_max.

    Attributes
    ----------
    r, rho, drho, d2rho : np.ndarray
        Radii and rho with its first two derivatives.
    U : np.ndarray
        2 mu (V - E) + lam/r^2 at r.
    inner_remainder : float
        Integral of W/rho over [0, r[0]].
    tail_phase : float
        First-order phase of the potential tail beyond r_max.
    theta : np.ndarray or None
        Running angle atan2(f, g), continuous from theta(0) = 0; only set
        when the envelope comes from the solutions.
    wronskian : float
        W in the phase rate W/rho; k unless the start was not normalized.
    """
    r: np.ndarray
    rho: np.ndarray
    drho: np.ndarray
    d2rho: np.ndarray
    U: np.ndarray
    channel: str
    ell: int
    energy: float
    k: float
    lam: float
    start_index: int
    base_step: float
    inner_remainder: float = 0.0
    tail_phase: float = 0.0
    tail_correction: bool = False
    form: str = 'product'
    theta: np.ndarray = None
    wronskian: float = None

    def __post_init__(self):
        if self.wronskian is None:
            self.wronskian = self.k

    def ermakov_invariant(self):
        """2 rho rho'' - rho'^2 - 4 U rho^2, equal to 4 W^2 for the product form"""
        return 2.0 * self.rho * self.d2rho - self.drho ** 2 - 4.0 * self.U * self.rho ** 2


@dataclass(frozen=True)
class PhaseSplit:
    n_inner: int
    eta_out: float
    split_radius: float


@dataclass(frozen=True)
class CurvatureCoefficient:
    """Slope Delta A of the phase difference in lam, with provenance"""
    value: float
    energy: float
    ell_range: tuple
    method: str
    nonlinear: bool = False
    residual: float = 0.0
    intercept: float = float('nan')


def describe_envelope():
    """Short description of the default envelope construction"""
    return "product form from the matched regular and irregular solutions"


def log_envelope_form():
    logger.info(f"Phase-amplitude envelopes: {describe_envelope()}; "
                f"inward RK4 for the printed form and the unit start")


def _u_arrays(ch: ChannelPotential, mu, E, lam, r):
    """U and U' at r"""
    with np.errstate(over='ignore'):
        u = effective_q(ch, mu, E, lam, r)
        du = 2.0 * mu * ch.derivative(r) - 2.0 * lam / r ** 3
    return u, du


def _one_sided(ch, mu, E, lam, r, h):
    """Left and right limits of U, U' at lattice points (distinct only on jumps)"""
    u, du = _u_arrays(ch, mu, E, lam, r)
    u_lo, u_hi = u.copy(), u.copy()
    eps = 1e-6 * h
    for i in step_nodes(ch, r, h):
        u_lo[i] = float(_u_arrays(ch, mu, E, lam, np.array([r[i] - eps]))[0][0])
        u_hi[i] = float(_u_arrays(ch, mu, E, lam, np.array([r[i] + eps]))[0][0])
    return u, u_lo, du, u_hi, du.copy()


def _free_values(ell, lam, x):
    return riccati_functions(ell, x) if lam is None else riccati_continuous(lam, x)


def _numerov_derivative(u, q, h, steps):
    """u' to O(h^4) from the recurrence; second order at the ends and on steps of V"""
    du = np.empty_like(u)
    c = h * h / 6.0
    du[1:-1] = (u[2:] * (1.0 - c * q[2:]) - u[:-2] * (1.0 - c * q[:-2])) / (2.0 * h)
    du[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
    du[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    for i in steps:
        if i >= 2:
            du[i] = (3.0 * u[i] - 4.0 * u[i - 1] + u[i - 2]) / (2.0 * h)
    return du


def _running_angle(f, g, nodes):
    """
    theta = atan2(f, g) unwrapped, continuous from theta(0) = 0.

    theta crosses a multiple of pi at every node of f, so its value at r[0]
    is nodes pi plus the angle of f/g folded into [0, pi).
    """
    frac = math.atan(f[0] / g[0]) if g[0] != 0.0 else 0.5 * math.pi
    if frac < -ANGLE_NOISE:
        frac += math.pi
    ang = np.arctan2(f, g)
    step = np.mod(np.diff(ang) + 0.5 * math.pi, 2.0 * math.pi) - 0.5 * math.pi
    return nodes * math.pi + max(frac, 0.0) + np.concatenate(([0.0], np.cumsum(step)))


def _solution_envelope(ch, mu, E, ell, lam, grid: RadialGrid, settings) -> EnvelopeSolution:
    """rho = f^2 + g^2 from the regular solution and the inward irregular one"""
    k = math.sqrt(2.0 * mu * E)
    h = grid.base_step
    lam_val = ell * (ell + 1.0) if lam is None else float(lam)
    sol = integrate_radial(ch, mu, E, ell, grid, settings, lam=lam)
    r, u, q = sol.r, sol.u, sol.q
    i1, i2 = matching_indices(r.size, k, h)
    if i1 < 1:
        raise PhysicsDomainError("Lattice too short for two matching points")
    if q[i1] > 0 or q[i2] > 0:
        raise PhysicsDomainError(f"Matching points lie in the classically forbidden region (ell={ell})",
                                 {'r1': float(r[i1]), 'r2': float(r[i2])})

    v1, v2 = _free_values(ell, lam, k * r[i1]), _free_values(ell, lam, k * r[i2])
    eta = math.atan2(u[i2] * v1.j - u[i1] * v2.j, u[i2] * v1.n - u[i1] * v2.n)
    c, s = math.cos(eta), math.sin(eta)
    s1 = v1.j * c - v1.n * s
    s2 = v2.j * c - v2.n * s
    f = u * ((s1 * s1 + s2 * s2) / (u[i1] * s1 + u[i2] * s2))

    # partner -nhat cos(eta) - jhat sin(eta), swept inward from the last two points
    vp = _free_values(ell, lam, k * r[i2 - 1])
    g_rev = np.empty_like(r)
    dq = jump_profile(ch, mu, r, h)
    done = jit.numerov_capped(np.ascontiguousarray(q[::-1]), np.ascontiguousarray(-dq[::-1]), h,
                              -v2.n * c - v2.j * s, -vp.n * c - vp.j * s, IRREGULAR_CAP, g_rev)
    # below the cap rho exceeds 1e300 and k/rho is far under RHO_FLOOR
    cut = r.size - done
    if done < 4 or cut >= i1:
        raise ConvergenceError(f"Irregular solution of channel {ch.label} overflowed (ell={ell})", {'energy': E})
    g = g_rev[:done][::-1]
    r, u, q, f = r[cut:], u[cut:], q[cut:], f[cut:]

    steps = step_nodes(ch, r, h)
    df = _numerov_derivative(f, q, h, steps)
    dg = _numerov_derivative(g, q, h, steps)
    df[-1] = k * (v2.dj * c - v2.dn * s)
    dg[-1] = k * (-v2.dn * c - v2.dj * s)
    rho = f * f + g * g
    drho = 2.0 * (f * df + g * dg)
    d2rho = 2.0 * (df * df + dg * dg + q * rho)
    signs = np.sign(sol.u[:cut + 1])
    signs = signs[signs != 0]
    theta = _running_angle(f, g, int(np.count_nonzero(signs[1:] != signs[:-1])))

    with np.errstate(divide='ignore', over='ignore'):
        dense = np.nonzero(k / rho >= RHO_FLOOR)[0]
    first = int(dense[0]) if dense.size else 0
    if r.size - first < 4:
        raise ConvergenceError(f"Envelope of channel {ch.label} vanishes on the lattice (ell={ell})", {'energy': E})
    sl = slice(first, None)
    return EnvelopeSolution(
        r=r[sl], rho=rho[sl], drho=drho[sl], d2rho=d2rho[sl], U=q[sl], channel=ch.label, ell=ell, energy=E,
        k=k, lam=lam_val, start_index=sol.start_index + cut + first, base_step=h, inner_remainder=float(theta[first]),
        tail_phase=born_tail_phase(ch, mu, k, r[-1]), tail_correction=settings.tail_correction, form='product',
        theta=theta[sl], wronskian=k)


def _free_start(ell, lam, k, x, start):
    if start == 'unit':
        return 1.0, 0.0, 0.0
    if lam is None:
        m2, dm2, d2m2 = free_envelope(ell, x)
    else:
        m2, dm2, d2m2 = free_envelope_continuous(lam, x)
    return m2, k * dm2, k * k * d2m2


def _sweep(ch, mu, E, ell, lam, grid: RadialGrid, settings, coef, start, form):
    k = math.sqrt(2.0 * mu * E)
    lam_val = ell * (ell + 1.0) if lam is None else float(lam)
    h = grid.base_step
    i_lo = 0 if ch.hard_core > 0 else 1
    r = grid.radii(i_lo)
    u, u_lo, du_lo, u_hi, du_hi = _one_sided(ch, mu, E, lam_val, r, h)
    u_half, du_half = _u_arrays(ch, mu, E, lam_val, r[:-1] + 0.5 * h)
    allowed = np.nonzero(u < 0)[0]
    floor_index = int(allowed[0]) if allowed.size else r.size - 1
    # (1, 0, 0) carries 4 W^2 = -4 U(r_max) instead of 4 k^2
    w = k if start == 'free' else math.sqrt(max(-float(u[-1]), 0.0))

    y0, y1, y2 = _free_start(ell, lam, k, k * r[-1], start)
    rho = np.empty_like(r)
    drho = np.empty_like(r)
    d2rho = np.empty_like(r)
    stop = jit.envelope_sweep(u_lo, du_lo, u_hi, du_hi, u_half, du_half, h, coef,
                              y0, y1, y2, w, RHO_FLOOR, ENVELOPE_STABILITY, floor_index, rho, drho, d2rho)
    if stop < 0:
        raise ConvergenceError(f"Envelope of channel {ch.label} lost positivity (ell={ell}); refine the grid",
                               {'energy': E, 'step': h})
    sl = slice(stop, None)
    r, rho, drho, d2rho, u = r[sl], rho[sl], drho[sl], d2rho[sl], u[sl]
    if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(d2rho))):
        raise ConvergenceError(f"Envelope of channel {ch.label} overflowed (ell={ell})", {'energy': E})

    if ch.hard_core > 0 and stop == 0:
        remainder = 0.0
    elif u[0] > 0:
        # local power law rho ~ r^-p; p -> 2 kappa r for an exponential wall
        p = -r[0] * drho[0] / rho[0]
        remainder = w * r[0] / (rho[0] * (1.0 + p)) if p > 0 else w / rho[0] / (2.0 * math.sqrt(u[0]))
    else:
        r0 = r[0]
        rho_origin = rho[0] - r0 * drho[0] + 0.5 * r0 * r0 * d2rho[0]
        remainder = 0.5 * r0 * (w / rho_origin + w / rho[0])

    return EnvelopeSolution(
        r=r, rho=rho, drho=drho, d2rho=d2rho, U=u, channel=ch.label, ell=ell, energy=E, k=k,
        lam=lam_val, start_index=i_lo + stop, base_step=h, inner_remainder=remainder,
        tail_phase=born_tail_phase(ch, mu, k, r[-1]), tail_correction=settings.tail_correction, form=form,
        wronskian=w)


def _ripple(env: EnvelopeSolution):
    """Largest deviation of rho from its running mean over the outer half"""
    window = max(3, int(round(math.pi / (env.k * env.base_step))))
    half = env.rho.size // 2
    smooth = uniform_filter1d(env.rho, size=window, mode='nearest')
    inner = window
    outer = env.rho.size - window
    if outer <= max(half, inner):
        return float('inf')
    seg = slice(max(half, inner), outer)
    return float(np.max(np.abs(env.rho[seg] - smooth[seg])))


def milne_envelope(ch: ChannelPotential, mu, E, ell, grid: RadialGrid = None, settings=DEFAULT_SETTINGS,
                   form='product', start='free', lam=None) -> EnvelopeSolution:
    """
    Non-oscillatory envelope of ch on the lattice.

    The product form with the free start is built from the matched regular
    and irregular Numerov solutions. The printed form and the unit start
    integrate the third-order equation inward by RK4.

    Args:
        ch: Channel potential
        mu: Reduced mass (a.u.)
        E: Collision energy (a.u.)
        ell: Partial wave
        grid: Lattice; built for ch alone when omitted
        settings: Solver tolerances
        form: 'product' (coefficient 2 on U') or 'printed' (coefficient 1)
        start: 'free' starts on the free envelope, 'unit' on (1, 0, 0) and
            pushes r_max outward until the ripple is below RIPPLE_TOLERANCE
        lam: Continuous centrifugal strength overriding ell(ell+1)

    Returns:
        EnvelopeSolution
    """
    if not E > 0:
        raise InvalidInputError(f"Collision energy must be positive, got {E}")
    if form not in ENVELOPE_FORMS:
        raise InvalidInputError(f"Unknown envelope form {form!r}")
    if start not in ('free', 'unit'):
        raise InvalidInputError(f"Unknown envelope start {start!r}")
    if lam is not None and lam < -0.25:
        raise InvalidInputError(f"Centrifugal strength below -1/4: {lam}")
    if grid is None:
        grid = make_grid([ch], mu, E, ell, settings)
    if form == 'product' and start == 'free':
        return _solution_envelope(ch, mu, E, ell, lam, grid, settings)
    coef = ENVELOPE_FORMS[form]

    env = _sweep(ch, mu, E, ell, lam, grid, settings, coef, start, form)
    if start == 'unit':
        for _ in range(MAX_RIPPLE_PUSHES):
            ripple = _ripple(env)
            if ripple < RIPPLE_TOLERANCE:
                break
            logger.info(f"Envelope ripple {ripple:.2e} at r_max={grid.r_max:.4g}; pushing r_max outward")
            grid = dataclasses.replace(grid, r_max=grid.origin + 2.0 * (grid.r_max - grid.origin))
            if grid.n_points > settings.max_points:
                raise ConvergenceError("Envelope ripple did not settle before the lattice cap",
                                       {'ripple': ripple, 'r_max': grid.r_max})
            env = _sweep(ch, mu, E, ell, lam, grid, settings, coef, start, form)
        else:
            logger.warning(f"Envelope ripple still {_ripple(env):.2e} after {MAX_RIPPLE_PUSHES} pushes")
    return env


def segment_cells(g, h):
    """
    Per-cell integrals of samples g with fourth-order accuracy.

    Interior cells use h/24 (-g[j-1] + 13 g[j] + 13 g[j+1] - g[j+2]);
    the end cells use the one-sided variants.
    """
    n = g.size
    if n < 2:
        return np.zeros(0)
    if n == 2:
        return np.array([0.5 * h * (g[0] + g[1])])
    if n == 3:
        return h / 12.0 * np.array([5.0 * g[0] + 8.0 * g[1] - g[2], -g[0] + 8.0 * g[1] + 5.0 * g[2]])
    cells = np.empty(n - 1)
    cells[1:-1] = h / 24.0 * (-g[:-3] + 13.0 * g[1:-2] + 13.0 * g[2:-1] - g[3:])
    cells[0] = h / 24.0 * (9.0 * g[0] + 19.0 * g[1] - 5.0 * g[2] + g[3])
    cells[-1] = h / 24.0 * (g[-4] - 5.0 * g[-3] + 19.0 * g[-2] + 9.0 * g[-1])
    return cells


def _find_dips(env: EnvelopeSolution):
    """(index, half-width) of unresolved minima of rho in the allowed region"""
    rho, h, w = env.rho, env.base_step, env.wronskian
    dips = []
    last_end = 0
    for i in range(1, rho.size - 1):
        if env.U[i] >= 0 or not (rho[i] <= rho[i - 1] and rho[i] < rho[i + 1]):
            continue
        if rho[i] > 0 and w * h / rho[i] <= DIP_RESOLUTION:
            continue
        kappa = math.sqrt(-env.U[i])
        m = max(2, int(round(0.25 / (kappa * h))))
        if i - m < last_end or i + m > rho.size - 1:
            raise ConvergenceError(f"Envelope dips of channel {env.channel} are too close to resolve; "
                                   f"refine the grid", {'ell': env.ell, 'r': float(env.r[i])})
        dips.append((i, m))
        last_end = i + m
    return dips


def _dip_cells(env: EnvelopeSolution, i, m):
    """Per-cell phase of a dip from the local constant-U model rho = A - B cos(2 kappa x)"""
    w, h = env.wronskian, env.base_step
    kappa = math.sqrt(-env.U[i])
    c1 = env.drho[i] / (2.0 * kappa)
    c2 = env.d2rho[i] / (4.0 * kappa * kappa)
    b = math.hypot(c2, c1)
    ratio = w * w / (kappa * kappa)
    a = math.sqrt(ratio + b * b)
    a_minus_b = ratio / (a + b)
    r_dip = env.r[i] - math.atan2(c1, c2) / (2.0 * kappa)
    x = env.r[i - m:i + m + 1] - r_dip
    psi = np.unwrap(np.arctan2(math.sqrt(a + b) * np.sin(kappa * x), math.sqrt(a_minus_b) * np.cos(kappa * x)))
    return np.diff(psi) - env.k * h


def cell_integrals(env: EnvelopeSolution):
    """Integral of W/rho - k over each lattice cell, dips handled analytically"""
    h, k = env.base_step, env.k
    if env.theta is not None:
        return np.diff(env.theta) - k * h
    dips = _find_dips(env)
    with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
        g = env.wronskian / env.rho - k
    cells = np.empty(env.rho.size - 1)
    for i, m in dips:
        cells[i - m:i + m] = _dip_cells(env, i, m)

    a = 0
    bounds = [(i - m, i + m) for i, m in dips] + [(env.rho.size - 1, env.rho.size - 1)]
    for lo, hi in bounds:
        if lo > a:
            seg = g[a:lo + 1]
            if not np.all(np.isfinite(seg)) or np.any(env.rho[a:lo + 1] <= 0):
                raise ConvergenceError(f"Envelope of channel {env.channel} is not positive (ell={env.ell}); "
                                       f"refine the grid", {'energy': env.energy})
            cells[a:lo] = segment_cells(seg, h)
        a = hi
    if dips:
        logger.debug(f"Channel {env.channel}, ell={env.ell}: {len(dips)} envelope dips treated analytically")
    return cells


def _outer_phase(env: EnvelopeSolution):
    x = env.k * env.r[-1]
    free = x - env.ell * math.pi / 2.0 - free_phase(env.ell, x)
    if env.tail_correction:
        return free + env.tail_phase
    if env.tail_phase > PHASE_TAIL_TOLERANCE:
        raise ConvergenceError(
            f"Phase beyond r_max estimated at {env.tail_phase:.2e} rad; enable tail_correction",
            {'tail_phase': env.tail_phase, 'r_max': float(env.r[-1])})
    return free


def _check_integer_ell(env: EnvelopeSolution):
    if env.lam != env.ell * (env.ell + 1.0):
        raise InvalidInputError("Phase integrals need an envelope of integer ell")


def phase_integral(env: EnvelopeSolution, k=None) -> float:
    """
    Absolute phase shift eta = ell pi/2 + int (k/rho - k) dr.

    Raises ConvergenceError when the phase left beyond r_max exceeds
    PHASE_TAIL_TOLERANCE and no tail correction is requested.
    """
    _check_integer_ell(env)
    if k is not None and abs(k - env.k) > 1e-12 * env.k:
        raise InvalidInputError(f"Wavenumber {k} does not match the envelope energy")
    cells = cell_integrals(env)
    parts = [-env.k * env.r[0], env.inner_remainder, math.fsum(cells), _outer_phase(env)]
    return env.ell * math.pi / 2.0 + math.fsum(parts)


def cumulative_phase(env: EnvelopeSolution):
    """C(r_j) = integral_0^{r_j} k/rho dr at every lattice point of env"""
    if env.theta is not None:
        return env.theta.copy()
    cells = cell_integrals(env) + env.k * env.base_step
    return env.inner_remainder + np.concatenate(([0.0], np.cumsum(cells)))


def split_phase(env: EnvelopeSolution, barrier: BarrierGeometry) -> PhaseSplit:
    """
    Split eta at s' near the barrier top into pi N_ell and a smooth remainder.

    s' is the point in [0.8 s, 1.2 s] where the inner integral crosses the
    multiple of pi nearest to its value at s.
    """
    _check_integer_ell(env)
    if barrier.E_top <= env.energy:
        raise PhysicsDomainError(f"Barrier top {barrier.E_top:.4g} is below E={env.energy:.4g}; "
                                 f"the split needs ell > L(E)")
    s = barrier.s_ell
    eta = phase_integral(env)
    if 1.2 * s <= env.r[0]:
        return PhaseSplit(n_inner=0, eta_out=eta, split_radius=s)
    c = cumulative_phase(env)
    n = int(round(float(np.interp(s, env.r, c)) / math.pi))
    if n == 0:
        # nothing accumulates inside the barrier
        return PhaseSplit(n_inner=0, eta_out=eta, split_radius=s)
    target = n * math.pi
    lo = int(np.searchsorted(env.r, 0.8 * s))
    hi = min(int(np.searchsorted(env.r, 1.2 * s)), env.r.size - 1)
    window = c[lo:hi + 1] - target
    cross = np.nonzero(np.sign(window[:-1]) != np.sign(window[1:]))[0]
    if cross.size:
        j = lo + int(cross[np.argmin(np.abs(lo + cross - np.searchsorted(env.r, s)))])
        t = (target - c[j]) / (c[j + 1] - c[j])
        s_prime = env.r[j] + t * env.base_step
    else:
        j = lo + int(np.argmin(np.abs(window)))
        step = abs(c[min(j + 1, c.size - 1)] - c[j])
        if abs(c[j] - target) > 0.5 * step:
            raise PhysicsDomainError(
                f"No split radius near s={s:.4g} makes the inner phase a multiple of pi; "
                f"E is too close to the barrier top", {'residual': float(c[j] - target)})
        s_prime = env.r[j]
    return PhaseSplit(n_inner=n, eta_out=eta - n * math.pi, split_radius=float(s_prime))


def fit_delta_A(ells, delta_etas, energy=float('nan')) -> CurvatureCoefficient:
    """
    Least-squares slope of -Delta eta against lam = ell(ell+1).

    Phases are unwrapped with period pi before the fit.
    """
    ells = np.asarray(ells, dtype=int)
    if ells.size < MIN_FIT_POINTS:
        raise InvalidInputError(f"The slope fit needs at least {MIN_FIT_POINTS} partial waves, got {ells.size}")
    order = np.argsort(ells)
    ells = ells[order]
    deta = np.unwrap(np.asarray(delta_etas, dtype=float)[order], period=math.pi)
    lam = ells * (ells + 1.0)
    slope, intercept = np.polyfit(lam, deta, 1)
    residual = float(np.max(np.abs(deta - (intercept + slope * lam))))
    nonlinear = residual > FIT_RESIDUAL_LIMIT
    if nonlinear:
        logger.warning(f"Delta eta is not linear in lam (max residual {residual:.3f} rad)")
    return CurvatureCoefficient(value=float(-slope), energy=energy, ell_range=tuple(int(l) for l in ells),
                                method='fit', nonlinear=nonlinear, residual=residual, intercept=float(intercept))


def default_fit_ells(pair: ChannelPair, E):
    """ell = 1 .. min(8, ceil(L))"""
    if pair.tail is None:
        raise InvalidInputError("Pairs without a tail need an explicit ell list")
    top = min(MAX_FIT_ELL, partial_wave_cutoff(cutoff_lambda(pair.tail, pair.mu, E)))
    return list(range(1, top + 1))


def delta_A_fit(pair: ChannelPair, mu, E, ell_list=None, settings=DEFAULT_SETTINGS) -> CurvatureCoefficient:
    """Delta A_0 as the slope of the exact phase differences over ell_list"""
    if not math.isclose(mu, pair.mu, rel_tol=1e-12):
        raise InvalidInputError("Reduced mass differs from the one of the pair")
    ells = default_fit_ells(pair, E) if ell_list is None else list(ell_list)
    if len(ells) < MIN_FIT_POINTS:
        raise InvalidInputError(f"The slope fit needs at least {MIN_FIT_POINTS} partial waves, got {len(ells)}")
    deltas = []
    for ell in ells:
        rec_a, rec_b = pair_phase_shifts(pair, E, ell, settings)
        deltas.append(rec_b.eta - rec_a.eta)
    return fit_delta_A(ells, deltas, energy=E)


def short_range_phase(ch: ChannelPotential, mu, E, lam, grid: RadialGrid, settings, radius):
    """theta_lam = integral_0^R k/rho_lam dr at the first lattice point at or beyond radius"""
    env = _solution_envelope(ch, mu, E, 0, float(lam), grid, settings)
    j = min(int(np.searchsorted(env.r, radius)), env.r.size - 1)
    return float(env.theta[j])


def _channel_A(ch, mu, E, ell, grid, settings, boundary):
    """A_ell of one channel up to boundary"""
    if ell == 0:
        t = [short_range_phase(ch, mu, E, n * LAMBDA_STEP, grid, settings, boundary) for n in range(3)]
        return (3.0 * t[0] - 4.0 * t[1] + t[2]) / (2.0 * LAMBDA_STEP)
    lam = ell * (ell + 1.0)
    return (short_range_phase(ch, mu, E, 0.0, grid, settings, boundary)
            - short_range_phase(ch, mu, E, lam, grid, settings, boundary)) / lam


def delta_A_envelope(pair: ChannelPair, mu, E, ell, settings=DEFAULT_SETTINGS) -> CurvatureCoefficient:
    """
    Delta A_ell = A^b - A^a from the envelopes of lam = 0 and lam = ell(ell+1).

    With rho_lam = rho_0 + lam rho_bar, the integral of k rho_bar/(rho_lam rho_0)
    up to boundary_R is (theta_0 - theta_lam)/lam there; ell = 0 takes the
    lam -> 0 limit as a one-sided derivative. Beyond boundary_R both channels
    share the same envelopes, so the long-range part cancels. Falls back to
    the slope fit with a warning when an envelope fails.
    """
    if not math.isclose(mu, pair.mu, rel_tol=1e-12):
        raise InvalidInputError("Reduced mass differs from the one of the pair")
    if ell < 0:
        raise InvalidInputError(f"Partial wave must be non-negative, got {ell}")
    grid = make_grid(pair.channels(), mu, E, ell, settings)
    try:
        a_vals = [_channel_A(ch, mu, E, ell, grid, settings, pair.boundary_R) for ch in pair.channels()]
    except ConvergenceError as e:
        logger.warning(f"Envelope Delta A failed at E={E:.4g}: {e}; falling back to the slope fit")
        return delta_A_fit(pair, mu, E, settings=settings)
    return CurvatureCoefficient(value=a_vals[1] - a_vals[0], energy=E, ell_range=(ell,),
                                method='envelope-integral')
