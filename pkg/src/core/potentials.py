"""
Channel potentials and channel pairs.

The default core family is V(r) = C_rep/r^12 - C_n/r^n: one repulsive knob
per channel on top of a tail shared by construction. Tabulated curves and
a few textbook potentials (free particle, hard sphere, square well) use the
same interface so every solver can run against analytic oracles.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from src.core.errors import InvalidInputError, PhysicsDomainError
from src.core.scales import TailSpec, derive_scales

logger = logging.getLogger(__name__)

# Core term must fall below this fraction of E* beyond the pair boundary
BOUNDARY_TOLERANCE = 1e-12
CORE_POWER = 12


class ChannelPotential:
    """Base class for a single-channel central potential"""
    label = 'a'
    tail = None
    # radius of an impenetrable wall, 0 when there is none
    hard_core = 0.0
    # V -> +inf as r -> 0
    singular = False

    def value(self, r):
        raise NotImplementedError

    def derivative(self, r):
        raise NotImplementedError

    def value_at_origin(self):
        """Finite V(0) for regular potentials"""
        return float(self.value(np.array([0.0]))[0])

    def support_radius(self):
        """Radius beyond which V coincides with its tail (or vanishes)"""
        return 0.0

    def characteristic_radius(self):
        """Length used to place sampling grids around the interesting region"""
        return max(self.support_radius(), 1.0)

    def analytic_minimum(self):
        """(r_min, depth) when known in closed form, else None"""
        return None

    def breakpoints(self):
        """Radii where V jumps; radial lattices place a point on each"""
        return ()

    def relabel(self, label):
        raise NotImplementedError


class ModelPotential(ChannelPotential):
    """Repulsive power core plus the shared attractive tail"""
    singular = True

    def __init__(self, c_rep, tail: TailSpec, label='a', power=CORE_POWER):
        if not c_rep > 0:
            raise InvalidInputError(f"Core coefficient must be positive, got {c_rep}")
        if power <= tail.n:
            raise PhysicsDomainError(
                f"Core power {power} must exceed tail power {tail.n} to form a well",
                {'power': power, 'n': tail.n})
        self.c_rep = float(c_rep)
        self.power = int(power)
        self.tail = tail
        self.label = label

    def __repr__(self):
        return f"ModelPotential(c_rep={self.c_rep!r}, n={self.tail.n}, label={self.label!r})"

    def __eq__(self, other):
        return (isinstance(other, ModelPotential) and self.c_rep == other.c_rep
                and self.power == other.power and self.tail == other.tail)

    def __hash__(self):
        return hash((self.c_rep, self.power, self.tail))

    def core(self, r):
        r = np.asarray(r, dtype=float)
        return self.c_rep / r**self.power

    def value(self, r):
        return self.core(r) + self.tail.value(r)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        return -self.power * self.c_rep / r**(self.power + 1) + self.tail.derivative(r)

    def core_radius(self, threshold):
        """Radius where the core term equals threshold"""
        return (self.c_rep / threshold) ** (1.0 / self.power)

    def characteristic_radius(self):
        return (self.power * self.c_rep / (self.tail.n * self.tail.C_n)) ** (1.0 / (self.power - self.tail.n))

    def analytic_minimum(self):
        if self.tail.extra:
            return None
        r_m = self.characteristic_radius()
        return r_m, -float(self.value(r_m))

    def relabel(self, label):
        return ModelPotential(self.c_rep, self.tail, label=label, power=self.power)


class TabulatedPotential(ChannelPotential):
    """Cubic-spline curve spliced onto the shared tail at splice_radius"""
    singular = True

    def __init__(self, r, v, tail: TailSpec, splice_radius, label='a'):
        r = np.asarray(r, dtype=float)
        v = np.asarray(v, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 4:
            raise InvalidInputError("Tabulated potential needs at least 4 (r, V) samples")
        if np.any(np.diff(r) <= 0) or r[0] <= 0:
            raise InvalidInputError("Tabulated radii must be positive and strictly increasing")
        if not r[0] < splice_radius <= r[-1]:
            raise InvalidInputError(
                f"Splice radius {splice_radius} outside the tabulated range [{r[0]}, {r[-1]}]")
        if v[0] <= 0:
            raise PhysicsDomainError("Innermost tabulated sample must be repulsive (V > 0)",
                                     {'r0': float(r[0]), 'v0': float(v[0])})
        self.r = r
        self.v = v
        self.tail = tail
        self.splice_radius = float(splice_radius)
        self.label = label
        self._spline = CubicSpline(r, v)
        self._dspline = self._spline.derivative()

        mismatch = float(self._spline(splice_radius) - tail.value(splice_radius))
        if abs(mismatch) > 1e-3 * abs(float(tail.value(splice_radius))):
            logger.warning(f"Tabulated curve {label} differs from the tail at the splice radius "
                           f"by {mismatch:.3e} a.u.")

    def value(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inner = r < self.r[0]
        outer = r >= self.splice_radius
        mid = ~(inner | outer)
        out[inner] = self.v[0] * (self.r[0] / r[inner]) ** CORE_POWER
        out[mid] = self._spline(r[mid])
        out[outer] = self.tail.value(r[outer])
        return out

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inner = r < self.r[0]
        outer = r >= self.splice_radius
        mid = ~(inner | outer)
        out[inner] = -CORE_POWER * self.v[0] * self.r[0] ** CORE_POWER / r[inner] ** (CORE_POWER + 1)
        out[mid] = self._dspline(r[mid])
        out[outer] = self.tail.derivative(r[outer])
        return out

    def support_radius(self):
        return self.splice_radius

    def characteristic_radius(self):
        return float(self.r[np.argmin(self.v)])

    def relabel(self, label):
        return TabulatedPotential(self.r, self.v, self.tail, self.splice_radius, label=label)


class ZeroPotential(ChannelPotential):
    """Free particle"""

    def __init__(self, label='a'):
        self.label = label

    def value(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def derivative(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def value_at_origin(self):
        return 0.0

    def relabel(self, label):
        return ZeroPotential(label)


class HardSphere(ChannelPotential):
    """Impenetrable sphere of radius R_h, free outside"""

    def __init__(self, radius, label='a'):
        if not radius > 0:
            raise InvalidInputError(f"Hard-sphere radius must be positive, got {radius}")
        self.hard_core = float(radius)
        self.label = label

    def value(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def derivative(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def support_radius(self):
        return self.hard_core

    def characteristic_radius(self):
        return self.hard_core

    def relabel(self, label):
        return HardSphere(self.hard_core, label)


class SquareWell(ChannelPotential):
    """Attractive well of depth V0 (positive) inside radius R_w"""

    def __init__(self, depth, radius, label='a'):
        if not depth > 0 or not radius > 0:
            raise InvalidInputError(f"Square well needs positive depth and radius, got {depth}, {radius}")
        self.depth = float(depth)
        self.radius = float(radius)
        self.label = label

    def value(self, r):
        r = np.asarray(r, dtype=float)
        v = np.where(r < self.radius, -self.depth, 0.0)
        # mean of both sides on the edge; the lattice is aligned to put a point there
        edge = np.abs(r - self.radius) <= 1e-12 * self.radius
        return np.where(edge, -0.5 * self.depth, v)

    def derivative(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def value_at_origin(self):
        return -self.depth

    def support_radius(self):
        return self.radius

    def characteristic_radius(self):
        return self.radius

    def analytic_minimum(self):
        return 0.5 * self.radius, self.depth

    def breakpoints(self):
        return (self.radius,)

    def relabel(self, label):
        return SquareWell(self.depth, self.radius, label)


@dataclass(frozen=True)
class CoreSpec:
    """Short-range parameterization of one channel of the 12-n family"""
    c_rep: float
    power: int = CORE_POWER


@dataclass(frozen=True)
class ChannelPair:
    """Two channels with identical potentials beyond boundary_R"""
    va: ChannelPotential
    vb: ChannelPotential
    boundary_R: float
    mu: float
    tail: TailSpec = None

    def channels(self):
        return self.va, self.vb

    def v_depth(self):
        """Depth of the shallower of the two wells"""
        return min(well_summary(self.va).v_depth, well_summary(self.vb).v_depth)

    def tail_mismatch(self, r):
        """|V_a - V_b| / max(|V_a|, E*) sampled at r"""
        r = np.asarray(r, dtype=float)
        va = self.va.value(r)
        floor = derive_scales(self.tail, self.mu).E_star if self.tail is not None else 0.0
        return np.abs(va - self.vb.value(r)) / np.maximum(np.abs(va), floor)


@dataclass(frozen=True)
class WellSummary:
    """Location and depth (positive) of the potential minimum"""
    r_min: float
    v_depth: float


def core_for_minimum(tail: TailSpec, r_min, power=CORE_POWER):
    """Core coefficient that puts the minimum of C_rep/r^p - C_n/r^n at r_min"""
    if not r_min > 0:
        raise InvalidInputError(f"Well position must be positive, got {r_min}")
    return tail.n * tail.C_n * r_min ** (power - tail.n) / power


def make_pair(core_a, core_b, tail: TailSpec, mu, boundary_tolerance=BOUNDARY_TOLERANCE) -> ChannelPair:
    """
    Build a channel pair sharing one tail.

    Args:
        core_a: CoreSpec (or a ready ChannelPotential) for channel a
        core_b: CoreSpec (or a ready ChannelPotential) for channel b
        tail: Tail shared by both channels
        mu: Reduced mass (a.u.)
        boundary_tolerance: Core term at boundary_R, in units of E*

    Returns:
        ChannelPair whose channels differ only inside boundary_R
    """
    if not mu > 0:
        raise InvalidInputError(f"Reduced mass must be positive, got {mu}")
    va = _as_channel(core_a, tail, 'a')
    vb = _as_channel(core_b, tail, 'b')
    if va.tail != tail or vb.tail != tail:
        raise PhysicsDomainError("Both channels must share the tail of the pair")

    e_star = derive_scales(tail, mu).E_star
    boundary = 0.0
    for ch in (va, vb):
        if isinstance(ch, ModelPotential):
            boundary = max(boundary, ch.core_radius(boundary_tolerance * e_star))
        else:
            boundary = max(boundary, ch.support_radius())
        # a well able to trap and orbit must exist
        well_summary(ch)
    logger.debug(f"Channel pair built with boundary R = {boundary:.6g} a.u.")
    return ChannelPair(va=va, vb=vb, boundary_R=boundary, mu=float(mu), tail=tail)


def pair_from_potentials(va: ChannelPotential, vb: ChannelPotential, mu) -> ChannelPair:
    """Pair of arbitrary (e.g. tail-less test) potentials"""
    if not mu > 0:
        raise InvalidInputError(f"Reduced mass must be positive, got {mu}")
    if va.tail != vb.tail:
        raise PhysicsDomainError("Both channels must share the same tail")
    boundary = max(va.support_radius(), vb.support_radius())
    return ChannelPair(va=va.relabel('a'), vb=vb.relabel('b'), boundary_R=boundary,
                       mu=float(mu), tail=va.tail)


def _as_channel(core, tail, label):
    if isinstance(core, ChannelPotential):
        return core.relabel(label)
    if isinstance(core, CoreSpec):
        return ModelPotential(core.c_rep, tail, label=label, power=core.power)
    return ModelPotential(float(core), tail, label=label)


def well_summary(ch: ChannelPotential) -> WellSummary:
    """
    Find the potential minimum by bracketing dV/dr and refining with brentq.

    Raises PhysicsDomainError when the potential has no interior minimum.
    """
    known = ch.analytic_minimum()
    if known is not None and not isinstance(ch, ModelPotential):
        return WellSummary(r_min=known[0], v_depth=known[1])

    r_c = ch.characteristic_radius()
    r = np.geomspace(r_c * 0.05, r_c * 50.0, 4001)
    with np.errstate(over='ignore'):
        dv = ch.derivative(r)
    crossing = np.nonzero((dv[:-1] < 0) & (dv[1:] >= 0))[0]
    if crossing.size == 0:
        raise PhysicsDomainError(f"Channel {ch.label} has no interior potential minimum")
    i = crossing[0]
    r_min = brentq(lambda x: float(ch.derivative(np.array([x]))[0]), r[i], r[i + 1],
                   xtol=1e-15 * r[i], rtol=4 * np.finfo(float).eps, maxiter=200)
    depth = -float(ch.value(np.array([r_min]))[0])
    if not depth > 0:
        raise PhysicsDomainError(f"Channel {ch.label} minimum is not below threshold",
                                 {'r_min': r_min, 'value': -depth})
    return WellSummary(r_min=r_min, v_depth=depth)


def load_tabulated(path, tail: TailSpec, splice_radius, label='a') -> TabulatedPotential:
    """
    Read a two-column (r, V) text file in atomic units.

    Lines starting with '#' are comments; radii must increase strictly.
    """
    if not os.path.exists(path):
        raise InvalidInputError(f"Potential file not found: {path}")
    try:
        data = np.loadtxt(path, comments='#', ndmin=2)
    except ValueError as e:
        raise InvalidInputError(f"Error reading potential file {path}: {str(e)}")
    if data.shape[1] != 2:
        raise InvalidInputError(f"Potential file {path} must have exactly two columns")
    logger.info(f"Loaded {data.shape[0]} samples from {path}")
    return TabulatedPotential(data[:, 0], data[:, 1], tail, splice_radius, label=label)
