"""
Compiled inner loops.

The Numerov and envelope sweeps are the only hot loops of the engine. They
are compiled with numba when it is importable and REXCH_DISABLE_JIT is not
set; otherwise the same functions run as plain Python with identical
arithmetic. fastmath stays off so both paths round the same way.
"""

import logging
import os

logger = logging.getLogger(__name__)

try:
    import numba as nb
    HAVE_NUMBA = True
except Exception:
    HAVE_NUMBA = False

JIT_ENABLED = HAVE_NUMBA and os.environ.get('REXCH_DISABLE_JIT', '').strip().lower() not in ('1', 'true', 'yes')

if JIT_ENABLED:
    njit = nb.njit
else:
    def njit(*args, **kwargs):
        def wrapper(f):
            return f
        return wrapper

# |u| above which the partial solution is scaled down
RESCALE_LIMIT = 1e100
RESCALE_FACTOR = 1e-100


@njit(cache=True)
def numerov_sweep(q, dq, h, u0, u1, mark, out):
    """
    Outward three-term recurrence for u'' = q u on a uniform lattice.

    Uses the w = (1 - h^2 q/12) u form. Samples are written to out; the
    prefix is rescaled whenever |u| exceeds RESCALE_LIMIT. Where q jumps by
    dq[i] (q[i] holding the mean of both limits) the recurrence gains
    h^3 dq u'/12 so the step stays fourth order.

    Returns:
        (nodes up to index mark, total nodes, number of rescalings)
    """
    n = q.shape[0]
    h2 = h * h
    h12 = h2 / 12.0
    out[0] = u0
    out[1] = u1
    w_prev = (1.0 - h12 * q[0]) * u0
    w = (1.0 - h12 * q[1]) * u1

    nodes = 0
    nodes_mark = 0
    rescales = 0
    last_sign = 0
    for j in range(2):
        if out[j] > 0.0:
            last_sign = 1
        elif out[j] < 0.0:
            last_sign = -1

    for i in range(1, n - 1):
        w_next = 2.0 * w - w_prev + h2 * q[i] * out[i]
        if dq[i] != 0.0 and i >= 2:
            du = (3.0 * out[i] - 4.0 * out[i - 1] + out[i - 2]) / (2.0 * h)
            w_next += h2 * h / 12.0 * dq[i] * du
        u_next = w_next / (1.0 - h12 * q[i + 1])
        out[i + 1] = u_next
        if abs(u_next) > RESCALE_LIMIT:
            for j in range(i + 2):
                out[j] *= RESCALE_FACTOR
            w_next *= RESCALE_FACTOR
            w *= RESCALE_FACTOR
            rescales += 1
        if u_next > 0.0:
            if last_sign < 0:
                nodes += 1
            last_sign = 1
        elif u_next < 0.0:
            if last_sign > 0:
                nodes += 1
            last_sign = -1
        if i + 1 == mark:
            nodes_mark = nodes
        w_prev = w
        w = w_next
    if mark >= n - 1:
        nodes_mark = nodes
    return nodes_mark, nodes, rescales


@njit(cache=True)
def numerov_capped(q, dq, h, u0, u1, cap, out):
    """
    The numerov_sweep recurrence without rescaling, stopping once |u|
    exceeds cap.

    Returns:
        number of samples written to the front of out
    """
    n = q.shape[0]
    h2 = h * h
    h12 = h2 / 12.0
    out[0] = u0
    out[1] = u1
    w_prev = (1.0 - h12 * q[0]) * u0
    w = (1.0 - h12 * q[1]) * u1
    for i in range(1, n - 1):
        w_next = 2.0 * w - w_prev + h2 * q[i] * out[i]
        if dq[i] != 0.0 and i >= 2:
            du = (3.0 * out[i] - 4.0 * out[i - 1] + out[i - 2]) / (2.0 * h)
            w_next += h2 * h / 12.0 * dq[i] * du
        u_next = w_next / (1.0 - h12 * q[i + 1])
        if not abs(u_next) <= cap:
            return i + 1
        out[i + 1] = u_next
        w_prev = w
        w = w_next
    return n


@njit(cache=True)
def envelope_sweep(u_lo, du_lo, u_hi, du_hi, u_half, du_half, h, coef,
                   y0, y1, y2, k, rho_floor_ratio, stab_limit, floor_index, rho, drho, d2rho):
    """
    Inward RK4 for rho''' = 4 U rho' + coef U' rho.

    Starts at the last lattice point with (y0, y1, y2). Each step from r_(i+1)
    to r_i reads U at r_(i+1) from the left limits u_lo and at r_i from the
    right limits u_hi; they differ only where V jumps, and there rho''
    picks up coef (U_lo - U_hi) rho from the delta in U'. Half-step values
    u_half[i], du_half[i] belong to r_i + h/2. At or below
    floor_index integration stops early once k/rho drops below
    rho_floor_ratio or h^2 U exceeds stab_limit.

    Returns:
        index of the innermost computed sample, or -1 if rho lost positivity
    """
    n = u_lo.shape[0]
    rho[n - 1] = y0
    drho[n - 1] = y1
    d2rho[n - 1] = y2
    t = -h
    for i in range(n - 2, -1, -1):
        a0 = rho[i + 1]
        a1 = drho[i + 1]
        a2 = d2rho[i + 1] + coef * (u_lo[i + 1] - u_hi[i + 1]) * a0

        k10 = a1
        k11 = a2
        k12 = 4.0 * u_lo[i + 1] * a1 + coef * du_lo[i + 1] * a0

        b0 = a0 + 0.5 * t * k10
        b1 = a1 + 0.5 * t * k11
        b2 = a2 + 0.5 * t * k12
        k20 = b1
        k21 = b2
        k22 = 4.0 * u_half[i] * b1 + coef * du_half[i] * b0

        c0 = a0 + 0.5 * t * k20
        c1 = a1 + 0.5 * t * k21
        c2 = a2 + 0.5 * t * k22
        k30 = c1
        k31 = c2
        k32 = 4.0 * u_half[i] * c1 + coef * du_half[i] * c0

        d0 = a0 + t * k30
        d1 = a1 + t * k31
        d2 = a2 + t * k32
        k40 = d1
        k41 = d2
        k42 = 4.0 * u_hi[i] * d1 + coef * du_hi[i] * d0

        rho[i] = a0 + t / 6.0 * (k10 + 2.0 * k20 + 2.0 * k30 + k40)
        drho[i] = a1 + t / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
        d2rho[i] = a2 + t / 6.0 * (k12 + 2.0 * k22 + 2.0 * k32 + k42)

        if rho_floor_ratio > 0.0 and i <= floor_index:
            if not rho[i] > 0.0:
                return -1
            if k / rho[i] < rho_floor_ratio:
                return i
            if u_hi[i] > 0.0 and h * h * u_hi[i] > stab_limit:
                return i
    return 0


def describe():
    """Short description of the active kernel backend"""
    if JIT_ENABLED:
        return f"numba {nb.__version__}"
    if HAVE_NUMBA:
        return "python (numba disabled)"
    return "python"


def log_backend():
    logger.info(f"Radial kernels running on {describe()}")
