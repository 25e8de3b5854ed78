"""Distance laws: nearest TBS / LoS ABS / NLoS ABS per ring, and the law of
the distance from the typical user to the ABS of its own cluster.

Aerial stations of ring ``i`` form a PPP of intensity ``delta*lambda_C*p_i``
at altitude ``h_i``; each is LoS independently with the elevation-dependent
probability. With ``x = h*u`` the LoS mass integral scales as
``int_0^rho x p_L(x, h) dx = h^2 g(rho/h)`` where ``g`` depends on the
environment only, so one table of ``g`` serves every ring.

Functions taking ``window`` restrict every process to the horizontal disk of
that radius around the user (``inf`` is the unbounded plane).
"""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from .channel import LinkKind, los_probability
from .model import ParameterError
from .numerics import gauss_legendre_unit
from .placement import offset_pdf


# --- cubic Hermite tables --------------------------------------------------

@dataclass(frozen=True)
class HermiteTable:
    """Piecewise cubic through ``(x, y)`` with one-sided slopes per cell.

    ``d_right[k]`` is the slope at ``x[k]`` seen from cell ``k`` and
    ``d_left[k]`` the slope at ``x[k+1]`` seen from cell ``k``, so jumps of
    the derivative at knots are represented exactly. Outside the knot range
    the table is held constant.
    """

    x: np.ndarray
    y: np.ndarray
    d_right: np.ndarray
    d_left: np.ndarray

    def _cell(self, q):
        k = np.clip(np.searchsorted(self.x, q, side="right") - 1, 0, self.x.size - 2)
        x0 = self.x[k]
        hk = self.x[k + 1] - x0
        t = np.clip((q - x0) / hk, 0.0, 1.0)
        return k, hk, t

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        k, hk, t = self._cell(q)
        t2, t3 = t * t, t * t * t
        val = ((2 * t3 - 3 * t2 + 1) * self.y[k] + (t3 - 2 * t2 + t) * hk * self.d_right[k]
               + (-2 * t3 + 3 * t2) * self.y[k + 1] + (t3 - t2) * hk * self.d_left[k])
        val = np.where(q <= self.x[0], self.y[0], val)
        return np.where(q >= self.x[-1], self.y[-1], val)

    def slope(self, q):
        q = np.asarray(q, dtype=float)
        k, hk, t = self._cell(q)
        t2 = t * t
        der = ((6 * t2 - 6 * t) * (self.y[k] - self.y[k + 1]) / hk
               + (3 * t2 - 4 * t + 1) * self.d_right[k] + (3 * t2 - 2 * t) * self.d_left[k])
        return np.where((q < self.x[0]) | (q > self.x[-1]), 0.0, der)


# --- environment LoS moment -----------------------------------------------

_G_RATIO = 1.02
_G_VMIN = 1e-4
_G_VMAX = 1e8


def _los_of_u(u, env, nlos=False):
    # elevation atan(1/u) in degrees, u >= 0
    elev = np.degrees(np.arctan2(1.0, u))
    e = env.a * np.exp(-env.b * (elev - env.a))
    return e / (1.0 + e) if nlos else 1.0 / (1.0 + e)


@lru_cache(maxsize=32)
def _moment_table(env, nlos):
    n = int(math.ceil(math.log(_G_VMAX / _G_VMIN) / math.log(_G_RATIO)))
    knots = np.concatenate([[0.0], _G_VMIN * _G_RATIO ** np.arange(n + 1)])
    t, w = gauss_legendre_unit(10)
    lo, hi = knots[:-1], knots[1:]
    u = lo[:, None] + (hi - lo)[:, None] * t
    cell = (hi - lo) * ((u * _los_of_u(u, env, nlos)) @ w)
    y = np.concatenate([[0.0], np.cumsum(cell)])
    slope = knots * _los_of_u(knots, env, nlos)
    return HermiteTable(knots, y, slope[:-1], slope[1:])


def _moment(kind, v, env):
    """``int_0^v u p(u) du`` with ``p`` the LoS (or NLoS) probability at
    horizontal distance ``u`` from unit altitude."""
    nlos = kind is LinkKind.AERIAL_NLOS
    v = np.asarray(v, dtype=float)
    table = _moment_table(env, nlos)
    p_inf = float(_los_of_u(np.inf, env, nlos))
    # beyond the table the probability has settled at its horizon value
    tail = p_inf * 0.5 * (v * v - _G_VMAX ** 2)
    return np.where(v > _G_VMAX, table.y[-1] + tail, table(v))


def los_moment(v, env):
    """``g(v) = int_0^v u p_L(u, 1) du``: LoS-weighted moment in altitude units."""
    return _moment(LinkKind.AERIAL_LOS, v, env)


# --- nearest-distance laws --------------------------------------------------

def ring_intensity(plan, ring):
    """Horizontal intensity of ABSs attached to ring ``ring`` (1-based)."""
    if not 1 <= int(ring) <= plan.N:
        raise ParameterError(f"ring index {ring} outside 1..{plan.N}")
    net = plan.net
    return net.delta * net.lambda_C * plan.rings[int(ring) - 1].p_i


def _aerial_kind(kind):
    if kind not in (LinkKind.AERIAL_LOS, LinkKind.AERIAL_NLOS):
        raise ParameterError(f"{kind} is not an aerial kind")
    return kind


def _horizontal(d, h, window):
    rho = np.sqrt(np.maximum(d * d - h * h, 0.0))
    return np.minimum(rho, window)


def ring_mass(kind, d, plan, ring, window=math.inf):
    """Mean number of ring-``ring`` ABSs of the given LoS state within euclidean distance ``d``."""
    _aerial_kind(kind)
    d = np.asarray(d, dtype=float)
    lam = ring_intensity(plan, ring)
    h = plan.rings[int(ring) - 1].h_u
    v = _horizontal(d, h, window) / h
    return 2 * math.pi * lam * h * h * _moment(kind, v, plan.env)


def ring_density(kind, d, plan, ring, window=math.inf):
    """Derivative of :func:`ring_mass` in ``d``."""
    _aerial_kind(kind)
    d = np.asarray(d, dtype=float)
    lam = ring_intensity(plan, ring)
    h = plan.rings[int(ring) - 1].h_u
    rho = np.sqrt(np.maximum(d * d - h * h, 0.0))
    p = los_probability(rho, h, plan.env)
    if kind is LinkKind.AERIAL_NLOS:
        p = 1 - p
    inside = (d >= h) & (rho <= window)
    return np.where(inside, 2 * math.pi * lam * d * p, 0.0)


def tbs_mass(d, net, window=math.inf):
    d = np.minimum(np.asarray(d, dtype=float), window)
    return math.pi * net.lambda_T * d * d


def nearest_cdf(kind, d, plan, ring=None, window=math.inf):
    """CDF of the distance to the nearest station of ``kind``.

    Aerial laws need ``ring`` and may be defective: their limit at infinity
    is ``1 - exp(-total mass)`` which is below one when the mass is finite.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ParameterError("distance must be >= 0")
    if kind is LinkKind.TERRESTRIAL:
        return -np.expm1(-tbs_mass(d, plan.net, window))
    if ring is None:
        raise ParameterError("aerial laws need a ring index")
    return -np.expm1(-ring_mass(kind, d, plan, ring, window))


def nearest_pdf(kind, d, plan, ring=None, window=math.inf):
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ParameterError("distance must be >= 0")
    if kind is LinkKind.TERRESTRIAL:
        lam = plan.net.lambda_T
        dens = np.where(d <= window, 2 * math.pi * lam * d, 0.0)
        return dens * np.exp(-tbs_mass(d, plan.net, window))
    if ring is None:
        raise ParameterError("aerial laws need a ring index")
    return ring_density(kind, d, plan, ring, window) * np.exp(-ring_mass(kind, d, plan, ring, window))


class AerialField:
    """Aggregate (all rings) mass and density of LoS and NLoS ABSs in
    euclidean distance, restricted to a finite horizontal window.

    ``mass`` is served from cubic Hermite tables whose knots include every
    ring altitude and window edge, where the density jumps.
    """

    def __init__(self, plan, window, ratio=1.01):
        if not math.isfinite(window) or window <= 0:
            raise ParameterError("aggregate aerial field needs a finite window > 0")
        self.plan = plan
        self.window = float(window)
        self.h = plan.h
        self.lam = plan.net.delta * plan.net.lambda_C * plan.p
        self.edges = np.sqrt(self.window ** 2 + self.h ** 2)
        self.x_max = float(self.edges.max())
        h_min = float(self.h.min())
        n = int(math.ceil(math.log(self.x_max / h_min) / math.log(ratio)))
        geo = h_min * ratio ** np.arange(n + 1)
        knots = np.unique(np.concatenate([[0.0], self.h, self.edges, geo[geo < self.x_max]]))
        self.knots = knots
        self.breakpoints = np.unique(np.concatenate([self.h, self.edges]))
        self.tables = {}
        for kind in (LinkKind.AERIAL_LOS, LinkKind.AERIAL_NLOS):
            y = self.mass_direct(kind, knots)
            d_r = self.density_direct(kind, knots, side="right")
            d_l = self.density_direct(kind, knots, side="left")
            self.tables[kind] = HermiteTable(knots, y, d_r[:-1], d_l[1:])

    def mass_direct(self, kind, x):
        x = np.asarray(x, dtype=float)[..., None]
        v = _horizontal(x, self.h, self.window) / self.h
        per_ring = 2 * math.pi * self.lam * self.h ** 2 * _moment(kind, v, self.plan.env)
        return per_ring.sum(axis=-1)

    def density_direct(self, kind, x, side="right"):
        x = np.asarray(x, dtype=float)[..., None]
        rho = np.sqrt(np.maximum(x * x - self.h ** 2, 0.0))
        p = los_probability(rho, self.h, self.plan.env)
        if kind is LinkKind.AERIAL_NLOS:
            p = 1 - p
        if side == "right":
            active = (x >= self.h) & (x < self.edges)
        else:
            active = (x > self.h) & (x <= self.edges)
        return np.where(active, 2 * math.pi * self.lam * x * p, 0.0).sum(axis=-1)

    def mass(self, kind, x):
        return self.tables[kind](x)

    def density(self, kind, x):
        return self.density_direct(kind, x)


@lru_cache(maxsize=16)
def aerial_field(plan, window):
    return AerialField(plan, window)


# --- cluster ABS distance law -------------------------------------------

def _offset(plan, j):
    if not 1 <= int(j) <= plan.N:
        raise ParameterError(f"ring index {j} outside 1..{plan.N}")
    ring = plan.rings[int(j) - 1]
    return abs(ring.R_u), ring.h_u


def _theta2(r, R_0, R_u):
    return np.arccos(np.clip((R_0 ** 2 + R_u ** 2 - r ** 2) / (2 * R_0 * R_u), -1.0, 1.0))


def _outer_branch_cdf(r, R_0, R_u):
    t2 = _theta2(r, R_0, R_u)
    s = np.sin(t2)
    g = np.maximum(r * r - (R_u * s) ** 2, 0.0)
    k = 2 * np.pi * R_0 ** 2
    return (t2 / np.pi
            + (-2 * r * r * np.arcsin(np.clip(s * R_u / r, -1.0, 1.0)) - 2 * s * R_u * np.sqrt(g)) / k
            + (-np.sin(2 * t2) * R_u ** 2 - 2 * t2 * r * r + 2 * np.pi * r * r) / k)


def _outer_branch_pdf(r, R_0, R_u):
    """Closed-form derivative of :func:`_outer_branch_cdf` (interior only)."""
    t2 = _theta2(r, R_0, R_u)
    s = np.sin(t2)
    c = R_0 ** 2 + R_u ** 2 - r * r
    k = 1 / (2 * np.pi * R_0 ** 2)
    a = k * ((-2 * r * r * (c / (2 * R_0 ** 2 * R_u * s) - R_u * s / r ** 2))
             / np.sqrt(1 - (R_u * s / r) ** 2) - 4 * r * np.arcsin(R_u * s / r))
    b = k * (-r * c * np.sqrt(r * r - (R_u * s) ** 2) / (R_0 ** 2 * R_u * s)
             - (2 * r - r * c / R_0 ** 2) * s / np.sqrt((r / R_u) ** 2 - s * s))
    e = k * (-2 * R_u * r * np.cos(2 * t2) / (R_0 * s) - 4 * r * t2 - 2 * r ** 3 / (R_0 * R_u * s)
             + 4 * np.pi * r) + r / (np.pi * R_0 * R_u * s)
    return a + b + e


def horizontal_cdf(r, R_u, R_0):
    r = np.asarray(r, dtype=float)
    R_u = abs(float(R_u))
    if R_u >= R_0:
        raise ParameterError("|R_u| must be < R_0")
    out = np.minimum(r * r / R_0 ** 2, 1.0)
    if R_u > 0:
        mid = (r > R_0 - R_u) & (r < R_0 + R_u)
        out = np.where(mid, _outer_branch_cdf(np.where(mid, r, R_0), R_0, R_u), out)
        out = np.where(r >= R_0 + R_u, 1.0, out)
    return np.clip(np.where(r <= 0, 0.0, out), 0.0, 1.0)


def horizontal_pdf(r, R_u, R_0):
    """Density of the horizontal user-to-cluster-ABS distance.

    The closed-form derivative of the outer branch is used in the interior;
    within a relative 1e-6 of either branch end (where it is 0/0) the
    equivalent arccos form is used instead.
    """
    r = np.asarray(r, dtype=float)
    R_u = abs(float(R_u))
    out = offset_pdf(r, R_u, R_0)
    if R_u > 0:
        lo, hi = R_0 - R_u, R_0 + R_u
        span = hi - lo
        mid = (r > lo + 1e-6 * span) & (r < hi - 1e-6 * span)
        if np.any(mid):
            with np.errstate(invalid="ignore", divide="ignore"):
                closed = _outer_branch_pdf(np.where(mid, r, 0.5 * (lo + hi)), R_0, R_u)
            out = np.where(mid, closed, out)
    return out


def cluster_horizontal_cdf(r, j, plan):
    R_u, _ = _offset(plan, j)
    return horizontal_cdf(r, R_u, plan.net.R_0)


def cluster_horizontal_pdf(r, j, plan):
    R_u, _ = _offset(plan, j)
    return horizontal_pdf(r, R_u, plan.net.R_0)


def cluster_euclid_cdf(d, j, plan):
    R_u, h = _offset(plan, j)
    d = np.asarray(d, dtype=float)
    rho = np.sqrt(np.maximum(d * d - h * h, 0.0))
    return np.where(d <= h, 0.0, horizontal_cdf(rho, R_u, plan.net.R_0))


def cluster_euclid_pdf(d, j, plan):
    R_u, h = _offset(plan, j)
    R_0 = plan.net.R_0
    d = np.asarray(d, dtype=float)
    rho = np.sqrt(np.maximum(d * d - h * h, 0.0))
    safe = np.where(rho > 0, rho, 1.0)
    ratio = np.where(rho <= R_0 - R_u, 2.0 / R_0 ** 2, horizontal_pdf(rho, R_u, R_0) / safe)
    return np.where(d < h, 0.0, d * ratio)


def cluster_weights(plan, mode="thinned"):
    """``(p_out_eff, p_eff)``: probability that the typical cluster has no ABS
    and that its ABS is attached to each ring.

    ``"thinned"`` deploys an ABS in the typical cluster with probability
    ``delta`` as in any other cluster; ``"always"`` deploys one whenever a
    rooftop exists.
    """
    p = plan.p
    if mode == "thinned":
        delta = plan.net.delta
        return 1.0 - delta * (1.0 - plan.p_out), delta * p
    if mode == "always":
        return plan.p_out, p
    raise ParameterError(f"unknown typical cluster mode {mode!r}")


def cluster_nodes(plan, rho_lo, n=16):
    """Quadrature over the tail ``rho > rho_lo`` of every ring's horizontal law.

    ``rho_lo`` has shape ``S + (N,)`` (one lower limit per ring). Returns
    ``(rho, weight)`` of shape ``S + (N, 2n)`` such that
    ``sum(weight * g(rho))`` approximates ``int_{rho_lo}^inf g f_j``. The
    outer branch is integrated in the cosine-mapped variable, which removes
    the square-root behaviour of the density at its ends.
    """
    R_0 = plan.net.R_0
    R_u = plan.R_u
    rho_lo = np.asarray(rho_lo, dtype=float)[..., None]
    t, w = gauss_legendre_unit(n)
    # inner branch [rho_lo, R_0 - R_u] with density 2 rho / R_0^2
    b1 = (R_0 - R_u)[:, None]
    a1 = np.minimum(rho_lo, b1)
    r1 = a1 + (b1 - a1) * t
    w1 = (b1 - a1) * w * 2 * r1 / R_0 ** 2
    # outer branch, rho = lo + span (1 - cos(pi tau)) / 2
    lo = (R_0 - R_u)[:, None]
    span = (2 * R_u)[:, None]
    safe_span = np.where(span > 0, span, 1.0)
    frac = np.clip((rho_lo - lo) / safe_span, 0.0, 1.0)
    tau0 = np.arccos(1 - 2 * frac) / np.pi
    tau = tau0 + (1 - tau0) * t
    r2 = lo + span * 0.5 * (1 - np.cos(np.pi * tau))
    jac = span * 0.5 * np.pi * np.sin(np.pi * tau)
    Ru = R_u[:, None]
    safe_ru = np.where(Ru > 0, Ru, 1.0)
    c = (Ru ** 2 + r2 ** 2 - R_0 ** 2) / (2 * safe_ru * np.maximum(r2, 1e-300))
    dens = 2 * r2 / (np.pi * R_0 ** 2) * np.arccos(np.clip(c, -1.0, 1.0))
    w2 = np.where(Ru > 0, (1 - tau0) * w * jac * dens, 0.0)
    return np.concatenate([r1, r2], axis=-1), np.concatenate([w1, w2], axis=-1)
