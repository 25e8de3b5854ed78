"""Exclusion radii and association probabilities under strongest-mean-power
association.

Every station kind is characterised by ``(rho, eta, alpha)``. A server whose
mean received power is ``P`` beats a station of kind ``Q`` iff that station
lies beyond ``reach_Q(P) = (rho_Q eta_Q / P)^(1/alpha_Q)``. Aerial stations
cannot be closer than their altitude, so for ring ``i`` the exclusion radius
is ``max(h_i, reach)``; since a ring's mass vanishes below its altitude the
clamp is automatic in the aggregated void probabilities.
"""
from functools import lru_cache
import math

import numpy as np

from .channel import LinkKind, link_tuple, los_probability
from .distributions import aerial_field, cluster_nodes, cluster_weights, ring_mass, tbs_mass
from .model import ParameterError, Settings
from .numerics import QuadratureSpec, integrate_finite

T, L, N = LinkKind.TERRESTRIAL, LinkKind.AERIAL_LOS, LinkKind.AERIAL_NLOS
KINDS = (T, L, N)


def mean_power_at(kind, r, env, net):
    rho, eta, alpha, _ = link_tuple(kind, env, net)
    return rho * eta * np.asarray(r, dtype=float) ** (-alpha)


def reach(kind, power, env, net):
    """Distance at which a ``kind`` station delivers mean power ``power``."""
    rho, eta, alpha, _ = link_tuple(kind, env, net)
    return (rho * eta / np.asarray(power, dtype=float)) ** (1.0 / alpha)


def exclusion_distance(serving, interferer, r, plan, ring=None):
    """Distance below which an ``interferer`` would out-power a ``serving``
    station at distance ``r``; clamped at ring ``ring``'s altitude for aerial
    interferers when ``ring`` is given."""
    if serving not in KINDS or interferer not in KINDS:
        raise ParameterError(f"invalid kind pair ({serving}, {interferer})")
    env, net = plan.env, plan.net
    r = np.asarray(r, dtype=float)
    d = reach(interferer, mean_power_at(serving, r, env, net), env, net)
    if serving is interferer:
        d = r.copy() if r.ndim else float(r)
    if interferer is not T and ring is not None:
        if not 1 <= int(ring) <= plan.N:
            raise ParameterError(f"ring index {ring} outside 1..{plan.N}")
        d = np.maximum(d, plan.rings[int(ring) - 1].h_u)
    return d


class AnalysisContext:
    """Everything the analytic formulas share for one plan and settings."""

    def __init__(self, plan, settings):
        self.plan = plan
        self.settings = settings
        self.env, self.net = plan.env, plan.net
        self.window = float(settings.window_radius)
        self.field = aerial_field(plan, self.window)
        self.p_out_eff, self.p_eff = cluster_weights(plan, settings.typical_cluster_mode)
        self.h = plan.h
        self.R_u = plan.R_u
        self.x_max = self.field.x_max
        self.outer = QuadratureSpec(rtol=settings.rtol_outer, atol=1e-10)
        self.inner = QuadratureSpec(rtol=settings.rtol_inner, atol=1e-13)

    # -- masses ---------------------------------------------------------
    def mass(self, kind, x):
        if kind is T:
            return tbs_mass(x, self.net, self.window)
        return self.field.mass(kind, x)

    def density(self, kind, x):
        x = np.asarray(x, dtype=float)
        if kind is T:
            return np.where(x <= self.window, 2 * math.pi * self.net.lambda_T * x, 0.0)
        return self.field.density(kind, x)

    def exclusion(self, serving, r):
        """``{kind: exclusion distance}`` for a server of kind ``serving`` at ``r``."""
        r = np.asarray(r, dtype=float)
        power = mean_power_at(serving, r, self.env, self.net)
        out = {k: reach(k, power, self.env, self.net) for k in KINDS}
        out[serving] = r
        return out

    def void_exponent(self, serving, r):
        excl = self.exclusion(serving, r)
        return sum(self.mass(k, excl[k]) for k in KINDS)

    # -- typical cluster ------------------------------------------------
    def cluster_rho(self, d):
        """Horizontal lower limits per ring for a euclidean exclusion ``d``."""
        d = np.asarray(d, dtype=float)[..., None]
        return np.sqrt(np.maximum(d * d - self.h ** 2, 0.0))

    def cluster_tail_nodes(self, kind, d):
        """Nodes ``(x, w)`` over the part of the typical-cluster law where an
        ABS of LoS state ``kind`` is beyond euclidean distance ``d``.

        The LoS/NLoS probability is folded into ``w``; shape ``S + (N, 2n)``.
        """
        rho, w = cluster_nodes(self.plan, self.cluster_rho(d))
        hh = self.h[:, None]
        p = los_probability(rho, hh, self.env)
        if kind is N:
            p = 1 - p
        return np.sqrt(rho * rho + hh * hh), w * p

    def serving_state(self, serving, r, cluster=False):
        """Quantities shared by association and interference for a server of
        kind ``serving`` at distances ``r``: exclusion radii, the void
        exponent and, unless the server is the typical-cluster ABS, the
        cluster tail nodes and per-ring survival ``k_j``."""
        r = np.asarray(r, dtype=float)
        excl = self.exclusion(serving, r)
        state = {"excl": excl, "void": sum(self.mass(k, excl[k]) for k in KINDS)}
        if not cluster:
            tails = {k: self.cluster_tail_nodes(k, excl[k]) for k in (L, N)}
            k_j = np.clip(tails[L][1].sum(axis=-1) + tails[N][1].sum(axis=-1), 0.0, 1.0)
            state["tails"] = tails
            state["k"] = k_j
        return state

    def survival(self, serving, r):
        """``k_j``: probability the typical-cluster ABS of ring ``j`` (if any)
        loses to the server; shape ``S + (N,)``."""
        return self.serving_state(serving, r)["k"]

    def bracket(self, serving, r):
        return self.p_out_eff + self.survival(serving, r) @ self.p_eff

    def assoc_from_state(self, state, cluster=False):
        value = np.exp(-state["void"])
        if not cluster:
            value = value * (self.p_out_eff + state["k"] @ self.p_eff)
        return value

    # -- association probabilities -------------------------------------
    def assoc(self, serving, r, cluster=False):
        """Probability that a station of kind ``serving`` at ``r`` is the
        strongest; ``cluster=True`` for the typical-cluster ABS (no bracket)."""
        return self.assoc_from_state(self.serving_state(serving, r, cluster), cluster)

    def cluster_serving_density(self, kind, r):
        """Density in ``r`` of the typical-cluster ABS being at euclidean
        distance ``r`` in LoS state ``kind``, weighted by ring probabilities."""
        r = np.asarray(r, dtype=float)[..., None]
        hh = self.h
        rho = np.sqrt(np.maximum(r * r - hh * hh, 0.0))
        R_0 = self.net.R_0
        Ru = self.R_u
        inner = rho <= R_0 - Ru
        safe_rho = np.where(rho > 0, rho, 1.0)
        safe_ru = np.where(Ru > 0, Ru, 1.0)
        c = (Ru ** 2 + rho ** 2 - R_0 ** 2) / (2 * safe_ru * safe_rho)
        outer = 2 / (np.pi * R_0 ** 2) * np.arccos(np.clip(c, -1.0, 1.0))
        f_over_rho = np.where(inner, 2 / R_0 ** 2, np.where(rho < R_0 + Ru, outer, 0.0))
        p = los_probability(rho, hh, self.env)
        if kind is N:
            p = 1 - p
        dens = np.where(r >= hh, r * f_over_rho * p, 0.0)
        return dens @ self.p_eff

    # -- integration support -------------------------------------------
    def serving_density(self, kind, r, cluster=False):
        if cluster:
            return self.cluster_serving_density(kind, r)
        return self.density(kind, r)

    def breakpoints(self, kind, cluster=False):
        if cluster:
            R_0 = self.net.R_0
            pts = [self.h, np.sqrt((R_0 - self.R_u) ** 2 + self.h ** 2),
                   np.sqrt((R_0 + self.R_u) ** 2 + self.h ** 2)]
            return np.unique(np.concatenate(pts))
        if kind is T:
            return np.array([])
        return self.field.breakpoints

    def support(self, kind, cluster=False):
        if cluster:
            R_0 = self.net.R_0
            return float(self.h.min()), float(np.sqrt((R_0 + self.R_u) ** 2 + self.h ** 2).max())
        if kind is T:
            return 0.0, self.window
        return float(self.h.min()), self.x_max

    def family_integral(self, kind, weight, cluster=False, spec=None):
        """``int density * A * weight(r) dr`` over the support of the family.

        ``weight(r, state)`` gives the conditional quantity being averaged
        (1 for association mass, the conditional coverage for coverage);
        ``state`` is the :meth:`serving_state` of the batch.
        """
        lo, hi = self.support(kind, cluster)
        bp = self.breakpoints(kind, cluster)
        if kind is T and not cluster:
            # geometric breakpoints help the adaptive rule with the e^{-r^2} decay
            bp = lo + hi * 2.0 ** -np.arange(1, 14)

        def integrand(r):
            dens = self.serving_density(kind, r, cluster)
            out = np.zeros_like(r)
            live = dens > 0
            if np.any(live):
                rl = r[live]
                state = self.serving_state(kind, rl, cluster)
                out[live] = dens[live] * self.assoc_from_state(state, cluster) * weight(rl, state)
            return out

        return integrate_finite(integrand, lo, hi, spec or self.outer, breakpoints=bp)


@lru_cache(maxsize=16)
def analysis_context(plan, settings=Settings()):
    return AnalysisContext(plan, settings)


def _support_mask(r, floor):
    r = np.asarray(r, dtype=float)
    return r >= floor


def assoc_prob_tbs(r, plan, settings=Settings()):
    """Probability that the nearest TBS, at distance ``r``, is the strongest
    station (the void of the TBS process itself is not included)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ParameterError("r must be >= 0")
    ctx = analysis_context(plan, settings)
    return np.minimum(ctx.assoc(T, r) * np.exp(ctx.mass(T, r)), 1.0)


def assoc_prob_aerial(is_los, r, ring, plan, settings=Settings()):
    """Probability that the nearest ring-``ring`` ABS of the given LoS state,
    at euclidean distance ``r``, is the strongest station; 0 below the ring
    altitude. The void of that ring's own process is not included."""
    ctx = analysis_context(plan, settings)
    if not 1 <= int(ring) <= plan.N:
        raise ParameterError(f"ring index {ring} outside 1..{plan.N}")
    kind = L if is_los else N
    r = np.asarray(r, dtype=float)
    h = plan.rings[int(ring) - 1].h_u
    ok = _support_mask(r, h)
    rr = np.where(ok, r, h)
    own = ring_mass(kind, rr, plan, ring, window=ctx.window)
    return np.where(ok, np.minimum(ctx.assoc(kind, rr) * np.exp(own), 1.0), 0.0)


def assoc_prob_cluster(is_los, r, j, plan, settings=Settings()):
    """Probability that the typical-cluster ABS (ring ``j``) at ``r`` wins."""
    ctx = analysis_context(plan, settings)
    if not 1 <= int(j) <= plan.N:
        raise ParameterError(f"ring index {j} outside 1..{plan.N}")
    kind = L if is_los else N
    r = np.asarray(r, dtype=float)
    h = plan.rings[int(j) - 1].h_u
    ok = _support_mask(r, h)
    return np.where(ok, ctx.assoc(kind, np.where(ok, r, h), cluster=True), 0.0)


def assoc_prob_cluster_mixture(r, plan, settings=Settings()):
    """Ring-averaged probability that the typical-cluster ABS at euclidean
    distance ``r`` serves, mixing rings by their weights and LoS states by
    the LoS probability at the implied horizontal distance."""
    ctx = analysis_context(plan, settings)
    r = np.asarray(r, dtype=float)
    rr = r[..., None]
    rho = np.sqrt(np.maximum(rr * rr - ctx.h ** 2, 0.0))
    p_los = los_probability(rho, ctx.h, ctx.env)
    floor = max(float(ctx.h.min()), 1e-9)
    safe = np.maximum(r, floor)
    a_l = ctx.assoc(L, safe, cluster=True)[..., None]
    a_n = ctx.assoc(N, safe, cluster=True)[..., None]
    terms = np.where(rr >= ctx.h, a_l * p_los + a_n * (1 - p_los), 0.0)
    return terms @ ctx.p_eff


def association_masses(plan, settings=Settings()):
    """Probability that the server is a TBS, a LoS ABS, an NLoS ABS, or the
    typical-cluster ABS in either LoS state. The values sum to one."""
    ctx = analysis_context(plan, settings)
    def one(r, state):
        return np.ones_like(r)

    out = {}
    for name, kind, cluster in (("tbs", T, False), ("los", L, False), ("nlos", N, False),
                                ("cluster_los", L, True), ("cluster_nlos", N, True)):
        out[name] = ctx.family_integral(kind, one, cluster)[0]
    return out
