"""Conditional and overall SINR coverage probability.

For a server of fading shape ``m`` at distance ``r`` with
``mu = m gamma r^alpha / (rho eta)`` and ``U = I + sigma^2``:

* exact: ``sum_{k<m} (-mu)^k / k! * d^k L_U / ds^k`` at ``s = mu``
  (the Gamma CCDF of the serving gain);
* approximate: ``sum_{k=1}^m C(m,k) (-1)^(k+1) L_U(k beta mu)`` with
  ``beta = (m!)^(-1/m)``, from the tight bound on the Gamma CDF.

Both coincide for ``m = 1``.
"""
from dataclasses import dataclass, field, replace
import math

import numpy as np

from .association import KINDS, L, N, T, analysis_context
from .channel import link_tuple, los_probability
from .interference import laplace_evaluator
from .model import ParameterError, Settings, check_params
from .numerics import NumericalError, gauss_legendre_unit
from .placement import build_deployment_plan

MAX_EXACT_SHAPE = 3
METHODS = ("exact", "approximate")
_RICHARDSON_STEP = 1e-4

FAMILIES = (("tbs", T, False), ("aerial_los", L, False), ("aerial_nlos", N, False),
            ("cluster_los", L, True), ("cluster_nlos", N, True))


@dataclass(frozen=True)
class CoverageResult:
    """Overall coverage split by the kind of the serving station.

    ``per_ring`` (when requested) maps ``aerial_los``, ``aerial_nlos``,
    ``cluster_los`` and ``cluster_nlos`` to arrays of per-ring shares.
    """

    total: float
    tbs: float
    aerial_los: float
    aerial_nlos: float
    cluster_los: float
    cluster_nlos: float
    method: str
    gamma: float
    tolerance: float
    per_ring: dict = field(default=None, compare=False)

    @property
    def aerial(self):
        return self.aerial_los + self.aerial_nlos

    @property
    def cluster(self):
        return self.cluster_los + self.cluster_nlos

    def contributions(self):
        return {name: getattr(self, name) for name, _, _ in FAMILIES}


def _check_method(method, m):
    if method not in METHODS:
        raise ParameterError(f"method must be one of {METHODS}")
    if method == "exact" and m > MAX_EXACT_SHAPE:
        raise ParameterError(
            f"exact method supports fading shape m <= {MAX_EXACT_SHAPE}, got {m}")


def _pcond(ev, kind, r, gamma, method, cluster, state=None):
    rho, eta, alpha, m = link_tuple(kind, ev.env, ev.net)
    _check_method(method, m)
    sigma2 = ev.net.sigma2
    r = np.asarray(r, dtype=float)
    mu = m * gamma * r ** alpha / (rho * eta)
    if method == "approximate" or m == 1:
        beta = 1.0 if method == "exact" else math.factorial(m) ** (-1.0 / m)
        k = np.arange(1, m + 1)
        s = k * beta * mu[..., None]
        log_l = ev.log_laplace(kind, r, s, cluster, state=state) - s * sigma2
        coef = np.array([math.comb(m, int(i)) * (-1) ** (int(i) + 1) for i in k], dtype=float)
        return np.exp(log_l) @ coef
    if m == 2:
        s = mu[..., None]
        log_l, d1 = ev.log_laplace(kind, r, s, cluster, derivative=True, state=state)
        log_l, d1 = log_l[..., 0] - mu * sigma2, d1[..., 0] - sigma2
        return np.exp(log_l) * (1 - mu * d1)
    # m == 3: second derivative of log L by Richardson-extrapolated differences
    h = _RICHARDSON_STEP
    factors = np.array([1.0, 1 + h, 1 - h, 1 + h / 2, 1 - h / 2])
    s = mu[..., None] * factors
    log_l, d = ev.log_laplace(kind, r, s, cluster, derivative=True, state=state)
    d = d - sigma2
    coarse = (d[..., 1] - d[..., 2]) / (2 * h * mu)
    fine = (d[..., 3] - d[..., 4]) / (h * mu)
    d2 = (4 * fine - coarse) / 3
    log_l0 = log_l[..., 0] - mu * sigma2
    d1 = d[..., 0]
    return np.exp(log_l0) * (1 - mu * d1 + 0.5 * mu * mu * (d2 + d1 * d1))


def cond_coverage(serving, r, gamma, method, plan, settings=Settings(), cluster=False):
    """Coverage probability given a ``serving`` station at distance ``r``.

    ``cluster=True`` selects the typical-cluster ABS as the server.
    """
    if serving not in KINDS:
        raise ParameterError(f"unknown serving kind {serving!r}")
    if not gamma > 0:
        raise ParameterError("gamma must be > 0")
    if cluster and serving is T:
        raise ParameterError("the typical-cluster ABS is aerial")
    ev = laplace_evaluator(plan, settings)
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if serving is not T and np.any(r_arr < plan.h.min()):
        raise ParameterError("r below every ABS altitude")
    out = _pcond(ev, serving, r_arr, float(gamma), method, cluster)
    return float(out[0]) if np.ndim(r) == 0 else out


def _family(ctx, ev, kind, cluster, gamma, method):
    return ctx.family_integral(kind, lambda r, state: _pcond(ev, kind, r, gamma, method, cluster, state), cluster)


def _per_ring(ctx, ev, kind, cluster, gamma, method, n=10):
    """Per-ring shares of one aerial family by composite Gauss-Legendre on
    the family's breakpoints (one evaluation of A * P_cond serves all rings)."""
    lo, hi = ctx.support(kind, cluster)
    edges = np.unique(np.concatenate([[lo], ctx.breakpoints(kind, cluster), [hi]]))
    edges = edges[(edges >= lo) & (edges <= hi)]
    if not cluster:
        extra = float(ctx.h.max()) * 1.25 ** np.arange(1, 40)
        edges = np.unique(np.concatenate([edges, extra[extra < hi]]))
    t, w = gauss_legendre_unit(n)
    a, b = edges[:-1, None], edges[1:, None]
    r = (a + (b - a) * t).ravel()
    wr = ((b - a) * w).ravel()
    g = ctx.assoc(kind, r, cluster) * _pcond(ev, kind, r, gamma, method, cluster) * wr
    rr = r[:, None]
    hh = ctx.h
    if cluster:
        R_0, Ru = ctx.net.R_0, ctx.R_u
        rho = np.sqrt(np.maximum(rr * rr - hh * hh, 0.0))
        safe_rho = np.where(rho > 0, rho, 1.0)
        safe_ru = np.where(Ru > 0, Ru, 1.0)
        c = (Ru ** 2 + rho ** 2 - R_0 ** 2) / (2 * safe_ru * safe_rho)
        outer = 2 / (np.pi * R_0 ** 2) * np.arccos(np.clip(c, -1.0, 1.0))
        f_over_rho = np.where(rho <= R_0 - Ru, 2 / R_0 ** 2, np.where(rho < R_0 + Ru, outer, 0.0))
        p = los_probability(rho, hh, ctx.env)
        if kind is N:
            p = 1 - p
        dens = np.where(rr >= hh, rr * f_over_rho * p, 0.0) * ctx.p_eff
    else:
        agg = ctx.field
        rho = np.sqrt(np.maximum(rr * rr - hh * hh, 0.0))
        p = los_probability(rho, hh, ctx.env)
        if kind is N:
            p = 1 - p
        active = (rr >= hh) & (rr < agg.edges)
        dens = np.where(active, 2 * math.pi * agg.lam * rr * p, 0.0)
    return g @ dens


def coverage_probability(env, net, method="approximate", gamma=None, settings=Settings(),
                         plan=None, reference=False, per_ring=False):
    """Overall coverage probability of the typical user.

    ``gamma`` defaults to ``net.gamma``. The deployment plan is built (and
    cached) from ``env, net`` unless given; ``reference=True`` uses the
    vertical full-length tether of every UAV instead of the optimal one.
    """
    check_params(env, net)
    gamma = float(net.gamma if gamma is None else gamma)
    if not gamma > 0:
        raise ParameterError("gamma must be > 0")
    if method not in METHODS:
        raise ParameterError(f"method must be one of {METHODS}")
    if plan is None:
        plan = build_deployment_plan(env, net, reference=reference)
    ctx = analysis_context(plan, settings)
    ev = laplace_evaluator(plan, settings)
    values, errors = {}, 0.0
    for name, kind, cluster in FAMILIES:
        try:
            value, err = _family(ctx, ev, kind, cluster, gamma, method)
        except NumericalError as exc:
            raise NumericalError(f"{name} family: {exc}", exc.value, exc.error) from exc
        values[name] = max(value, 0.0)
        errors += err
    rings = None
    if per_ring:
        rings = {name: _per_ring(ctx, ev, kind, cluster, gamma, method)
                 for name, kind, cluster in FAMILIES[1:]}
    total = sum(values.values())
    return CoverageResult(total=total, method=method, gamma=gamma, tolerance=errors,
                          per_ring=rings, **values)


DELTA_GRID = tuple(round(0.1 * k, 1) for k in range(1, 11))


def optimal_delta(env, net, method="approximate", settings=Settings(), grid=DELTA_GRID,
                  gamma=None):
    """Deployed-cluster fraction maximizing coverage over ``grid``.

    Returns ``(delta, CoverageResult)``; ties go to the smaller fraction.
    The placement does not depend on ``delta`` so one plan serves the grid.
    """
    if len(grid) == 0:
        raise ParameterError("delta grid is empty")
    best = None
    for d in grid:
        res = coverage_probability(env, replace(net, delta=float(d)), method, gamma, settings)
        if best is None or res.total > best[1].total:
            best = (float(d), res)
    return best
