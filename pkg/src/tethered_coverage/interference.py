"""Laplace transform of the aggregate interference seen by the typical user,
conditioned on the serving station's kind and distance.

Interferers of kind ``Q`` lie beyond the exclusion radius of the server and
contribute the PGFL factor ``exp(-int kappa_Q(s, x) Lambda_Q(x) dx)`` with
``kappa = 1 - (1 + s rho eta x^-alpha / m)^-m`` (Nakagami-m fading). Unless it
is the server, the typical-cluster ABS contributes a mixture over rings of
its conditional Laplace factor.

All integrals run up to the finite window used for the masses. With
``alpha_L = 2`` and a nonzero LoS probability at the horizon the LoS
interference of the unbounded plane diverges logarithmically, so a finite
window is part of the model rather than a numerical convenience.
"""
from dataclasses import dataclass, field

import numpy as np

from .association import KINDS, L, N, T, AnalysisContext, analysis_context
from .channel import link_tuple
from .model import ParameterError, Settings
from .numerics import NumericalError, gauss_legendre_unit

_SEG_NODES = 8


def _kappa(s, K, xa, m):
    """``kappa`` and its s-derivative for integer shape ``m``; ``xa`` holds
    ``x^-alpha`` and broadcasts against ``s``."""
    inv = 1.0 / (1.0 + s * K * xa / m)
    pw = inv
    for _ in range(int(m) - 1):
        pw = pw * inv
    return 1.0 - pw, K * xa * pw * inv


def _log_gl(lo, hi, n):
    t, w = gauss_legendre_unit(n)
    ratio = np.log(hi / lo)
    x = lo[..., None] * np.exp(ratio[..., None] * t)
    return x, x * ratio[..., None] * w


class _Interferers:
    """Quadrature for ``int_D^X kappa(x) Lambda(x) dx`` per interferer kind.

    Segment edges are fixed per kind (ring altitudes, then geometric), so
    nodes of every segment above ``D`` are precomputed together with their
    density; only the segment containing ``D`` is integrated afresh.
    """

    def __init__(self, ctx, n=_SEG_NODES):
        self.ctx = ctx
        self.n = n
        W = ctx.window
        h_max = float(ctx.h.max())
        geo = h_max * 2.0 ** np.arange(1, 64)
        aerial_edges = np.unique(np.concatenate([ctx.h, geo[geo < W], [W, ctx.field.x_max]]))
        tbs_edges = np.unique(np.concatenate([W * 2.0 ** -np.arange(0, 20)[::-1]]))
        self.edges = {T: tbs_edges, L: aerial_edges, N: aerial_edges}
        self.fixed = {}
        for kind, edges in self.edges.items():
            lo, hi = edges[:-1], edges[1:]
            # narrow cells between neighbouring altitudes need fewer nodes
            nodes = []
            for size in (n // 2, n):
                sel = (hi / lo < 1.1) if size < n else (hi / lo >= 1.1)
                if np.any(sel):
                    x, w = _log_gl(lo[sel], hi[sel], size)
                    nodes.append((x.ravel(), w.ravel(), np.repeat(lo[sel], size)))
            x = np.concatenate([v[0] for v in nodes])
            w = np.concatenate([v[1] for v in nodes])
            seg_lo = np.concatenate([v[2] for v in nodes])
            wd = w * self.density(kind, x)
            keep = wd > 0
            self.fixed[kind] = (x[keep], wd[keep], seg_lo[keep])

    def density(self, kind, x):
        if kind is T:
            return self.ctx.density(T, x)
        return self.ctx.field.density_direct(kind, x)

    def partial(self, kind, D):
        """Nodes on ``[D, first edge above D]``; shape ``S + (n,)``."""
        edges = self.edges[kind]
        D = np.asarray(D, dtype=float)
        k = np.searchsorted(edges, D, side="left")
        top = np.where(k < edges.size, edges[np.minimum(k, edges.size - 1)], D)
        x, w = _log_gl(np.minimum(D, top), top, self.n)
        if kind is T:
            dens = self.ctx.density(T, x)
        else:
            dens = self.ctx.field.tables[kind].slope(x)
        return x, w * dens

    def exponent(self, kind, D, s, K, alpha, m, derivative):
        """``int_D kappa Lambda`` and its s-derivative; ``s`` is ``S + (k,)``."""
        x_f, wd_f, lo_f = self.fixed[kind]
        D = np.asarray(D, dtype=float)
        mask = lo_f >= D[..., None]
        xa_f = x_f ** -alpha
        kap, dkap = _kappa(s[..., None], K, xa_f, m)
        wm = np.where(mask, wd_f, 0.0)[..., None, :]
        val = np.sum(kap * wm, axis=-1)
        dval = np.sum(dkap * wm, axis=-1) if derivative else None
        x_p, wd_p = self.partial(kind, D)
        kap, dkap = _kappa(s[..., None], K, (x_p ** -alpha)[..., None, :], m)
        val = val + np.sum(kap * wd_p[..., None, :], axis=-1)
        if derivative:
            dval = dval + np.sum(dkap * wd_p[..., None, :], axis=-1)
        return val, dval


@dataclass
class LaplaceContext:
    """Serving kind and distance plus derived exclusion radii.

    ``cluster`` marks the typical-cluster ABS as the server. ``limits`` maps
    each interferer kind to the radius beyond which it interferes, and
    ``k`` holds the per-ring probability that the typical-cluster ABS loses
    to the server (``None`` when it is the server).
    """

    serving: object
    r: float
    plan: object
    settings: Settings = field(default_factory=Settings)
    cluster: bool = False
    limits: dict = field(init=False)
    k: object = field(init=False)

    def __post_init__(self):
        if self.serving not in KINDS:
            raise ParameterError(f"unknown serving kind {self.serving!r}")
        if self.cluster and self.serving is T:
            raise ParameterError("the typical-cluster ABS is aerial")
        ctx = analysis_context(self.plan, self.settings)
        self.limits = {k: float(v) for k, v in ctx.exclusion(self.serving, self.r).items()}
        self.k = None if self.cluster else ctx.survival(self.serving, self.r)


def cluster_survival_normalizer(lctx):
    """Per-ring probability that the typical-cluster ABS loses to the server."""
    if lctx.cluster:
        raise ParameterError("the server is the typical-cluster ABS")
    return lctx.k


class LaplaceEvaluator:
    """Vectorized log-Laplace of the interference for one analysis context."""

    def __init__(self, ctx: AnalysisContext):
        self.ctx = ctx
        self.env, self.net = ctx.env, ctx.net
        self.interferers = _Interferers(ctx)
        self.tuples = {k: link_tuple(k, self.env, self.net) for k in KINDS}

    def log_laplace(self, serving, r, s, cluster=False, derivative=False, state=None):
        """``log L_I(s)`` (and its s-derivative) given a server of kind
        ``serving`` at distance ``r``.

        ``r`` has shape ``S``; ``s`` has shape ``S + (k,)``. ``state`` is the
        matching :meth:`AnalysisContext.serving_state`, computed if omitted.
        """
        ctx = self.ctx
        r = np.asarray(r, dtype=float)
        s = np.asarray(s, dtype=float)
        if state is None:
            state = ctx.serving_state(serving, r, cluster)
        excl = state["excl"]
        log_l = np.zeros(s.shape)
        dlog = np.zeros(s.shape)
        for kind in KINDS:
            rho, eta, alpha, m = self.tuples[kind]
            val, dval = self.interferers.exponent(kind, excl[kind], s, rho * eta, alpha, m, derivative)
            log_l -= val
            if derivative:
                dlog -= dval
        if not cluster:
            b, db = self._bracket(state, s, derivative)
            log_l += np.log(b)
            if derivative:
                dlog += db / b
        if not np.all(np.isfinite(log_l)):
            raise NumericalError(f"non-finite Laplace transform for {serving} server")
        return (log_l, dlog) if derivative else log_l

    def _bracket(self, state, s, derivative):
        ctx = self.ctx
        J = 0.0
        dJ = np.zeros(s.shape + (ctx.plan.N,))
        for kind in (L, N):
            rho, eta, alpha, m = self.tuples[kind]
            x, w = state["tails"][kind]
            kap, dkap = _kappa(s[..., None, None], rho * eta, (x ** -alpha)[..., None, :, :], m)
            wk = w[..., None, :, :]
            J = J + np.sum(wk * (1 - kap), axis=-1)
            if derivative:
                dJ = dJ - np.sum(wk * dkap, axis=-1)
        k = state["k"][..., None, :]
        p_eff, p_out = ctx.p_eff, ctx.p_out_eff
        if ctx.settings.laplace_bracket == "per_ring":
            safe = np.where(k > 0, k, 1.0)
            b = p_out + np.where(k > 0, J / safe, 0.0) @ p_eff
            db = np.where(k > 0, dJ / safe, 0.0) @ p_eff
        else:
            norm = p_out + k @ p_eff
            b = (p_out + J @ p_eff) / norm
            db = (dJ @ p_eff) / norm
        return b, db


def laplace_interference(s, lctx):
    """Laplace transform of the interference at ``s`` (scalar or array)."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s_arr < 0):
        raise ParameterError("s must be >= 0")
    ev = laplace_evaluator(lctx.plan, lctx.settings)
    out = np.exp(ev.log_laplace(lctx.serving, np.asarray(lctx.r, dtype=float),
                                s_arr, cluster=lctx.cluster))
    return float(out[0]) if np.ndim(s) == 0 else out


_EVALUATORS = {}


def laplace_evaluator(plan, settings=Settings()):
    key = (plan, settings)
    ev = _EVALUATORS.get(key)
    if ev is None:
        if len(_EVALUATORS) > 16:
            _EVALUATORS.clear()
        ev = _EVALUATORS[key] = LaplaceEvaluator(analysis_context(plan, settings))
    return ev
