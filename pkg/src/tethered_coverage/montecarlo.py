"""Monte-Carlo simulator of the full spatial model.

Every trial draws, inside a horizontal disk of radius ``window`` around the
typical user at the origin:

* TBSs: homogeneous PPP of intensity ``lambda_T``;
* cluster centres: PPP of intensity ``lambda_C`` (over a disk enlarged by
  ``R_0`` so displaced ABSs near the rim are not lost). Each cluster deploys
  a UAV with probability ``delta``; its rooftop ring is drawn from
  ``(p_1..p_N, p_out)`` (``p_out`` meaning no UAV) and the UAV sits at
  horizontal offset ``|R_u_i|`` from the centre at a uniform angle and
  altitude ``h_u_i``. ABSs ending outside the window are discarded;
* the typical cluster, whose centre lies at distance ``R_0 sqrt(U)`` (the
  user is uniform in its disk), populated per the typical-cluster mode.

Every ABS is LoS independently with the elevation-dependent probability.
The server is the station with the largest mean received power; ties
(probability zero) go to the first in the order TBS, LoS ABS, NLoS ABS,
typical-cluster ABS. Fading gains are Gamma(m, 1/m).

Trials run in blocks of ``BLOCK`` trials; block ``b`` uses the generator
``substream(seed, b)``, so results do not depend on how blocks are spread
over workers.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import math

import numpy as np

from .channel import LinkKind, link_tuple, los_probability
from .model import ParameterError, Settings
from .numerics import substream

BLOCK = 250
SERVER_NAMES = ("tbs", "los", "nlos", "cluster_los", "cluster_nlos", "none")
_T, _L, _N, _CL, _CN, _NONE = range(6)


@dataclass(frozen=True)
class SimEstimate:
    estimate: float
    half_width: float
    trials: int
    seed: int
    serving: dict = field(default=None, compare=False)
    covered_by: dict = field(default=None, compare=False)

    @property
    def ci_low(self):
        return max(0.0, self.estimate - self.half_width)

    @property
    def ci_high(self):
        return min(1.0, self.estimate + self.half_width)


def _estimate(hits, trials, seed, serving=None, covered_by=None):
    p = hits / trials
    return SimEstimate(p, 1.96 * math.sqrt(p * (1 - p) / trials), int(trials), int(seed),
                       serving, covered_by)


@dataclass
class Realization:
    """One draw of the network seen from the typical user at the origin."""

    tbs_xy: np.ndarray
    abs_xy: np.ndarray
    abs_h: np.ndarray
    abs_ring: np.ndarray
    abs_los: np.ndarray
    cluster_has_abs: bool
    cluster_ring: int
    cluster_xy: np.ndarray
    cluster_h: float
    cluster_los: bool


# --- sampling ----------------------------------------------------------------

def _padded_disk(rng, B, mean, radius):
    counts = rng.poisson(mean, size=B)
    width = max(int(counts.max()), 1)
    mask = np.arange(width) < counts[:, None]
    rad = radius * np.sqrt(rng.random((B, width)))
    ang = 2 * np.pi * rng.random((B, width))
    return rad * np.cos(ang), rad * np.sin(ang), mask


def _draw_geometry(plan, settings, B, rng):
    """Padded per-trial station arrays for ``B`` trials (no fading yet)."""
    env, net = plan.env, plan.net
    W = settings.window_radius
    R_0 = net.R_0
    Nr = plan.N
    h = plan.h
    Ru = plan.R_u
    probs = np.append(plan.p, plan.p_out)
    probs = probs / probs.sum()

    tx, ty, t_mask = _padded_disk(rng, B, net.lambda_T * math.pi * W * W, W)
    tbs_d = np.where(t_mask, np.hypot(tx, ty), np.inf)

    cx, cy, c_mask = _padded_disk(rng, B, net.lambda_C * math.pi * (W + R_0) ** 2, W + R_0)
    deployed = rng.random(cx.shape) < net.delta
    ring = rng.choice(Nr + 1, size=cx.shape, p=probs)
    ang = 2 * np.pi * rng.random(cx.shape)
    has = c_mask & deployed & (ring < Nr)
    ring_c = np.minimum(ring, Nr - 1)
    ax = cx + Ru[ring_c] * np.cos(ang)
    ay = cy + Ru[ring_c] * np.sin(ang)
    rho = np.hypot(ax, ay)
    has &= rho <= W
    ah = h[ring_c]
    los = rng.random(cx.shape) < los_probability(rho, ah, env)

    # typical cluster
    if settings.typical_cluster_mode == "thinned":
        t_dep = rng.random(B) < net.delta
    else:
        t_dep = np.ones(B, dtype=bool)
    t_ring = rng.choice(Nr + 1, size=B, p=probs)
    t_has = t_dep & (t_ring < Nr)
    t_ring_c = np.minimum(t_ring, Nr - 1)
    cr = R_0 * np.sqrt(rng.random(B))
    cang = 2 * np.pi * rng.random(B)
    uang = 2 * np.pi * rng.random(B)
    kx = cr * np.cos(cang) + Ru[t_ring_c] * np.cos(uang)
    ky = cr * np.sin(cang) + Ru[t_ring_c] * np.sin(uang)
    k_rho = np.hypot(kx, ky)
    k_h = h[t_ring_c]
    k_los = rng.random(B) < los_probability(k_rho, k_h, env)

    return {
        "tbs_xy": (tx, ty), "tbs_mask": t_mask, "tbs_d": tbs_d,
        "abs_xy": (ax, ay), "abs_mask": has, "abs_ring": ring_c, "abs_h": ah, "abs_los": los,
        "abs_d": np.where(has, np.hypot(rho, ah), np.inf),
        "cl_has": t_has, "cl_ring": t_ring_c, "cl_xy": (kx, ky), "cl_h": k_h, "cl_los": k_los,
        "cl_d": np.where(t_has, np.hypot(k_rho, k_h), np.inf),
    }


def sample_realization(env, net, plan, window_radius, rng, settings=Settings()):
    """Draw one realization of the network."""
    if window_radius <= 0:
        raise ParameterError("window_radius must be > 0")
    g = _draw_geometry(plan, replace(settings, window_radius=float(window_radius)), 1, rng)
    tm, am = g["tbs_mask"][0], g["abs_mask"][0]
    return Realization(
        tbs_xy=np.column_stack([g["tbs_xy"][0][0][tm], g["tbs_xy"][1][0][tm]]),
        abs_xy=np.column_stack([g["abs_xy"][0][0][am], g["abs_xy"][1][0][am]]),
        abs_h=g["abs_h"][0][am], abs_ring=g["abs_ring"][0][am] + 1, abs_los=g["abs_los"][0][am],
        cluster_has_abs=bool(g["cl_has"][0]), cluster_ring=int(g["cl_ring"][0]) + 1,
        cluster_xy=np.array([g["cl_xy"][0][0], g["cl_xy"][1][0]]),
        cluster_h=float(g["cl_h"][0]), cluster_los=bool(g["cl_los"][0]))


# --- evaluation --------------------------------------------------------------

def _link_arrays(plan, g, planted=None):
    """Stack all candidate stations as columns: TBS, aerial (LoS first),
    typical-cluster ABS, then an optional planted station.

    Returns mean powers, fading shapes and a per-column kind code.
    """
    env, net = plan.env, plan.net
    B = g["tbs_d"].shape[0]
    order = np.argsort(~g["abs_los"] | ~g["abs_mask"], axis=1, kind="stable")
    a_d = np.take_along_axis(g["abs_d"], order, 1)
    a_los = np.take_along_axis(g["abs_los"], order, 1)
    k_a = np.where(a_los, net.rho_ABS * env.eta_L, net.rho_ABS * env.eta_N)
    al_a = np.where(a_los, net.alpha_L, net.alpha_N)
    p_a = k_a * a_d ** (-al_a)
    m_a = np.where(a_los, env.m_L, env.m_N)
    kind_a = np.where(a_los, _L, _N)

    p_t = net.rho_T * env.eta_T * g["tbs_d"] ** (-net.alpha_T)
    m_t = np.full(p_t.shape, env.m_T)
    kind_t = np.full(p_t.shape, _T)

    c_los = g["cl_los"]
    k_c = np.where(c_los, net.rho_ABS * env.eta_L, net.rho_ABS * env.eta_N)
    al_c = np.where(c_los, net.alpha_L, net.alpha_N)
    p_c = (k_c * g["cl_d"] ** (-al_c))[:, None]
    m_c = np.where(c_los, env.m_L, env.m_N)[:, None]
    kind_c = np.where(c_los, _CL, _CN)[:, None]

    cols_p = [p_t, p_a, p_c]
    cols_m = [m_t, m_a, m_c]
    cols_k = [kind_t, kind_a, kind_c]
    if planted is not None:
        p_s, m_s, kind_s = planted
        cols_p.append(np.full((B, 1), p_s))
        cols_m.append(np.full((B, 1), m_s))
        cols_k.append(np.full((B, 1), kind_s))
    return np.concatenate(cols_p, 1), np.concatenate(cols_m, 1), np.concatenate(cols_k, 1)


def _serve(plan, g, gammas, rng):
    """Server kind per trial and coverage indicators for each threshold."""
    power, shape, kind = _link_arrays(plan, g)
    B = power.shape[0]
    idx = np.argmax(power, axis=1)
    rows = np.arange(B)
    best = power[rows, idx]
    fading = rng.gamma(shape, 1.0 / shape)
    rx = power * fading
    signal = rx[rows, idx]
    rx[rows, idx] = 0.0
    interference = rx.sum(axis=1)
    sinr = signal / (interference + plan.net.sigma2)
    served = best > 0
    server = np.where(served, kind[rows, idx], _NONE)
    covered = served[:, None] & (sinr[:, None] > np.asarray(gammas)[None, :])
    return server, covered


def _run_blocks(func, trials, seed, workers):
    n_blocks = -(-int(trials) // BLOCK)
    sizes = [min(BLOCK, trials - b * BLOCK) for b in range(n_blocks)]
    jobs = [(b, sizes[b]) for b in range(n_blocks)]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda job: func(job[1], substream(seed, job[0])), jobs))
    return [func(size, substream(seed, b)) for b, size in jobs]


def _resolve_seed(seed, rng):
    if seed is not None:
        return int(seed)
    if rng is not None:
        return int(rng.integers(0, 2 ** 63 - 1))
    return Settings().seed


def simulate_coverage(env, net, plan, trials=None, window_radius=None, rng=None, gamma=None,
                      settings=Settings(), seed=None, workers=None):
    """Fraction of trials in which the typical user's SINR exceeds ``gamma``.

    ``gamma`` may be a sequence, in which case a list of estimates (one per
    threshold, from the same trials) is returned. The seed is ``seed``, else
    drawn from ``rng``, else ``settings.seed``.
    """
    trials = int(settings.trials if trials is None else trials)
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if window_radius is not None:
        settings = replace(settings, window_radius=float(window_radius))
    if settings.window_radius <= 0:
        raise ParameterError("window_radius must be > 0")
    seed = _resolve_seed(seed if seed is not None else (None if rng is not None else settings.seed), rng)
    gammas = np.atleast_1d(np.asarray(net.gamma if gamma is None else gamma, dtype=float))
    workers = settings.workers if workers is None else workers

    def block(size, block_rng):
        g = _draw_geometry(plan, settings, size, block_rng)
        server, covered = _serve(plan, g, gammas, block_rng)
        by_server = np.stack([np.bincount(server, weights=covered[:, i], minlength=len(SERVER_NAMES))
                              for i in range(gammas.size)])
        return covered.sum(axis=0), np.bincount(server, minlength=len(SERVER_NAMES)), by_server

    parts = _run_blocks(block, trials, seed, workers)
    hits = sum(p[0] for p in parts)
    counts = sum(p[1] for p in parts)
    by_server = sum(p[2] for p in parts)
    serving = {name: int(c) for name, c in zip(SERVER_NAMES, counts)}
    out = [_estimate(float(h), trials, seed, serving,
                     {name: float(c) / trials for name, c in zip(SERVER_NAMES, row)})
           for h, row in zip(hits, by_server)]
    return out[0] if np.ndim(gamma if gamma is not None else net.gamma) == 0 else out


# --- conditional (planted) trials -----------------------------------------

@dataclass(frozen=True)
class ConditionalSample:
    """Outcome of planting a server of a given kind at distance ``r``.

    ``accepted`` is the fraction of trials in which the planted station is
    the strongest (its association probability); ``laplace`` the mean of
    ``exp(-s I)`` over accepted trials for each ``s``; ``coverage`` the
    fraction of accepted trials with SINR above ``gamma``.
    """

    accepted: float
    n_accepted: int
    trials: int
    laplace: np.ndarray
    laplace_se: np.ndarray
    coverage: float


def simulate_conditional(plan, kind, r, s_values=(), gamma=None, trials=20000, seed=0,
                         settings=Settings(), cluster=False, workers=None):
    """Planted-server trials for the association, Laplace and conditional
    coverage oracles.

    The network is drawn unconditionally and a station of ``kind`` is added
    at distance ``r`` (replacing the typical-cluster ABS when ``cluster``).
    Because the other processes are Poisson, the planted station wins with
    exactly its association probability, and the accepted trials follow the
    conditional law of the interference given that association.
    """
    env, net = plan.env, plan.net
    if kind is LinkKind.TERRESTRIAL:
        if cluster:
            raise ParameterError("the typical-cluster ABS is aerial")
        p_s, m_s, code = net.rho_T * env.eta_T * r ** (-net.alpha_T), env.m_T, _T
    elif kind is LinkKind.AERIAL_LOS:
        p_s, m_s, code = net.rho_ABS * env.eta_L * r ** (-net.alpha_L), env.m_L, _CL if cluster else _L
    else:
        p_s, m_s, code = net.rho_ABS * env.eta_N * r ** (-net.alpha_N), env.m_N, _CN if cluster else _N
    s_values = np.atleast_1d(np.asarray(s_values, dtype=float))
    gamma = net.gamma if gamma is None else gamma
    workers = settings.workers if workers is None else workers

    def block(size, block_rng):
        g = _draw_geometry(plan, settings, size, block_rng)
        if cluster:
            g["cl_d"] = np.full(size, np.inf)
        power, shape, _ = _link_arrays(plan, g, planted=(p_s, m_s, code))
        others = power[:, :-1].max(axis=1)
        acc = p_s > others
        fading = block_rng.gamma(shape, 1.0 / shape)
        rx = power * fading
        signal = rx[:, -1]
        interference = rx[:, :-1].sum(axis=1)
        lap = np.exp(-np.outer(interference[acc], s_values))
        cov = (signal / (interference + net.sigma2) > gamma)[acc]
        return acc.sum(), lap.sum(axis=0), (lap ** 2).sum(axis=0), cov.sum()

    parts = _run_blocks(block, int(trials), int(seed), workers)
    n_acc = int(sum(p[0] for p in parts))
    lap_sum = sum(p[1] for p in parts)
    lap_sq = sum(p[2] for p in parts)
    cov = sum(p[3] for p in parts)
    denom = max(n_acc, 1)
    mean = lap_sum / denom
    var = np.maximum(lap_sq / denom - mean ** 2, 0.0)
    return ConditionalSample(
        accepted=n_acc / trials, n_accepted=n_acc, trials=int(trials),
        laplace=mean, laplace_se=np.sqrt(var / denom), coverage=cov / denom)


# --- distance samplers for the distribution oracles -----------------------

def sample_nearest(plan, kind, samples, rng, ring=None, window=None, settings=Settings()):
    """Samples of the distance to the nearest station of ``kind``.

    Aerial samples are drawn for one ring through the cluster-centre and
    displacement construction; ``inf`` marks an empty window.
    """
    env, net = plan.env, plan.net
    W = settings.window_radius if window is None else window
    samples = int(samples)
    if kind is LinkKind.TERRESTRIAL:
        # nearest of a PPP in a disk, by the count-then-uniform construction
        out = np.full(samples, np.inf)
        done = 0
        while done < samples:
            n = min(BLOCK * 40, samples - done)
            x, y, mask = _padded_disk(rng, n, net.lambda_T * math.pi * W * W, W)
            d = np.where(mask, np.hypot(x, y), np.inf)
            out[done:done + n] = d.min(axis=1)
            done += n
        return out
    if ring is None or not 1 <= int(ring) <= plan.N:
        raise ParameterError("aerial samples need a ring index in 1..N")
    i = int(ring) - 1
    h = plan.h[i]
    Ru = plan.R_u[i]
    R_0 = net.R_0
    lam = net.lambda_C * net.delta * plan.p[i]
    out = np.full(samples, np.inf)
    done = 0
    while done < samples:
        n = min(BLOCK * 40, samples - done)
        cx, cy, mask = _padded_disk(rng, n, lam * math.pi * (W + R_0) ** 2, W + R_0)
        ang = 2 * np.pi * rng.random(cx.shape)
        rho = np.hypot(cx + Ru * np.cos(ang), cy + Ru * np.sin(ang))
        mask &= rho <= W
        los = rng.random(cx.shape) < los_probability(rho, h, env)
        keep = mask & (los if kind is LinkKind.AERIAL_LOS else ~los)
        d = np.where(keep, np.hypot(rho, h), np.inf)
        out[done:done + n] = d.min(axis=1)
        done += n
    return out


def sample_cluster_offset(plan, j, samples, rng):
    """Horizontal user-to-cluster-ABS distances: user uniform on the cluster
    disk, ABS at offset ``|R_u_j|`` from the centre (law of cosines)."""
    R_0 = plan.net.R_0
    Ru = plan.R_u[int(j) - 1]
    u = R_0 * np.sqrt(rng.random(samples))
    phi = 2 * np.pi * rng.random(samples)
    return np.sqrt(np.maximum(u * u + Ru * Ru - 2 * u * Ru * np.cos(phi), 0.0))


def ks_distance(samples, cdf):
    """Kolmogorov-Smirnov distance between samples and a (possibly
    defective) CDF; ``inf`` samples count toward the missing mass."""
    samples = np.sort(np.asarray(samples, dtype=float))
    n = samples.size
    finite = samples[np.isfinite(samples)]
    if finite.size == 0:
        return float(np.abs(cdf(np.array([1e12]))).max())
    F = np.asarray(cdf(finite), dtype=float)
    k = np.arange(1, finite.size + 1)
    return float(max(np.max(k / n - F), np.max(F - (k - 1) / n)))


# --- oracle report ----------------------------------------------------------

@dataclass(frozen=True)
class OracleCheck:
    """One empirical-versus-analytic comparison; passes when
    ``gap <= tolerance``."""

    name: str
    empirical: object
    analytic: object
    gap: float
    tolerance: float

    @property
    def passed(self):
        return bool(self.gap <= self.tolerance)


MIN_ORACLE_ASSOCIATION = 0.05


def _laplace_points(plan):
    """Serving kinds and distances at which the Laplace oracle is probed:
    a TBS at 50 m and each aerial kind just above the highest ABS."""
    h = float(plan.h.max())
    return ((LinkKind.TERRESTRIAL, 50.0, False), (LinkKind.AERIAL_LOS, 1.5 * h, False),
            (LinkKind.AERIAL_NLOS, 1.2 * h, False), (LinkKind.AERIAL_LOS, 1.2 * h, True))


def empirical_oracles(env, net, plan, samples, rng, settings=Settings(), trials=None,
                      rings=None):
    """Empirical counterparts of the analytic laws, each with its gap.

    Covers the nearest-distance CDFs (KS distance), the cluster offset law
    (KS), serving-kind frequencies, planted-server association
    probabilities, Laplace transforms on an ``s`` grid (max relative gap)
    and overall coverage. Laplace probes whose serving event has probability
    below ``MIN_ORACLE_ASSOCIATION`` are skipped.
    """
    from . import distributions
    from .association import analysis_context, association_masses
    from .coverage import coverage_probability
    from .interference import laplace_evaluator

    samples = int(samples)
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    trials = int(settings.trials if trials is None else trials)
    W = settings.window_radius
    seed = int(rng.integers(0, 2 ** 62))
    rings = sorted({1, plan.N // 2 or 1, plan.N}) if rings is None else list(rings)
    out = []

    def ks(name, draws, cdf):
        out.append(OracleCheck(name, None, None, ks_distance(draws, cdf), 0.01))

    ks("ks_nearest_tbs", sample_nearest(plan, LinkKind.TERRESTRIAL, samples, rng, settings=settings),
       lambda x: distributions.nearest_cdf(LinkKind.TERRESTRIAL, x, plan, window=W))
    for ring in rings:
        for kind, tag in ((LinkKind.AERIAL_LOS, "los"), (LinkKind.AERIAL_NLOS, "nlos")):
            draws = sample_nearest(plan, kind, samples, rng, ring=ring, settings=settings)
            ks(f"ks_nearest_{tag}_ring{ring}", draws,
               lambda x, kind=kind, ring=ring: distributions.nearest_cdf(kind, x, plan, ring=ring, window=W))
        ks(f"ks_cluster_offset_ring{ring}", sample_cluster_offset(plan, ring, samples, rng),
           lambda x, ring=ring: distributions.cluster_horizontal_cdf(x, ring, plan))

    est = simulate_coverage(env, net, plan, trials=trials, settings=settings, seed=seed)
    for name, mass in association_masses(plan, settings).items():
        freq = est.serving[name] / est.trials
        out.append(OracleCheck(f"association_{name}", freq, mass, abs(freq - mass), 0.01))
    ana = coverage_probability(env, net, "approximate", settings=settings, plan=plan)
    out.append(OracleCheck("coverage", est.estimate, ana.total, abs(est.estimate - ana.total), 0.03))

    ctx = analysis_context(plan, settings)
    ev = laplace_evaluator(plan, settings)
    for k, (kind, r, cluster) in enumerate(_laplace_points(plan)):
        if not cluster and ctx.assoc(kind, np.array([r]))[0] < MIN_ORACLE_ASSOCIATION:
            continue  # conditioning event too rare to sample
        rho, eta, alpha, _ = link_tuple(kind, env, net)
        s = np.array([0.5, 1.0, 2.0]) / (rho * eta * r ** -alpha)
        cond = simulate_conditional(plan, kind, r, s, trials=max(trials, 20_000), seed=seed + 1 + k,
                                    settings=settings, cluster=cluster)
        lap = np.exp(ev.log_laplace(kind, np.array([r]), s[None, :], cluster=cluster))[0]
        tag = ("cluster_" if cluster else "") + {"T": "tbs", "L": "los", "N": "nlos"}[kind.value]
        rel = np.abs(cond.laplace - lap) / lap
        i = int(np.argmax(rel))
        out.append(OracleCheck(f"laplace_{tag}_r{r:.0f}", float(cond.laplace[i]), float(lap[i]),
                               float(rel[i]), 0.02))
        if not cluster:
            acc = float(ctx.assoc(kind, np.array([r]))[0])
            out.append(OracleCheck(f"planted_association_{tag}_r{r:.0f}", cond.accepted, acc,
                                   abs(cond.accepted - acc), 0.01))
    return out
