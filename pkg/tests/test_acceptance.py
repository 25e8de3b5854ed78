"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Criterion 1 runs at the default 5 km window. The sweep criteria (2 to 7) use
the equal-area window of the 400 km square region behind the published
curves; see the README for the window discussion.
"""
from dataclasses import replace
import math

import numpy as np
import pytest

from tethered_coverage.association import association_masses
from tethered_coverage.channel import LinkKind
from tethered_coverage.coverage import DELTA_GRID, coverage_probability, optimal_delta
from tethered_coverage import distributions as dist
from tethered_coverage.interference import LaplaceContext, laplace_interference
from tethered_coverage.model import FIGURE_WINDOW_RADIUS, PER_KM2, Settings, preset
from tethered_coverage.montecarlo import empirical_oracles, simulate_coverage
from tethered_coverage.numerics import substream
from tethered_coverage.placement import build_deployment_plan

T, L, N = LinkKind.TERRESTRIAL, LinkKind.AERIAL_LOS, LinkKind.AERIAL_NLOS
FIG = Settings(window_radius=FIGURE_WINDOW_RADIUS)
KAPPA_B_GRID = (0.01, 0.02, 0.04, 0.06, 0.08, 0.1)


def _cov(env, net, settings=FIG, **kw):
    return coverage_probability(env, net, settings=settings, **kw).total


def _sweep(env, net, param, values, settings=FIG):
    return [(v, _cov(env, replace(net, **{param: v}), settings)) for v in values]


def _fmt(pairs):
    return ", ".join(f"{v:g}:{c:.4f}" for v, c in pairs)


def test_criterion_1_consistency(criterion):
    env, net = preset("urban")
    settings = Settings()
    plan = build_deployment_plan(env, net)
    ana = coverage_probability(env, net, settings=settings, plan=plan).total
    est = simulate_coverage(env, net, plan, trials=10_000, settings=settings)
    gap = abs(ana - est.estimate)
    ok = criterion(1, gap <= 0.03, f"analytic {ana:.4f} vs MC {est.estimate:.4f} "
                                   f"(+/-{est.half_width:.4f}), gap {gap:.4f} <= 0.03")
    assert ok


def test_criterion_2_urban_tether_optimum(criterion):
    env, net = preset("urban")
    curve = _sweep(env, replace(net, delta=1.0), "T_max", range(50, 121, 10))
    best = max(curve, key=lambda p: p[1])[0]
    ok = criterion(2, abs(best - 80) <= 10, f"argmax T_max {best} (80 +/- 10); {_fmt(curve)}")
    assert ok


def test_criterion_3_suburban_tether_trend(criterion):
    env, net = preset("suburban")
    curve = _sweep(env, replace(net, delta=1.0), "T_max", range(50, 121, 10))
    vals = [c for _, c in curve]
    dec = all(b < a for a, b in zip(vals, vals[1:]))
    ends = abs(vals[0] - 0.57) <= 0.05 and abs(vals[-1] - 0.28) <= 0.05
    ok = criterion(3, dec and ends, f"strictly decreasing {dec}; ends {vals[0]:.4f} (0.57) "
                                    f"{vals[-1]:.4f} (0.28) +/-0.05")
    assert ok


def test_criterion_4_delta_optima(criterion):
    found = {}
    for name in ("suburban", "urban"):
        env, net = preset(name)
        curve = _sweep(env, net, "delta", DELTA_GRID)
        found[name] = (max(curve, key=lambda p: p[1])[0], curve)
    sub, urb = found["suburban"][0], found["urban"][0]
    ok = abs(sub - 0.2) <= 0.1 + 1e-9 and abs(urb - 0.5) <= 0.1 + 1e-9
    criterion(4, ok, f"argmax suburban {sub} (0.2 +/- 0.1), urban {urb} (0.5 +/- 0.1); "
                     f"urban curve {_fmt(found['urban'][1])}")
    assert ok


def test_criterion_5_cluster_density_trend(criterion):
    env, net = preset("suburban")
    ends = []
    for lam in (1.0, 10.0):
        d, res = optimal_delta(env, replace(net, lambda_C=lam * PER_KM2), settings=FIG)
        ends.append((d, res.total))
    ok = abs(ends[0][1] - 0.74) <= 0.05 and abs(ends[1][1] - 0.22) <= 0.05
    criterion(5, ok, f"lambda_C 1/km2 -> {ends[0][1]:.4f} (delta {ends[0][0]}), "
                     f"10/km2 -> {ends[1][1]:.4f} (delta {ends[1][0]}); targets 0.74, 0.22 +/-0.05")
    assert ok


def test_criterion_6_cluster_radius_trend(criterion):
    env, net = preset("suburban")
    curve = _sweep(env, net, "R_0", range(100, 501, 100))
    a, b = curve[0][1], curve[-1][1]
    ok = abs(a - 0.65) <= 0.05 and abs(b - 0.25) <= 0.05
    criterion(6, ok, f"R_0 100 m -> {a:.4f} (0.65), 500 m -> {b:.4f} (0.25) +/-0.05; {_fmt(curve)}")
    assert ok


def test_criterion_7_dominance(criterion):
    # the optimum over delta is at least the first grid value found above the
    # reference, so the search may stop there
    lines, ok = [], True
    for name in ("suburban", "urban"):
        env, net = preset(name)
        for kb in KAPPA_B_GRID:
            point = replace(net, kappa_b=kb)
            ref = _cov(env, replace(point, delta=1.0), reference=True)
            best = -1.0
            for d in sorted(DELTA_GRID, reverse=True):
                best = max(best, _cov(env, replace(point, delta=d)))
                if best >= ref:
                    break
            ok &= best >= ref
            lines.append(f"{name[0]}{kb:g}:{best:.3f}>={ref:.3f}")
    criterion(7, ok, "proposed (lower bound of optimum) vs reference: " + " ".join(lines))
    assert ok


def test_criterion_8_properties(criterion):
    checks = {}
    for name in ("urban", "suburban"):
        env, net = preset(name)
        plan = build_deployment_plan(env, net)
        checks[f"{name} partition"] = abs(sum(association_masses(plan).values()) - 1) <= 1e-3
        checks[f"{name} ring probabilities"] = abs(plan.p.sum() + plan.p_out - 1) <= 1e-12

        d_ok, fd_ok = True, True
        for kind, ring in ((T, None), (L, 1), (L, plan.N), (N, 1), (N, plan.N)):
            lo = 0.0 if ring is None else plan.h[ring - 1]
            x = np.linspace(lo + 1.0, lo + 3000.0, 300)
            F = dist.nearest_cdf(kind, x, plan, ring=ring)
            d_ok &= bool(np.all(np.diff(F) >= 0))
            fd = (dist.nearest_cdf(kind, x + 1e-3, plan, ring=ring)
                  - dist.nearest_cdf(kind, x - 1e-3, plan, ring=ring)) / 2e-3
            p = dist.nearest_pdf(kind, x, plan, ring=ring)
            fd_ok &= bool(np.max(np.abs(fd - p)) <= 1e-4 * np.max(p))
        for j in (1, plan.N):
            x = np.linspace(1.0, net.R_0 + plan.R_u[j - 1] - 1.0, 300)
            F = dist.cluster_horizontal_cdf(x, j, plan)
            d_ok &= bool(np.all(np.diff(F) >= 0))
            fd = (dist.cluster_horizontal_cdf(x + 1e-4, j, plan)
                  - dist.cluster_horizontal_cdf(x - 1e-4, j, plan)) / 2e-4
            p = dist.cluster_horizontal_pdf(x, j, plan)
            fd_ok &= bool(np.max(np.abs(fd - p)) <= 1e-4 * np.max(p))
        checks[f"{name} cdf monotone"] = d_ok
        checks[f"{name} pdf vs cdf"] = fd_ok

        s = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 40)]) / (net.rho_T * env.eta_T * 60.0 ** -net.alpha_T)
        lap = laplace_interference(s, LaplaceContext(T, 60.0, plan))
        checks[f"{name} L(0) = 1"] = lap[0] == 1.0
        checks[f"{name} L nonincreasing"] = bool(np.all(np.diff(lap) <= 0))

        ray = replace(env, m_T=1, m_L=1, m_N=1)
        a = coverage_probability(ray, net, "approximate").total
        b = coverage_probability(ray, net, "exact").total
        checks[f"{name} Rayleigh exact = approximate"] = abs(a - b) <= 1e-9
        g = [coverage_probability(env, net, gamma=x).total for x in (0.1, 1.0, 10.0)]
        checks[f"{name} P_cov nonincreasing in gamma"] = g[0] >= g[1] >= g[2]
    failed = [k for k, v in checks.items() if not v]
    ok = criterion(8, not failed, f"{len(checks) - len(failed)}/{len(checks)} properties hold"
                                  + (f"; failed: {', '.join(failed)}" if failed else ""))
    assert ok


def test_criterion_9_oracles(criterion):
    failures, count, worst = [], 0, {}
    for name in ("urban", "suburban"):
        env, net = preset(name)
        plan = build_deployment_plan(env, net)
        checks = empirical_oracles(env, net, plan, 100_000, substream(2024, 10_001),
                                   trials=40_000, rings=range(1, plan.N + 1))
        count += len(checks)
        failures += [f"{name}:{c.name}" for c in checks if not c.passed]
        for c in checks:
            group = c.name.split("_")[0]
            worst[group] = max(worst.get(group, 0.0), c.gap / c.tolerance)

        settings = Settings()
        W = settings.window_radius
        a = simulate_coverage(env, net, plan, trials=10_000, window_radius=W, seed=91)
        b = simulate_coverage(env, net, plan, trials=10_000, window_radius=2 * W, seed=92)
        count += 1
        diff = abs(a.estimate - b.estimate)
        if diff > math.hypot(a.half_width, b.half_width):
            drift = (coverage_probability(env, net, settings=settings).total
                     - coverage_probability(env, net, settings=replace(settings, window_radius=2 * W)).total)
            failures.append(f"{name}:window doubling (MC change {diff:.4f}, "
                            f"analytic change {drift:.4f})")
        c1 = simulate_coverage(env, net, plan, trials=3000, settings=settings, seed=5, workers=1)
        c4 = simulate_coverage(env, net, plan, trials=3000, settings=settings, seed=5, workers=4)
        count += 1
        if c1 != c4 or c1.serving != c4.serving:
            failures.append(f"{name}:thread count")
    ratios = ", ".join(f"{k} {v:.2f}" for k, v in sorted(worst.items()))
    ok = criterion(9, not failures, f"{count - len(failures)}/{count} checks pass; worst gap/tolerance: "
                                    f"{ratios}" + (f"; failed: {', '.join(failures)}" if failures else ""))
    assert ok
