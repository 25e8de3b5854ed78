import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tethered_coverage import association as assoc
from tethered_coverage.channel import LinkKind, los_probability
from tethered_coverage.interference import LaplaceContext, cluster_survival_normalizer
from tethered_coverage.model import ParameterError, Settings
from tethered_coverage.montecarlo import simulate_conditional
from tethered_coverage.placement import build_deployment_plan

T, L, N = LinkKind.TERRESTRIAL, LinkKind.AERIAL_LOS, LinkKind.AERIAL_NLOS


def test_exclusion_spot_value(urban_plan):
    d = assoc.exclusion_distance(L, T, 100.0, urban_plan)
    assert d == pytest.approx(2.5 ** (1 / 3) * 100 ** (2 / 3), rel=1e-12)
    assert d == pytest.approx(29.24, abs=5e-3)


def test_exclusion_identical_tuples(urban):
    env, net = urban
    env = replace(env, eta_L=0.1, eta_T=0.1)
    net = replace(net, rho_T=net.rho_ABS, alpha_T=net.alpha_L)
    plan = build_deployment_plan(env, net)
    r = np.array([30.0, 150.0, 900.0])
    assert np.allclose(assoc.exclusion_distance(L, T, r, plan), r, rtol=1e-13)
    assert np.allclose(assoc.exclusion_distance(T, L, r, plan), r, rtol=1e-13)


def test_exclusion_altitude_clamp(urban_plan):
    ring = 40
    h = urban_plan.rings[ring - 1].h_u
    # a TBS at 5 m beats any LoS ABS closer than a few metres: clamp to the altitude
    assert assoc.exclusion_distance(T, L, 5.0, urban_plan, ring=ring) == h


@given(st.floats(1, 5000), st.sampled_from([T, L, N]), st.sampled_from([T, L, N]),
       st.integers(1, 50))
def test_exclusion_respects_altitudes(r, s, q, ring):
    from tethered_coverage.model import preset
    plan = build_deployment_plan(*preset("urban"))
    d = assoc.exclusion_distance(s, q, r, plan, ring=ring)
    if q is not T:
        assert d >= plan.rings[ring - 1].h_u


def test_no_aerial_competitors(urban):
    env, net = urban
    plan = build_deployment_plan(env, replace(net, delta=0.0))
    r = np.array([1.0, 50.0, 400.0])
    assert np.allclose(assoc.assoc_prob_tbs(r, plan), 1.0, atol=0, rtol=1e-12)


def test_tbs_far_field(urban_plan):
    assert assoc.assoc_prob_tbs(4000.0, urban_plan) < 1e-6


def test_dense_tbs_kills_aerial(urban):
    env, net = urban
    plan = build_deployment_plan(env, replace(net, lambda_T=1e-2))
    assert assoc.assoc_prob_aerial(True, 150.0, 10, plan) < 1e-12


def test_lonely_cluster_abs(urban):
    env, net = urban
    plan = build_deployment_plan(env, replace(net, lambda_T=0.0, delta=0.0))
    assert assoc.assoc_prob_cluster(True, 130.0, 3, plan) == pytest.approx(1.0, abs=1e-15)


def test_no_aerial_server_without_abs(urban):
    from tethered_coverage.coverage import coverage_probability
    env, net = urban
    res = coverage_probability(env, replace(net, delta=0.0))
    assert res.aerial == 0.0 and res.cluster == 0.0


def test_mixture_below_altitudes(urban_plan):
    r = np.array([0.5, urban_plan.h.min() * 0.99])
    assert np.all(assoc.assoc_prob_cluster_mixture(r, urban_plan) == 0.0)


def test_mixture_recomposition(urban_plan):
    r = np.array([95.0, 130.0, 210.0])
    p = urban_plan.p
    total = np.zeros_like(r)
    for j in range(1, urban_plan.N + 1):
        h = urban_plan.rings[j - 1].h_u
        rho = np.sqrt(np.maximum(r * r - h * h, 0.0))
        pl = los_probability(rho, h, urban_plan.env)
        term = (assoc.assoc_prob_cluster(True, r, j, urban_plan) * pl
                + assoc.assoc_prob_cluster(False, r, j, urban_plan) * (1 - pl))
        total += p[j - 1] * term
    assert np.allclose(assoc.assoc_prob_cluster_mixture(r, urban_plan), total, rtol=1e-12, atol=0)


def test_survival_normalizer_is_shared(urban_plan):
    r = 60.0
    ctx = assoc.analysis_context(urban_plan, Settings())
    k = cluster_survival_normalizer(LaplaceContext(T, r, urban_plan))
    bracket = ctx.p_out_eff + k @ ctx.p_eff
    # the TBS's own void is excluded: it belongs to the nearest-TBS law
    void = math.exp(-float(ctx.void_exponent(T, np.array(r)) - ctx.mass(T, np.array(r))))
    assert assoc.assoc_prob_tbs(r, urban_plan) == pytest.approx(void * bracket, rel=1e-12)


def test_survival_limit(urban_plan):
    k = cluster_survival_normalizer(LaplaceContext(T, 1e-3, urban_plan))
    assert np.allclose(k, 1.0, atol=1e-12)


@pytest.mark.parametrize("name", ["urban", "suburban"])
@pytest.mark.parametrize("mode", ["thinned", "always"])
@pytest.mark.parametrize("delta", [1.0, 0.4])
def test_partition_of_unity(name, mode, delta, request):
    env, net = request.getfixturevalue(name)
    plan = build_deployment_plan(env, replace(net, delta=delta))
    masses = assoc.association_masses(plan, Settings(typical_cluster_mode=mode))
    assert abs(sum(masses.values()) - 1) <= 1e-3


def test_unknown_kind(urban_plan):
    with pytest.raises(ParameterError):
        assoc.exclusion_distance("x", T, 1.0, urban_plan)
    with pytest.raises(ParameterError):
        assoc.assoc_prob_aerial(True, 100.0, 0, urban_plan)


def test_planted_tbs_frequency(urban_plan):
    # a TBS planted at r wins when it beats every other station, its own process included
    r = 40.0
    sample = simulate_conditional(urban_plan, T, r, trials=20_000, seed=17)
    expected = assoc.assoc_prob_tbs(r, urban_plan) * math.exp(-math.pi * urban_plan.net.lambda_T * r * r)
    assert sample.accepted == pytest.approx(float(expected), abs=0.01)


def test_planted_los_frequency(urban_plan):
    r = 140.0
    sample = simulate_conditional(urban_plan, L, r, trials=20_000, seed=18)
    ctx = assoc.analysis_context(urban_plan, Settings())
    assert sample.accepted == pytest.approx(float(ctx.assoc(L, np.array([r]))[0]), abs=0.01)


def test_ring_association_excludes_own_void(urban_plan):
    from tethered_coverage.distributions import ring_mass
    ctx = assoc.analysis_context(urban_plan, Settings())
    r = np.array([120.0, 300.0])
    a = assoc.assoc_prob_aerial(True, r, 12, urban_plan)
    b = ctx.assoc(L, r) * np.exp(ring_mass(L, r, urban_plan, 12, window=ctx.window))
    assert np.allclose(a, b, rtol=1e-12)


@pytest.mark.parametrize("name", ["urban", "suburban"])
def test_association_in_unit_interval(name, request):
    plan = request.getfixturevalue(f"{name}_plan")
    r = np.linspace(plan.h.min(), 3000.0, 1000)
    for values in (assoc.assoc_prob_tbs(r, plan), assoc.assoc_prob_aerial(True, r, 5, plan),
                   assoc.assoc_prob_aerial(False, r, 45, plan),
                   assoc.assoc_prob_cluster(True, r, 9, plan), assoc.assoc_prob_cluster_mixture(r, plan)):
        assert np.all((values >= 0) & (values <= 1))


def test_exclusion_monotone(urban_plan):
    r = np.linspace(1, 3000, 500)
    for s in (T, L, N):
        for q in (T, L, N):
            assert np.all(np.diff(assoc.exclusion_distance(s, q, r, urban_plan, ring=7)) >= 0)
