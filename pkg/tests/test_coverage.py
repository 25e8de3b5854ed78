from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from tethered_coverage.channel import LinkKind
from tethered_coverage.coverage import (MAX_EXACT_SHAPE, coverage_probability, cond_coverage,
                                        optimal_delta)
from tethered_coverage.model import ParameterError, Settings, preset
from tethered_coverage.montecarlo import simulate_conditional
from tethered_coverage.placement import build_deployment_plan

T, L, N = LinkKind.TERRESTRIAL, LinkKind.AERIAL_LOS, LinkKind.AERIAL_NLOS


def test_urban_operating_point(urban):
    res = coverage_probability(*urban)
    assert 0.5 < res.total < 0.8
    assert res.total == pytest.approx(sum(res.contributions().values()), abs=1e-15)
    assert res.aerial == res.aerial_los + res.aerial_nlos


def test_rayleigh_exact_equals_approximate(urban):
    env, net = urban
    env = replace(env, m_L=1)
    a = coverage_probability(env, net, "approximate")
    b = coverage_probability(env, net, "exact")
    assert abs(a.total - b.total) <= 1e-9


@pytest.mark.parametrize("kind,r", [(T, 60.0), (N, 130.0)])
def test_rayleigh_conditional_methods_agree(urban_plan, kind, r):
    a = cond_coverage(kind, r, 1.0, "exact", urban_plan)
    b = cond_coverage(kind, r, 1.0, "approximate", urban_plan)
    assert abs(a - b) <= 1e-12


def test_low_threshold(urban_plan):
    for kind, r in ((T, 80.0), (L, 150.0)):
        for method in ("exact", "approximate"):
            assert cond_coverage(kind, r, 1e-9, method, urban_plan) == pytest.approx(1.0, abs=1e-6)


def test_conditional_exact_against_simulation(urban_plan):
    r = 140.0
    sample = simulate_conditional(urban_plan, L, r, gamma=1.0, trials=20_000, seed=31)
    exact = cond_coverage(L, r, 1.0, "exact", urban_plan)
    assert exact == pytest.approx(sample.coverage, abs=0.02)


def test_cubic_shape_uses_differences(urban):
    env, net = urban
    plan = build_deployment_plan(replace(env, m_L=3), net)
    r = np.array([120.0, 200.0])
    exact = cond_coverage(L, r, 1.0, "exact", plan)
    approx = cond_coverage(L, r, 1.0, "approximate", plan)
    assert np.all((exact >= 0) & (exact <= 1))
    # the bound-based approximation stays within a few percent of the exact value
    assert np.allclose(exact, approx, atol=0.03)


def test_large_shape_rejected(urban):
    env, net = urban
    env = replace(env, m_L=MAX_EXACT_SHAPE + 1)
    with pytest.raises(ParameterError):
        coverage_probability(env, net, "exact")
    assert 0 < coverage_probability(env, net, "approximate").total < 1


def test_noise_dominated(urban):
    env, net = urban
    assert coverage_probability(env, replace(net, sigma2=1e3)).total < 1e-6


def test_bad_arguments(urban, urban_plan):
    with pytest.raises(ParameterError):
        coverage_probability(*urban, method="bogus")
    with pytest.raises(ParameterError):
        cond_coverage(T, 10.0, -1.0, "exact", urban_plan)
    with pytest.raises(ParameterError):
        cond_coverage(L, 1.0, 1.0, "exact", urban_plan)


@hsettings(max_examples=6)
@given(st.lists(st.floats(0.05, 20.0), min_size=2, max_size=3, unique=True))
def test_nonincreasing_in_gamma(gammas):
    env, net = preset("urban")
    vals = [coverage_probability(env, net, "approximate", gamma=g).total for g in sorted(gammas)]
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


def test_conditional_nonincreasing_in_gamma(suburban_plan):
    g = np.geomspace(1e-3, 1e3, 25)
    for kind, r in ((T, 200.0), (L, 150.0), (N, 400.0)):
        vals = np.array([cond_coverage(kind, r, x, "exact", suburban_plan) for x in g])
        assert np.all(np.diff(vals) <= 1e-12)


def test_per_ring_shares(urban):
    res = coverage_probability(*urban, per_ring=True)
    for name in ("aerial_los", "cluster_los"):
        assert res.per_ring[name].shape == (50,)
        assert res.per_ring[name].sum() == pytest.approx(getattr(res, name), rel=1e-3, abs=1e-6)


def test_reference_configuration_differs(urban):
    a = coverage_probability(*urban)
    b = coverage_probability(*urban, reference=True)
    assert a.total != b.total


def test_optimal_delta_grid(suburban):
    env, net = suburban
    d, res = optimal_delta(env, net, grid=(0.2, 1.0))
    other = coverage_probability(env, replace(net, delta=1.2 - d))
    assert res.total >= other.total
    with pytest.raises(ParameterError):
        optimal_delta(env, net, grid=())
