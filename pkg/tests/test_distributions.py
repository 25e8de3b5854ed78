import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from tethered_coverage import distributions as dist
from tethered_coverage.channel import LinkKind, los_probability
from tethered_coverage.model import ParameterError
from tethered_coverage.montecarlo import ks_distance, sample_nearest
from tethered_coverage.placement import build_deployment_plan

T, L, N = LinkKind.TERRESTRIAL, LinkKind.AERIAL_LOS, LinkKind.AERIAL_NLOS


def _fd_check(cdf, pdf, x, step):
    fd = (cdf(x + step) - cdf(x - step)) / (2 * step)
    p = pdf(x)
    scale = np.max(np.abs(p))
    assert np.max(np.abs(fd - p)) <= 1e-4 * scale


def test_tbs_spot_value(urban, urban_plan):
    assert dist.nearest_cdf(T, 100.0, urban_plan) == pytest.approx(1 - math.exp(-math.pi * 0.1), rel=1e-12)
    assert float(dist.nearest_cdf(T, 100.0, urban_plan)) == pytest.approx(0.2695, abs=1e-4)


def test_aerial_floor(urban_plan):
    for ring in (1, 20, 50):
        h = urban_plan.rings[ring - 1].h_u
        assert dist.nearest_cdf(L, h, urban_plan, ring=ring) == 0.0
        assert dist.nearest_cdf(N, 0.5 * h, urban_plan, ring=ring) == 0.0


def test_aerial_mass_against_quad(suburban_plan):
    plan = suburban_plan
    ring = 17
    h = plan.rings[ring - 1].h_u
    lam = dist.ring_intensity(plan, ring)
    for d in (h * 1.001, 2 * h, 900.0, 5e4):
        rho = math.sqrt(d * d - h * h)
        exact, _ = integrate.quad(lambda x: 2 * math.pi * lam * x * los_probability(x, h, plan.env),
                                  0, rho, epsabs=0, epsrel=1e-11, limit=200)
        assert dist.ring_mass(L, d, plan, ring) == pytest.approx(exact, rel=1e-6)


def test_unknown_ring(urban_plan):
    with pytest.raises(ParameterError):
        dist.nearest_cdf(L, 300.0, urban_plan, ring=51)
    with pytest.raises(ParameterError):
        dist.nearest_pdf(N, 300.0, urban_plan)


@pytest.mark.parametrize("kind,ring", [(T, None), (L, 1), (L, 50), (N, 1), (N, 33)])
def test_nearest_cdf_monotone_and_pdf(urban_plan, kind, ring):
    lo = 0.0 if ring is None else urban_plan.rings[ring - 1].h_u
    d = np.linspace(lo + 1.0, lo + 3000.0, 400)
    F = dist.nearest_cdf(kind, d, urban_plan, ring=ring)
    assert np.all(np.diff(F) >= 0) and np.all((F >= 0) & (F <= 1))
    _fd_check(lambda x: dist.nearest_cdf(kind, x, urban_plan, ring=ring),
              lambda x: dist.nearest_pdf(kind, x, urban_plan, ring=ring), d, 1e-3)


def test_windowed_law_is_defective(suburban_plan):
    # a finite window holds finitely many ABSs, so the law keeps an atom at infinity
    mass = dist.ring_mass(N, 1e9, suburban_plan, 50, window=5000.0)
    F = dist.nearest_cdf(N, 1e9, suburban_plan, ring=50, window=5000.0)
    assert 0 < F < 1
    assert F == pytest.approx(-math.expm1(-mass), rel=1e-14)


def test_los_cdf_against_simulation(urban, urban_plan):
    rng = np.random.default_rng(21)
    W = 5000.0
    samples = sample_nearest(urban_plan, L, 100_000, rng, ring=10, window=W)
    assert ks_distance(samples, lambda x: dist.nearest_cdf(L, x, urban_plan, ring=10, window=W)) <= 0.01


def test_horizontal_cdf_spot_values():
    assert dist.horizontal_cdf(100.0, 50.0, 200.0) == pytest.approx(0.25, abs=1e-15)
    assert dist.horizontal_cdf(np.array([250.0, 400.0]), 50.0, 200.0).tolist() == [1.0, 1.0]
    assert dist.horizontal_cdf(0.0, 50.0, 200.0) == 0.0


@given(st.floats(10, 500), st.floats(0.01, 0.99))
def test_horizontal_branch_structure(R_0, frac):
    R_u = frac * R_0
    r = np.linspace(0, R_0 - R_u, 7)
    assert np.allclose(dist.horizontal_cdf(r, R_u, R_0), r * r / R_0 ** 2, atol=1e-14)
    assert dist.horizontal_cdf(R_0 + R_u, R_u, R_0) == 1.0


def test_outer_branch_against_geometric_sampling():
    R_0, R_u = 200.0, 50.0
    rng = np.random.default_rng(5)
    n = 1_000_000
    u = R_0 * np.sqrt(rng.random(n))
    phi = 2 * np.pi * rng.random(n)
    r = np.sqrt(u * u + R_u * R_u - 2 * u * R_u * np.cos(phi))
    grid = np.linspace(R_0 - R_u, R_0 + R_u, 81)
    emp = np.searchsorted(np.sort(r), grid, side="right") / n
    assert np.max(np.abs(emp - dist.horizontal_cdf(grid, R_u, R_0))) <= 2e-3


@given(st.floats(10, 500), st.floats(0.02, 0.98))
def test_horizontal_pdf_matches_cdf(R_0, frac):
    R_u = frac * R_0
    r = np.linspace(1e-3 * R_0, R_0 + R_u * 0.999, 300)
    r = r[np.abs(r - (R_0 - R_u)) > 1e-3 * R_0]
    _fd_check(lambda x: dist.horizontal_cdf(x, R_u, R_0), lambda x: dist.horizontal_pdf(x, R_u, R_0),
              r, 1e-6 * R_0)


def test_printed_derivative_matches_arccos_form():
    R_0, R_u = 200.0, 73.0
    r = np.linspace(R_0 - R_u + 1, R_0 + R_u - 1, 200)
    from tethered_coverage.placement import offset_pdf
    assert np.allclose(dist.horizontal_pdf(r, R_u, R_0), offset_pdf(r, R_u, R_0), rtol=1e-9, atol=0)


@pytest.mark.parametrize("j", [1, 25, 50])
def test_euclid_law(urban_plan, j):
    plan = urban_plan
    h, Ru, R_0 = plan.rings[j - 1].h_u, plan.R_u[j - 1], plan.net.R_0
    assert dist.cluster_euclid_cdf(h, j, plan) == 0.0
    top = math.hypot(R_0 + Ru, h)
    assert dist.cluster_euclid_cdf(top, j, plan) == pytest.approx(1.0, abs=1e-12)
    pts = sorted({math.hypot(R_0 - Ru, h)})
    mass, _ = integrate.quad(lambda d: float(dist.cluster_euclid_pdf(d, j, plan)), h, top,
                             points=pts, epsabs=1e-12, epsrel=1e-10, limit=400)
    assert abs(mass - 1) <= 1e-6
    d = np.linspace(h + 0.5, top - 0.5, 300)
    F = dist.cluster_euclid_cdf(d, j, plan)
    assert np.all(np.diff(F) >= 0)


def test_aggregate_field_matches_ring_sum(urban_plan):
    W = 5000.0
    field = dist.aerial_field(urban_plan, W)
    d = np.geomspace(urban_plan.h.min() * 1.01, 6000.0, 300)
    for kind in (L, N):
        direct = sum(dist.ring_mass(kind, d, urban_plan, i, window=W) for i in range(1, 51))
        ok = direct > 1e-6
        assert np.allclose(field.mass(kind, d)[ok], direct[ok], rtol=2e-5)


def test_zero_density_gives_zero_mass(urban):
    env, net = urban
    plan = build_deployment_plan(env, replace(net, delta=0.0))
    assert dist.nearest_cdf(L, 500.0, plan, ring=3) == 0.0


def test_cluster_weights(urban_plan):
    p_out, p = dist.cluster_weights(urban_plan, "always")
    assert p_out + p.sum() == pytest.approx(1.0, abs=1e-12)
    p_out, p = dist.cluster_weights(urban_plan, "thinned")
    assert p_out + p.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ParameterError):
        dist.cluster_weights(urban_plan, "other")
