"""Per-ring tether placement and the deployment plan shared by the coverage
analysis and the simulator."""
from dataclasses import dataclass, replace
from functools import lru_cache
import math

import numpy as np

from .channel import los_probability
from .model import URBAN_NET, ParameterError, check_params, gs_density, ring_geometry, rooftop_ring_probabilities
from .numerics import NumericalError, gauss_legendre_unit, minimize_box_2d

T_STEP = 1.0
THETA_STEP = math.radians(0.5)
REFINE_TOL = 1e-3
_NODES = 24


@dataclass(frozen=True)
class RingPlacement:
    ring: int
    R_n: float
    T_opt: float
    theta_opt: float
    h_u: float
    R_u: float
    p_i: float
    pl_avg: float


@dataclass(frozen=True)
class DeploymentPlan:
    rings: tuple
    p_out: float
    env: object
    net: object

    @property
    def N(self):
        return len(self.rings)

    @property
    def h(self):
        return np.array([r.h_u for r in self.rings])

    @property
    def R_u(self):
        """Absolute horizontal offsets of the ABS from its cluster centre."""
        return np.abs(np.array([r.R_u for r in self.rings]))

    @property
    def p(self):
        return np.array([r.p_i for r in self.rings])


def horizontal_offset(T, theta, R_n, y=0.0):
    """Horizontal UAV-to-centre distance for a tether ending at lateral offset ``y``."""
    c2 = (T * np.cos(theta)) ** 2
    if np.any(y * y > c2 + 1e-12):
        raise ParameterError("|y| cannot exceed the horizontal tether reach")
    root = np.sqrt(np.maximum(c2 - y * y, 0.0))
    return np.sqrt(np.maximum(R_n * R_n - 2 * R_n * root + c2, 0.0))


def offset_pdf(r, R_u, R_0):
    """Density of the horizontal user-to-UAV distance for a user uniform on the
    cluster disk and a UAV at horizontal offset ``R_u`` from its centre."""
    r = np.asarray(r, dtype=float)
    R_u = abs(R_u)
    out = np.zeros_like(r)
    inner = r <= R_0 - R_u
    out[inner] = 2 * r[inner] / R_0 ** 2
    ring = (~inner) & (r >= abs(R_0 - R_u)) & (r <= R_0 + R_u) & (r > 0)
    if R_u > 0:
        c = (R_u ** 2 + r[ring] ** 2 - R_0 ** 2) / (2 * R_u * r[ring])
        out[ring] = 2 * r[ring] / (np.pi * R_0 ** 2) * np.arccos(np.clip(c, -1.0, 1.0))
    return out


def _offset_nodes(R_u, R_0, n=_NODES):
    """Quadrature nodes/weights (trailing axis) for integrals against
    :func:`offset_pdf`; ``R_u`` may be an array of offsets (already >= 0).

    The second branch uses a cosine map so the square-root behaviour of the
    density at both ends does not spoil convergence.
    """
    R_u = np.asarray(R_u, dtype=float)[..., None]
    t, w = gauss_legendre_unit(n)
    hi1 = np.maximum(R_0 - R_u, 0.0)
    r1 = hi1 * t
    w1 = hi1 * w * 2 * r1 / R_0 ** 2
    lo2 = np.abs(R_0 - R_u)
    hi2 = R_0 + R_u
    span = hi2 - lo2
    r2 = lo2 + span * 0.5 * (1 - np.cos(np.pi * t))
    jac = span * 0.5 * np.pi * np.sin(np.pi * t)
    safe_ru = np.where(R_u > 0, R_u, 1.0)
    c = (R_u ** 2 + r2 ** 2 - R_0 ** 2) / (2 * safe_ru * np.maximum(r2, 1e-300))
    dens = 2 * r2 / (np.pi * R_0 ** 2) * np.arccos(np.clip(c, -1.0, 1.0))
    w2 = np.where(R_u > 0, jac * w * dens, 0.0)
    return np.concatenate([r1, r2], axis=-1), np.concatenate([w1, w2], axis=-1)


def _pl_avg(h, R_u, env, net):
    h = np.asarray(h, dtype=float)
    R_u = np.abs(np.asarray(R_u, dtype=float))
    h, R_u = np.broadcast_arrays(h, R_u)
    r, w = _offset_nodes(R_u, net.R_0)
    hh = h[..., None]
    d2 = r * r + hh * hh
    p_los = los_probability(r, hh, env)
    pl = (1 - p_los) * d2 ** (net.alpha_N / 2) / env.eta_N + p_los * d2 ** (net.alpha_L / 2) / env.eta_L
    return np.sum(pl * w, axis=-1)


def avg_path_loss(T, theta, R_n, env, net):
    """Path loss averaged over users uniform on the cluster disk.

    The UAV sits at altitude ``h_n + T sin(theta)`` and horizontal offset
    ``R_n - T cos(theta)`` from the cluster centre. Broadcasts over ``T`` and
    ``theta``.
    """
    T = np.asarray(T, dtype=float)
    theta = np.asarray(theta, dtype=float)
    h = env.h_n + T * np.sin(theta)
    if np.any(h <= 0):
        raise ParameterError("UAV altitude must be > 0")
    value = _pl_avg(h, R_n - T * np.cos(theta), env, net)
    if not np.all(np.isfinite(value)):
        raise NumericalError("average path loss quadrature produced a non-finite value")
    return value if value.ndim else float(value)


def optimize_ring(R_n, env, net, ring=0, p_i=float("nan")):
    """Tether length and inclination minimizing the average path loss for a
    ground station at distance ``R_n`` from the cluster centre."""
    bounds = ((0.0, float(net.T_max)), (float(env.theta_min), math.pi / 2))
    (T, theta), value = minimize_box_2d(
        lambda t, th: avg_path_loss(t, th, R_n, env, net),
        bounds, (T_STEP, THETA_STEP), REFINE_TOL)
    T = min(max(T, 0.0), net.T_max)
    theta = min(max(theta, env.theta_min), math.pi / 2)
    return RingPlacement(
        ring=ring, R_n=float(R_n), T_opt=float(T), theta_opt=float(theta),
        h_u=float(env.h_n + T * math.sin(theta)), R_u=float(R_n - T * math.cos(theta)),
        p_i=float(p_i), pl_avg=float(value))


def fixed_ring(R_n, T, theta, env, net, ring=0, p_i=float("nan")):
    """Placement record for a prescribed ``(T, theta)`` (no optimization)."""
    return RingPlacement(
        ring=ring, R_n=float(R_n), T_opt=float(T), theta_opt=float(theta),
        h_u=float(env.h_n + T * math.sin(theta)), R_u=float(R_n - T * math.cos(theta)),
        p_i=float(p_i), pl_avg=float(avg_path_loss(T, theta, R_n, env, net)))


@lru_cache(maxsize=256)
def _optimized_rings(env, R_0, N, T_max, alpha_L, alpha_N):
    net = replace(URBAN_NET, R_0=R_0, N=N, T_max=T_max, alpha_L=alpha_L, alpha_N=alpha_N)
    out = []
    for g in ring_geometry(R_0, N):
        try:
            out.append(optimize_ring(g.center_radius, env, net, ring=g.index))
        except (NumericalError, ParameterError) as exc:
            raise type(exc)(f"ring {g.index}: {exc}") from exc
    return tuple(out)


def build_deployment_plan(env, net, reference=False):
    """Optimal placement for every ring plus the rooftop probabilities.

    With ``reference=True`` every UAV hovers straight above its ground station
    at full tether length (``T = T_max``, ``theta = 90 deg``) instead.
    """
    check_params(env, net)
    p, p_out = rooftop_ring_probabilities(gs_density(net.kappa_b, env.lambda_b), net.R_0, net.N)
    if reference:
        rings = tuple(fixed_ring(g.center_radius, net.T_max, math.pi / 2, env, net, ring=g.index)
                      for g in ring_geometry(net.R_0, net.N))
    else:
        rings = _optimized_rings(env, float(net.R_0), int(net.N), float(net.T_max),
                                 float(net.alpha_L), float(net.alpha_N))
    rings = tuple(replace(r, p_i=float(pi)) for r, pi in zip(rings, p))
    return DeploymentPlan(rings=rings, p_out=float(p_out), env=env, net=net)
