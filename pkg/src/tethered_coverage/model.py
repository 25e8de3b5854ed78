"""Parameter records, presets, configuration loading and ring geometry.

Internal units are metres, watts and radians. Configuration files give
densities per km^2 and angles in degrees; :func:`load_config` converts them.
"""
from dataclasses import dataclass, fields, replace, asdict
import math
import os

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


CONFIG_ENV_VAR = "TETHERED_COVERAGE_CONFIG"
PER_KM2 = 1e-6
# equal-area disk of a 400 km x 400 km square region, used by the figure recipes
FIGURE_WINDOW_RADIUS = 400e3 / math.sqrt(math.pi)


class ParameterError(ValueError):
    """Invalid parameter values. ``violations`` lists every failed check."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class EnvironmentProfile:
    """Terrain-dependent constants of one propagation environment."""

    a: float
    b: float
    eta_L: float
    eta_N: float
    eta_T: float
    m_L: int
    m_N: int
    m_T: int
    h_n: float
    lambda_b: float
    theta_min: float
    name: str = "custom"


@dataclass(frozen=True)
class NetworkParams:
    """Deployment-wide scalars. ``c_bar`` is informational only: the typical
    user's SINR does not depend on how many other users share its cluster."""

    R_0: float
    N: int
    lambda_C: float
    lambda_T: float
    delta: float
    kappa_b: float
    T_max: float
    rho_ABS: float
    rho_T: float
    sigma2: float
    gamma: float
    alpha_T: float = 3.0
    alpha_L: float = 2.0
    alpha_N: float = 3.0
    c_bar: float = 10.0


@dataclass(frozen=True)
class Settings:
    """Numerical and simulation options.

    ``typical_cluster_mode`` selects how the typical user's own cluster is
    populated: ``"thinned"`` deploys an ABS there with probability ``delta``
    (as every other cluster), ``"always"`` deploys one whenever a rooftop
    exists. ``laplace_bracket`` selects how the own-cluster interferer enters
    the interference Laplace transform: ``"conditioned"`` conditions the
    whole mixture on the serving station winning, ``"per_ring"`` normalizes each
    ring term by its own survival probability.
    """

    trials: int = 10_000
    seed: int = 2024
    window_radius: float = 5000.0
    rtol_inner: float = 1e-6
    rtol_outer: float = 1e-5
    typical_cluster_mode: str = "thinned"
    laplace_bracket: str = "conditioned"
    workers: int = 1


@dataclass(frozen=True)
class RingGeometry:
    index: int
    inner_radius: float
    outer_radius: float
    center_radius: float


URBAN_ENV = EnvironmentProfile(
    a=13.0, b=0.21, eta_L=0.4, eta_N=0.005, eta_T=0.1, m_L=2, m_N=1, m_T=1,
    h_n=15.0, lambda_b=500 * PER_KM2, theta_min=math.radians(15.3), name="urban")
SUBURBAN_ENV = EnvironmentProfile(
    a=4.88, b=0.429, eta_L=0.9772, eta_N=0.0079, eta_T=0.69, m_L=2, m_N=1, m_T=1,
    h_n=8.0, lambda_b=750 * PER_KM2, theta_min=math.radians(10.6), name="suburban")
URBAN_NET = NetworkParams(
    R_0=200.0, N=50, lambda_C=20 * PER_KM2, lambda_T=10 * PER_KM2, delta=1.0,
    kappa_b=0.02, T_max=80.0, rho_ABS=1.0, rho_T=10.0, sigma2=1e-8, gamma=1.0)
SUBURBAN_NET = replace(URBAN_NET, lambda_C=5 * PER_KM2, lambda_T=1.5 * PER_KM2, sigma2=1e-12)

PRESETS = {
    "urban": (URBAN_ENV, URBAN_NET),
    "suburban": (SUBURBAN_ENV, SUBURBAN_NET),
}


def preset(name):
    """Return the ``(EnvironmentProfile, NetworkParams)`` pair of a preset."""
    try:
        return PRESETS[name]
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def validate_params(env, net):
    """List every invariant violated by ``(env, net)``; empty when valid."""
    bad = []

    def need(cond, msg):
        if not cond:
            bad.append(msg)

    need(env.eta_L >= env.eta_N, "eta_L >= eta_N")
    for name in ("eta_L", "eta_N", "eta_T"):
        v = getattr(env, name)
        need(0 < v <= 1, f"{name} in (0, 1]")
    for name in ("m_L", "m_N", "m_T"):
        v = getattr(env, name)
        need(float(v).is_integer() and v >= 1, f"{name} integer >= 1")
    need(0 < env.theta_min < math.pi / 2, "theta_min in (0, pi/2)")
    need(env.lambda_b > 0, "lambda_b > 0")
    need(env.h_n >= 0, "h_n >= 0")
    need(env.b > 0, "b > 0")

    need(net.alpha_L <= net.alpha_N, "alpha_L <= alpha_N")
    for name in ("alpha_T", "alpha_L", "alpha_N"):
        need(getattr(net, name) >= 2, f"{name} >= 2")
    need(net.R_0 > 0, "R_0 > 0")
    need(float(net.N).is_integer() and net.N >= 1, "N integer >= 1")
    need(0 <= net.delta <= 1, "delta in [0,1]")
    need(0 <= net.kappa_b <= 1, "kappa_b in [0,1]")
    need(net.lambda_C >= 0, "lambda_C >= 0")
    need(net.lambda_T >= 0, "lambda_T >= 0")
    need(net.T_max >= 0, "T_max >= 0")
    need(net.rho_ABS > 0 and net.rho_T > 0, "transmit powers > 0")
    need(net.sigma2 >= 0, "sigma2 >= 0")
    need(net.gamma > 0, "gamma > 0")
    return bad


def check_params(env, net):
    """Raise :class:`ParameterError` unless ``(env, net)`` is valid."""
    bad = validate_params(env, net)
    if bad:
        raise ParameterError(bad)
    return env, net


def gs_density(kappa_b, lambda_b):
    """Density of rooftops able to host a ground station (1/m^2)."""
    if kappa_b < 0 or lambda_b < 0:
        raise ParameterError("kappa_b and lambda_b must be >= 0")
    return kappa_b * lambda_b


def ring_radii(R_0, N):
    """Outer radii ``R_0 * i / N`` for ``i = 0..N`` (index 0 is the centre)."""
    radii = R_0 * np.arange(N + 1) / N
    radii[-1] = R_0
    return radii


def ring_geometry(R_0, N):
    radii = ring_radii(R_0, N)
    return [RingGeometry(i, radii[i - 1], radii[i], (2 * i - 1) * R_0 / (2 * N))
            for i in range(1, N + 1)]


def rooftop_ring_probabilities(lambda_GS, R_0, N):
    """Probability that the nearest accessible rooftop lies in each ring.

    Returns ``(p, p_out)`` where ``p[i-1]`` is the probability for ring ``i``
    and ``p_out`` the probability of no accessible rooftop in the cluster.
    """
    if lambda_GS < 0 or R_0 <= 0 or N < 1:
        raise ParameterError("need lambda_GS >= 0, R_0 > 0, N >= 1")
    radii = ring_radii(R_0, int(N))
    inner = math.pi * lambda_GS * radii[:-1] ** 2
    outer = math.pi * lambda_GS * radii[1:] ** 2
    p = np.exp(-inner) * -np.expm1(-(outer - inner))
    p_out = math.exp(-math.pi * lambda_GS * R_0 ** 2)
    return p, p_out


# --- configuration files -------------------------------------------------

_DENSITY_FIELDS = {"lambda_b", "lambda_C", "lambda_T"}
_ANGLE_FIELDS = {"theta_min"}


def _convert(section, values, cls):
    known = {f.name for f in fields(cls)}
    out = {}
    for key, val in values.items():
        if key not in known:
            raise ParameterError(f"unknown field {section}.{key}")
        if key in _DENSITY_FIELDS:
            val = float(val) * PER_KM2
        elif key in _ANGLE_FIELDS:
            val = math.radians(float(val))
        out[key] = val
    return out


def resolve_config(data, env_name=None):
    """Build ``(env, net, settings)`` from a parsed configuration mapping.

    Starts from the preset named by ``env_name`` (or the ``preset`` key,
    default ``"urban"``) and overrides any field given in the ``environment``,
    ``network`` and ``simulation`` sections.
    """
    data = dict(data or {})
    name = env_name or data.pop("preset", "urban")
    data.pop("preset", None)
    env, net = preset(name)
    extra = set(data) - {"environment", "network", "simulation"}
    if extra:
        raise ParameterError(f"unknown config sections {sorted(extra)}")
    env = replace(env, **_convert("environment", data.get("environment", {}), EnvironmentProfile))
    net = replace(net, **_convert("network", data.get("network", {}), NetworkParams))
    sim = dict(data.get("simulation", {}))
    if "window_km" in sim:
        sim["window_radius"] = float(sim.pop("window_km")) * 1000.0
    settings = Settings(**_convert("simulation", sim, Settings))
    check_params(env, net)
    check_settings(settings)
    return env, net, settings


def check_settings(settings):
    bad = []
    if settings.trials < 1:
        bad.append("trials >= 1")
    if settings.window_radius <= 0:
        bad.append("window_radius > 0")
    if settings.typical_cluster_mode not in ("thinned", "always"):
        bad.append("typical_cluster_mode in {thinned, always}")
    if settings.laplace_bracket not in ("conditioned", "per_ring"):
        bad.append("laplace_bracket in {conditioned, per_ring}")
    if not (settings.rtol_inner > 0 and settings.rtol_outer > 0):
        bad.append("quadrature tolerances > 0")
    if bad:
        raise ParameterError(bad)
    return settings


def load_config(path=None, env_name=None):
    """Load a TOML configuration file (or only a preset when ``path`` is None).

    When ``path`` is None the file named by ``$TETHERED_COVERAGE_CONFIG`` is
    used if that variable is set.
    """
    path = path or os.environ.get(CONFIG_ENV_VAR)
    data = {}
    if path:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    return resolve_config(data, env_name)


def config_dict(env, net, settings=None):
    """Flat, human-readable snapshot of a configuration in SI units."""
    out = {f"environment.{k}": v for k, v in asdict(env).items()}
    out.update({f"network.{k}": v for k, v in asdict(net).items()})
    if settings is not None:
        out.update({f"simulation.{k}": v for k, v in asdict(settings).items()})
    return out


__all__ = [
    "ParameterError", "EnvironmentProfile", "NetworkParams", "Settings", "RingGeometry",
    "URBAN_ENV", "URBAN_NET", "SUBURBAN_ENV", "SUBURBAN_NET", "PRESETS", "preset",
    "validate_params", "check_params", "gs_density", "ring_radii", "ring_geometry",
    "rooftop_ring_probabilities", "resolve_config", "load_config", "config_dict",
    "check_settings", "CONFIG_ENV_VAR", "PER_KM2", "FIGURE_WINDOW_RADIUS",
]
