"""Air-to-ground LoS probability, path loss, mean received power and
Nakagami-m power gains."""
from enum import Enum

import numpy as np

from .model import ParameterError


class LinkKind(Enum):
    TERRESTRIAL = "T"
    AERIAL_LOS = "L"
    AERIAL_NLOS = "N"


def link_tuple(kind, env, net):
    """``(rho, eta, alpha, m)`` of a link kind."""
    if kind is LinkKind.TERRESTRIAL:
        return net.rho_T, env.eta_T, net.alpha_T, int(env.m_T)
    if kind is LinkKind.AERIAL_LOS:
        return net.rho_ABS, env.eta_L, net.alpha_L, int(env.m_L)
    if kind is LinkKind.AERIAL_NLOS:
        return net.rho_ABS, env.eta_N, net.alpha_N, int(env.m_N)
    raise ParameterError(f"unknown link kind {kind!r}")


def los_probability(r, h, env):
    """LoS probability at horizontal distance ``r`` from a station at altitude ``h``.

    The elevation angle is taken in degrees; ``r = 0`` means 90 degrees.
    """
    r = np.asarray(r, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ParameterError("altitude must be > 0")
    if np.any(r < 0):
        raise ParameterError("horizontal distance must be >= 0")
    elevation = np.degrees(np.arctan2(h, r))
    return 1.0 / (1.0 + env.a * np.exp(-env.b * (elevation - env.a)))


def path_loss(d, h, env, net):
    """LoS/NLoS-averaged path loss at euclidean distance ``d`` from altitude ``h``."""
    d = np.asarray(d, dtype=float)
    h = np.asarray(h, dtype=float)
    if np.any(d < h * (1 - 1e-12)) or np.any(h <= 0):
        raise ParameterError("path loss needs d >= h > 0")
    r = np.sqrt(np.maximum(d * d - h * h, 0.0))
    p_los = los_probability(r, h, env)
    return (1 - p_los) * d ** net.alpha_N / env.eta_N + p_los * d ** net.alpha_L / env.eta_L


def mean_received_power(kind, distance, env, net):
    """Received power averaged over fading (unit-mean gain)."""
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise ParameterError("distance must be > 0")
    rho, eta, alpha, _ = link_tuple(kind, env, net)
    return rho * eta * distance ** (-alpha)


def sample_fading(kind, env, rng, size=None):
    """Unit-mean Gamma(m, 1/m) power gains; ``m = 1`` gives Rayleigh fading."""
    m = {LinkKind.TERRESTRIAL: env.m_T, LinkKind.AERIAL_LOS: env.m_L,
         LinkKind.AERIAL_NLOS: env.m_N}[kind]
    return rng.gamma(m, 1.0 / m, size)
