"""Shared numerical substrate: vectorized adaptive quadrature, a bounded 2-D
minimizer and reproducible RNG substreams.

All integrands are called with numpy arrays of abscissae (any shape) and must
return an array of the same shape.
"""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np


class NumericalError(RuntimeError):
    """Raised when a numerical routine cannot meet its tolerance.

    ``value`` carries the best available estimate and ``error`` the achieved
    absolute error bound.
    """

    def __init__(self, message, value=float("nan"), error=float("inf")):
        super().__init__(message)
        self.value = value
        self.error = error


@dataclass(frozen=True)
class QuadratureSpec:
    rtol: float = 1e-6
    atol: float = 1e-13
    max_subdivisions: int = 4000
    tail_threshold: float = 1e-12

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.tail_threshold > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


INNER = QuadratureSpec(rtol=1e-6)
OUTER = QuadratureSpec(rtol=1e-5)

# Gauss-Kronrod (10, 21) pair on [-1, 1]; standard QUADPACK constants.
_XK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])
# full symmetric node set, Gauss nodes are the odd entries of _XK
_X21 = np.concatenate([-_XK[:-1], [0.0], _XK[:-1][::-1]])
_W21 = np.concatenate([_WK[:-1], [_WK[-1]], _WK[:-1][::-1]])
_W10 = np.zeros(21)
_W10[1:10:2] = _WG
_W10[11:20:2] = _WG[::-1]


def _gk21(f, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _X21[None, :]
    y = np.asarray(f(x), dtype=float)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape)
    kron = half * (y @ _W21)
    gauss = half * (y @ _W10)
    return kron, np.abs(kron - gauss)


def integrate_finite(f, a, b, spec=INNER, breakpoints=None):
    """Adaptive Gauss-Kronrod quadrature of ``f`` over ``[a, b]``.

    Every interval of the current partition is evaluated in one vectorized
    call, so ``f`` sees a 2-D array of abscissae. Intervals are bisected
    until each meets its width-proportional share of the tolerance.

    Returns ``(value, error)``. Raises :class:`NumericalError` carrying the
    best estimate when ``spec.max_subdivisions`` is exhausted.
    """
    a = float(a)
    b = float(b)
    if b < a:
        raise ValueError("integrate_finite requires a <= b")
    if b == a:
        return 0.0, 0.0
    edges = [a, b]
    if breakpoints is not None:
        bp = np.asarray(breakpoints, dtype=float).ravel()
        edges.extend(bp[(bp > a) & (bp < b)].tolist())
    edges = np.unique(np.asarray(edges))
    lo, hi = edges[:-1], edges[1:]
    width = b - a
    done_val = 0.0
    done_err = 0.0
    n_intervals = lo.size
    while True:
        val, err = _gk21(f, lo, hi)
        if not (np.all(np.isfinite(val))):
            raise NumericalError("non-finite integrand value", float("nan"))
        total = done_val + float(val.sum())
        tol = max(spec.atol, spec.rtol * abs(total))
        total_err = done_err + float(err.sum())
        if total_err <= tol:
            return total, total_err
        ok = err <= tol * (hi - lo) / width
        done_val += float(val[ok].sum())
        done_err += float(err[ok].sum())
        lo, hi = lo[~ok], hi[~ok]
        if lo.size == 0:
            return total, total_err
        n_intervals += lo.size
        if n_intervals > spec.max_subdivisions:
            raise NumericalError(
                f"quadrature did not converge after {n_intervals} subdivisions "
                f"(error {total_err:.3g} > {tol:.3g})", total, total_err)
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])


def integrate_semi_infinite(f, a, spec=INNER, scale=1.0):
    """Integrate ``f`` over ``[a, inf)``.

    The upper limit is truncated where ``|f(x)| * (x - a)`` drops below
    ``spec.tail_threshold`` times its running maximum along a geometric probe
    ``a + scale * 2**k``; the remaining range is split geometrically and
    handed to :func:`integrate_finite`.
    """
    a = float(a)
    probe = a + scale * 2.0 ** np.arange(0, 80)
    mass = np.abs(np.asarray(f(probe), dtype=float)) * (probe - a)
    running = np.maximum.accumulate(mass)
    below = np.nonzero((mass < spec.tail_threshold * running) & (running > 0))[0]
    if running[-1] == 0.0:
        return 0.0, 0.0
    if below.size == 0:
        raise NumericalError("integrand does not decay on [a, inf)")
    k = int(below[0])
    return integrate_finite(f, a, probe[k], spec, breakpoints=probe[:k])


@lru_cache(maxsize=None)
def gauss_legendre_unit(n):
    """``n``-point Gauss-Legendre nodes and weights on ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, tol):
    """Golden-section minimization of a scalar function on ``[lo, hi]``.

    Returns ``(x, f(x))`` for the best point seen, endpoints included.
    """
    best_x, best_f = lo, f(lo)
    f_hi = f(hi)
    if f_hi < best_f:
        best_x, best_f = hi, f_hi
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = f(x2)
    for x, fx in ((x1, f1), (x2, f2)):
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def _grid(lo, hi, step):
    if hi <= lo or step <= 0:
        return np.array([lo], dtype=float)
    n = int(math.floor((hi - lo) / step + 1e-9))
    pts = lo + step * np.arange(n + 1)
    if hi - pts[-1] > 1e-9 * max(1.0, abs(hi)):
        pts = np.append(pts, hi)
    return pts


def minimize_box_2d(f, bounds, steps, refine_tol=1e-3, max_sweeps=20):
    """Minimize ``f(x, y)`` over a box by exhaustive grid then local refinement.

    ``f`` must broadcast over numpy arrays. ``bounds`` is
    ``((x_lo, x_hi), (y_lo, y_hi))`` and ``steps`` the coarse grid spacings.
    The grid optimum is refined by alternating golden-section searches over
    the neighbouring grid cells until the relative improvement falls below
    ``refine_tol``. The returned value never exceeds the grid minimum.
    """
    (x_lo, x_hi), (y_lo, y_hi) = bounds
    xs = _grid(x_lo, x_hi, steps[0])
    ys = _grid(y_lo, y_hi, steps[1])
    values = np.asarray(f(xs[:, None], ys[None, :]), dtype=float)
    values = np.broadcast_to(values, (xs.size, ys.size))
    i, j = np.unravel_index(np.argmin(values), values.shape)
    x, y, best = float(xs[i]), float(ys[j]), float(values[i, j])

    wx = (max(x_lo, x - steps[0]), min(x_hi, x + steps[0]))
    wy = (max(y_lo, y - steps[1]), min(y_hi, y + steps[1]))
    for _ in range(max_sweeps):
        previous = best
        if wx[1] > wx[0]:
            xt, vt = golden_section(lambda t: float(f(np.float64(t), np.float64(y))),
                                    wx[0], wx[1], refine_tol * (wx[1] - wx[0]))
            if vt < best:
                x, best = xt, vt
        if wy[1] > wy[0]:
            yt, vt = golden_section(lambda t: float(f(np.float64(x), np.float64(t))),
                                    wy[0], wy[1], refine_tol * (wy[1] - wy[0]))
            if vt < best:
                y, best = yt, vt
        if previous - best <= refine_tol * abs(best):
            break
    return (x, y), best


def substream(seed, index):
    """Independent generator for block ``index`` of a run seeded with ``seed``.

    The substream is ``SeedSequence(seed, spawn_key=(index,))``, so the draws
    of a block depend only on ``(seed, index)`` and never on how blocks are
    distributed over workers.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))
