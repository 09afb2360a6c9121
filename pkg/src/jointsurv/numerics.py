"""Special functions, composite Gauss-Legendre quadrature and a counter-based RNG.

Everything here is pure and vectorised over numpy arrays. The error function
family is implemented locally (series below |x| = 2, continued fraction above)
so that the survival formulas can use ``erfcx``-style scaled tails without
losing precision for deep barriers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numba as nb
import numpy as np
from numpy.typing import ArrayLike, NDArray

Array = NDArray[np.float64]

SQRT2 = math.sqrt(2.0)
SQRT_PI = math.sqrt(math.pi)
TWO_OVER_SQRT_PI = 2.0 / SQRT_PI
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

_SERIES_TERMS = 64
_CF_TERMS = 120
_SPLIT = 2.0


class ConvergenceError(RuntimeError):
    """Quadrature failed to meet its tolerance within the refinement budget."""


@dataclass(frozen=True)
class QuadratureConfig:
    time_panels: int = 64
    space_panels: int = 128
    truncation_sigmas: float = 10.0
    rel_tol: float = 1e-7
    abs_tol: float = 1e-12
    order: int = 8
    max_doublings: int = 10

    def __post_init__(self) -> None:
        for name in ("time_panels", "space_panels", "order"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        for name in ("truncation_sigmas", "rel_tol", "abs_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not self.rel_tol < 1:
            raise ValueError("rel_tol must be < 1")
        if self.max_doublings < 0:
            raise ValueError("max_doublings must be >= 0")


# ---------------------------------------------------------------------------
# error function family
#
# Scalar kernels compiled as numpy ufuncs: Taylor series (all terms positive)
# for |x| < 2, continued fraction for the scaled tail beyond.


@nb.njit(cache=True)
def _erf_series(x):
    # erf(x) = 2/sqrt(pi) exp(-x^2) sum_k (2x^2)^k x / (1*3*...*(2k+1))
    x2 = 2.0 * x * x
    term = x
    total = x
    for k in range(1, _SERIES_TERMS):
        term *= x2 / (2 * k + 1)
        total += term
        if abs(term) <= 1e-17 * abs(total):
            break
    return TWO_OVER_SQRT_PI * math.exp(-x * x) * total


@nb.njit(cache=True)
def _erfcx_cf(x):
    # exp(x^2) erfc(x) = (1/sqrt(pi)) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), x >= 2
    n = min(_CF_TERMS, 12 + int(300.0 / (x * x)))
    tail = 0.0
    for k in range(n, 0, -1):
        tail = (0.5 * k) / (x + tail)
    return 1.0 / (SQRT_PI * (x + tail))


@nb.vectorize(["float64(float64)"], cache=True)
def erf(x):
    """Error function, absolute error below 1e-15 on the real line."""
    ax = abs(x)
    if ax < _SPLIT:
        return _erf_series(x)
    if ax > 27.0:
        return math.copysign(1.0, x)
    return math.copysign(1.0 - math.exp(-ax * ax) * _erfcx_cf(ax), x)


@nb.vectorize(["float64(float64)"], cache=True)
def erfc(x):
    """Complementary error function with full relative precision for large x."""
    if x >= _SPLIT:
        if x > 27.3:
            return 0.0
        return math.exp(-x * x) * _erfcx_cf(x)
    if x > -_SPLIT:
        return 1.0 - _erf_series(x)
    if x < -27.0:
        return 2.0
    return 2.0 - math.exp(-x * x) * _erfcx_cf(-x)


@nb.njit(cache=True)
def _erfcx_scalar(x):
    if x >= _SPLIT:
        return _erfcx_cf(x)
    if x > -_SPLIT:
        return math.exp(x * x) * (1.0 - _erf_series(x))
    # erfc(x) = 2 - erfc(-x)
    return 2.0 * math.exp(x * x) - _erfcx_cf(-x)


@nb.vectorize(["float64(float64)"], cache=True)
def erfcx(x):
    """Scaled complementary error function exp(x**2) * erfc(x)."""
    return _erfcx_scalar(x)


@nb.vectorize(["float64(float64, float64)"], cache=True)
def exp_erfc(c, y):
    """exp(c) * erfc(y) without overflow when c and y are both large."""
    if y > 0.0:
        return math.exp(c - y * y) * _erfcx_scalar(y)
    return math.exp(c) * (1.0 - _erf_series(y) if y > -_SPLIT else 2.0 - math.exp(-y * y) * _erfcx_cf(-y))


def _acklam(p: Array) -> Array:
    a = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
         1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
    b = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
         6.680131188771972e01, -1.328068155288572e01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
         -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
         3.754408661907416e00)
    lo = 0.02425
    out = np.empty_like(p)
    low = p < lo
    high = p > 1 - lo
    mid = ~(low | high)
    q = np.sqrt(-2 * np.log(p[low]))
    out[low] = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
        (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    q = np.sqrt(-2 * np.log1p(-p[high]))
    out[high] = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
        (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    q = p[mid] - 0.5
    r = q * q
    out[mid] = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
        ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1)
    return out


def std_normal_pdf(x: ArrayLike) -> Array | float:
    x = np.asarray(x, dtype=float)
    out = INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return out if out.ndim else float(out)


def std_normal_cdf(x: ArrayLike) -> Array | float:
    """Phi(x) = (1 + erf(x/sqrt 2))/2, evaluated as erfc(-x/sqrt 2)/2 for tail accuracy."""
    x = np.asarray(x, dtype=float)
    out = 0.5 * np.asarray(erfc(-x / SQRT2))
    return out if out.ndim else float(out)


def std_normal_sf(x: ArrayLike) -> Array | float:
    x = np.asarray(x, dtype=float)
    out = 0.5 * np.asarray(erfc(x / SQRT2))
    return out if out.ndim else float(out)


def inverse_normal_cdf(p: ArrayLike) -> Array | float:
    """Standard normal quantile: rational first guess plus one Halley step."""
    pa = np.asarray(p, dtype=float)
    flat = np.atleast_1d(pa).astype(float)
    if np.any(~((flat > 0) & (flat < 1))):
        raise ValueError("inverse_normal_cdf: p must lie in (0, 1)")
    x = _acklam(flat)
    e = np.asarray(std_normal_cdf(x)) - flat
    u = e * math.sqrt(2 * math.pi) * np.exp(0.5 * x * x)
    x = x - u / (1 + 0.5 * x * u)
    return x.reshape(pa.shape) if pa.ndim else float(x[0])


def inverse_erf(y: ArrayLike) -> Array | float:
    """Inverse of :func:`erf` on (-1, 1)."""
    ya = np.asarray(y, dtype=float)
    flat = np.atleast_1d(ya).astype(float)
    if np.any(~(np.abs(flat) < 1)):
        raise ValueError("inverse_erf: |y| must be < 1")
    x = np.asarray(inverse_normal_cdf(0.5 * (1.0 + flat))) / SQRT2
    # Newton polish on erf itself
    x = x - (np.asarray(erf(x)) - flat) / (TWO_OVER_SQRT_PI * np.exp(-x * x))
    return x.reshape(ya.shape) if ya.ndim else float(x[0])


# ---------------------------------------------------------------------------
# quadrature

_GL_CACHE: dict[int, tuple[Array, Array]] = {}


def gauss_legendre(order: int) -> tuple[Array, Array]:
    """Nodes and weights on [-1, 1]."""
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def composite_nodes(a: ArrayLike, b: ArrayLike, panels: int, order: int) -> tuple[Array, Array]:
    """Composite Gauss-Legendre nodes/weights on [a, b].

    ``a`` and ``b`` may be arrays of equal shape S; the result then has shape
    S + (panels * order,) so that a batch of integrals with different limits
    can be evaluated in one vectorised call.
    """
    x0, w0 = gauss_legendre(order)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    h = (b - a) / panels
    left = a + h * np.arange(panels)
    nodes = (left[..., :, None] + 0.5 * h[..., None] * (x0 + 1.0)).reshape(*left.shape[:-1], -1)
    weights = np.broadcast_to(0.5 * h[..., None] * w0, left.shape + (order,)).reshape(nodes.shape)
    return nodes, weights


def _fixed_rule(f: Callable[[Array], ArrayLike], a: float, b: float, panels: int, order: int) -> float:
    x, w = composite_nodes(a, b, panels, order)
    return float(np.sum(np.asarray(f(x), dtype=float) * w))


def integrate_1d(
    f: Callable[[Array], ArrayLike],
    a: float,
    b: float,
    cfg: QuadratureConfig | None = None,
    panels: int | None = None,
) -> float:
    """Integrate a vectorised ``f`` over [a, b] by composite Gauss-Legendre.

    The panel count is doubled until two successive results agree to
    ``max(rel_tol*|I|, abs_tol)``; the finer estimate is returned.
    """
    cfg = cfg or QuadratureConfig()
    if not a < b:
        raise ValueError("integrate_1d requires a < b")
    n = panels or cfg.space_panels
    coarse = _fixed_rule(f, a, b, n, cfg.order)
    for _ in range(cfg.max_doublings):
        n *= 2
        fine = _fixed_rule(f, a, b, n, cfg.order)
        if abs(fine - coarse) <= max(cfg.rel_tol * abs(fine), cfg.abs_tol):
            return fine
        coarse = fine
    raise ConvergenceError(f"integrate_1d did not converge on [{a}, {b}] with {n} panels")


def integrate_semi_infinite(
    f: Callable[[Array], ArrayLike],
    a: float,
    scale: float,
    cfg: QuadratureConfig | None = None,
) -> float:
    """Integral over [a, inf), truncated at a + truncation_sigmas * scale."""
    cfg = cfg or QuadratureConfig()
    if not scale > 0:
        raise ValueError("scale must be > 0")
    return integrate_1d(f, a, a + cfg.truncation_sigmas * scale, cfg)


# ---------------------------------------------------------------------------
# counter-based random numbers
#
# Every draw is a pure function of (key, counter): the SplitMix64 finaliser
# applied to the counter-th state of the stream. Normals use a 128-layer ziggurat
# whose rare retries are addressed by an attempt index folded into the key,
# so a normal still depends on nothing but its own counter.

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_KEY_SALT = np.uint64(0xD1B54A32D192ED03)
_ATTEMPT_SALT = np.uint64(0x8CB92BA72F3D8DD7)
_UNIT = 1.0 / 9007199254740992.0  # 2**-53


def _ziggurat_tables(layers: int = 128, r: float = 3.442619855899, v: float = 9.91256303526217e-3):
    x = np.zeros(layers + 1)
    f = math.exp(-0.5 * r * r)
    x[0] = v / f
    x[1] = r
    for i in range(2, layers):
        x[i] = math.sqrt(-2.0 * math.log(v / x[i - 1] + f))
        f = math.exp(-0.5 * x[i] * x[i])
    ratio = x[1:] / x[:-1]
    return x, ratio, r


_ZIG_X, _ZIG_RATIO, _ZIG_R = _ziggurat_tables()


@nb.njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit
def _stream_key(seed, stream_id):
    k = _mix64(seed + _KEY_SALT)
    return _mix64(k ^ _mix64(stream_id * _GOLDEN + _GOLDEN))


def stream_key(seed: int, stream_id: int) -> np.uint64:
    """Derive the 64-bit key of one (seed, stream_id) substream."""
    return np.uint64(_stream_key(np.uint64(seed), np.uint64(stream_id)))


@nb.njit(inline="always")
def counter_hash(key, counter):
    # SplitMix64 output for state key + counter * golden; distinct keys are
    # effectively random offsets into the same 2^64 cycle
    return _mix64(np.uint64(counter) * _GOLDEN + key)


@nb.njit(inline="always")
def counter_uniform(key, counter):
    """Uniform on (0, 1) for position ``counter`` of the stream ``key``."""
    return (np.float64(np.int64(counter_hash(key, counter) >> np.uint64(11))) + 0.5) * _UNIT


@nb.njit(inline="always")
def _attempt_key(key, attempt):
    return key ^ _mix64(np.uint64(attempt) * _ATTEMPT_SALT)


@nb.njit
def _normal_slow(key, counter, h):
    zx = _ZIG_X
    attempt = 0
    while True:
        i = np.int64(h & np.uint64(127))
        u = 2.0 * ((np.float64(np.int64(h >> np.uint64(11))) + 0.5) * _UNIT) - 1.0
        if abs(u) < _ZIG_RATIO[i]:
            return u * zx[i]
        if i == 0:
            # tail beyond r (Marsaglia)
            k = 1
            while True:
                a = counter_uniform(_attempt_key(key, 2 * attempt + 1), np.uint64(counter) + np.uint64(k))
                b = counter_uniform(_attempt_key(key, 2 * attempt + 1), np.uint64(counter) + np.uint64(k + 1))
                xt = math.log(a) / _ZIG_R
                yt = math.log(b)
                if -2.0 * yt >= xt * xt:
                    return xt - _ZIG_R if u < 0 else _ZIG_R - xt
                k += 2
        x = u * zx[i]
        f0 = math.exp(-0.5 * (zx[i] * zx[i] - x * x))
        f1 = math.exp(-0.5 * (zx[i + 1] * zx[i + 1] - x * x))
        w = counter_uniform(_attempt_key(key, 2 * attempt + 1), counter)
        if f1 + w * (f0 - f1) < 1.0:
            return x
        attempt += 1
        h = counter_hash(_attempt_key(key, 2 * attempt), counter)


@nb.njit(inline="always")
def counter_normal(key, counter):
    """N(0, 1) draw for position ``counter`` of the stream ``key`` (ziggurat)."""
    h = counter_hash(key, counter)
    i = np.int64(h & np.uint64(127))
    u = 2.0 * ((np.float64(np.int64(h >> np.uint64(11))) + 0.5) * _UNIT) - 1.0
    if abs(u) < _ZIG_RATIO[i]:
        return u * _ZIG_X[i]
    return _normal_slow(key, counter, h)


@nb.njit
def _fill_uniforms(key, start, out):
    for i in range(out.shape[0]):
        out[i] = counter_uniform(key, start + np.uint64(i))


@nb.njit
def _fill_normals(key, start, out):
    for i in range(out.shape[0]):
        out[i] = counter_normal(key, start + np.uint64(i))


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream addressed by (seed, stream_id, counter).

    Draws depend only on these three integers, never on call order or thread
    layout, so Monte Carlo blocks can be evaluated in any order. Uniform and
    normal draws at the same counter are derived from the same hash and are
    not independent; use disjoint counter ranges for the two.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        for v in (self.seed, self.stream_id):
            if not 0 <= int(v) < 2**64:
                raise ValueError("seed and stream_id must be 64-bit unsigned integers")

    @property
    def key(self) -> np.uint64:
        return stream_key(self.seed, self.stream_id)

    def uniforms(self, size: int, start: int = 0) -> Array:
        out = np.empty(size)
        _fill_uniforms(self.key, np.uint64(start), out)
        return out

    def normals(self, size: int, start: int = 0) -> Array:
        out = np.empty(size)
        _fill_normals(self.key, np.uint64(start), out)
        return out
