"""Gaussian-copula joint survival with thresholds matched to first-passage marginals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import numba as nb

from .firm_model import CorrelationError, CorrelationSpec, FirmParams, check_psd, equicorrelation_matrix
from .numerics import (
    Array,
    QuadratureConfig,
    RngStream,
    SQRT2,
    counter_normal,
    integrate_1d,
    inverse_erf,
    std_normal_pdf,
    std_normal_sf,
    stream_key,
)
from .perturbation import first_order_correction
from .survival import survival_prob

FACTOR_RANGE = 10.0
FACTOR_PANELS = 256


@dataclass(frozen=True)
class CopulaThresholds:
    chi: Array
    survival: Array

    def __len__(self) -> int:
        return len(self.chi)


def thresholds_from_survival(singles: Sequence[float]) -> CopulaThresholds:
    """chi_i = sqrt(2) erfinv(1 - 2 P_i), so that P(X_i > chi_i) = P_i."""
    p = np.asarray(singles, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise ValueError("survival probabilities must lie strictly inside (0, 1)")
    chi = SQRT2 * np.asarray(inverse_erf(1.0 - 2.0 * p))
    return CopulaThresholds(np.atleast_1d(chi), np.atleast_1d(p))


def _chi(chi) -> Array:
    if isinstance(chi, CopulaThresholds):
        return chi.chi
    return np.atleast_1d(np.asarray(chi, dtype=float))


def copula_joint_equicorrelated(
    chi,
    xi: float,
    cfg: QuadratureConfig | None = None,
    rng: RngStream | None = None,
) -> float:
    """P(all X_i > chi_i) for unit normals with common correlation xi.

    For xi >= 0 uses X_i = sqrt(xi) M + sqrt(1 - xi) e_i and integrates
    over the common factor M. Negative xi goes to the Monte Carlo path.
    """
    c = _chi(chi)
    n = len(c)
    if not xi < 1:
        raise CorrelationError("xi must be < 1")
    if xi < 0:
        if n > 1 and xi < -1.0 / (n - 1):
            raise CorrelationError(f"xi={xi} violates the equicorrelation bound for n={n}")
        return copula_joint_general(c, equicorrelation_matrix(n, xi), rng or RngStream(0))[0]
    if xi == 0 or n == 1:
        return float(np.prod(std_normal_sf(c)))
    a, b = math.sqrt(xi), math.sqrt(1.0 - xi)

    def integrand(m):
        tails = std_normal_sf((c[:, None, None] - a * m[None]) / b)
        return std_normal_pdf(m) * np.prod(tails, axis=0)

    return integrate_1d(integrand, -FACTOR_RANGE, FACTOR_RANGE, cfg, panels=FACTOR_PANELS)


@nb.njit(nogil=True, cache=True)
def _antithetic_block(key, n_pairs, chol, chi, out):
    n = chi.shape[0]
    e = np.empty(n)
    for p in range(n_pairs):
        for k in range(n):
            e[k] = counter_normal(key, np.uint64(p * n + k))
        up = 1
        dn = 1
        for i in range(n):
            y = 0.0
            for k in range(i + 1):
                y += chol[i, k] * e[k]
            if y <= chi[i]:
                up = 0
            if -y <= chi[i]:
                dn = 0
        out[p] = 0.5 * (up + dn)


def copula_joint_general(
    chi,
    matrix,
    rng: RngStream | None = None,
    pairs: int = 2_000_000,
    block: int = 100_000,
) -> tuple[float, float]:
    """Monte Carlo estimate (value, stderr) with antithetic pairs and Cholesky-correlated normals."""
    c = _chi(chi)
    m = np.asarray(matrix, dtype=float)
    n = len(c)
    if m.shape != (n, n):
        raise CorrelationError(f"matrix shape {m.shape} does not match {n} thresholds")
    if n == 1:
        return float(std_normal_sf(c[0])), 0.0
    check_psd(m)
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        chol = np.linalg.cholesky(m + 1e-12 * np.eye(n))
    rng = rng or RngStream(0)
    sums = []
    sq = []
    done = 0
    b = 0
    while done < pairs:
        k = min(block, pairs - done)
        out = np.empty(k)
        _antithetic_block(stream_key(rng.seed, (rng.stream_id << 24) | b), k, chol, c, out)
        sums.append(out.sum())
        sq.append((out * out).sum())
        done += k
        b += 1
    mean = sum(sums) / pairs
    var = max(sum(sq) / pairs - mean * mean, 0.0)
    return float(mean), float(math.sqrt(var / pairs))


def bivariate_upper(a: float, b: float, rho: float, cfg: QuadratureConfig | None = None) -> float:
    """P(X > a, Y > b) for standard normals with correlation rho in (-1, 1)."""
    if not -1 < rho < 1:
        raise CorrelationError("rho must lie in (-1, 1)")
    if rho >= 0:
        return copula_joint_equicorrelated([a, b], rho, cfg)
    # flip Y: P(X>a, Y>b) = P(X>a) - P(X>a, -Y > -b), the latter with correlation -rho
    return float(std_normal_sf(a)) - copula_joint_equicorrelated([a, -b], -rho, cfg)


def copula_first_order(singles: Sequence[float], chi, xi) -> float:
    """P1/P0 = (1/4pi) sum_{i != j} xi_ij exp(-chi_i^2/2) exp(-chi_j^2/2) / (P_i P_j)."""
    p = np.asarray(singles, dtype=float)
    c = _chi(chi)
    n = len(p)
    if len(c) != n:
        raise ValueError("thresholds and singles differ in length")
    x = np.asarray(xi, dtype=float)
    xm = equicorrelation_matrix(n, float(x)) if x.ndim == 0 else x
    g = np.exp(-0.5 * c * c) / p
    m = xm * np.outer(g, g)
    np.fill_diagonal(m, 0.0)
    return float(m.sum() / (4 * math.pi))


@dataclass(frozen=True)
class ModelComparison:
    n: int
    xi: float
    survival: Array
    chi: Array
    a_fp: float
    a_c: float
    sigma2: float | None = None

    @property
    def relative_gap(self) -> float:
        return (self.a_c - self.a_fp) / self.a_fp

    @property
    def a_fp_over_sigma2(self) -> float | None:
        return None if self.sigma2 is None else self.a_fp / self.sigma2

    @property
    def a_c_over_sigma2(self) -> float | None:
        return None if self.sigma2 is None else self.a_c / self.sigma2


def compare_models(
    firms: Sequence[FirmParams],
    xi: float,
    t: float,
    cfg: QuadratureConfig | None = None,
) -> ModelComparison:
    """Per-pair first-order coefficient in both models.

    A is the first-order correction divided by (n(n-1)/2) xi; for identical
    firms it is independent of xi and n. With a single firm the pair (f, f)
    is used.
    """
    if xi == 0:
        raise ValueError("xi must be non-zero to extract the per-pair coefficient")
    fs = list(firms) if len(firms) > 1 else [firms[0], firms[0]]
    n = len(fs)
    corr = CorrelationSpec.equicorrelated(xi)
    p = np.array([float(survival_prob(f, t)) for f in fs])
    th = thresholds_from_survival(p)
    norm = 0.5 * n * (n - 1) * xi
    a_fp = first_order_correction(fs, corr, t, cfg) / norm
    a_c = copula_first_order(p, th, xi) / norm
    sig = {f.sigma for f in fs}
    sigma2 = next(iter(sig)) ** 2 if len(sig) == 1 else None
    return ModelComparison(n, xi, p, th.chi, a_fp, a_c, sigma2)
