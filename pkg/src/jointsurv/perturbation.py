"""Joint survival probability to first order in the asset correlations.

For each firm the kernel factor is

    F(t, t') = -int_{z_d}^inf dU/dx(x; t - t') p(x, t') dx,

the integrated-by-parts form of int U dp/dx, which stays finite as t' -> 0
(it tends to -dU/dx(0; t)). The pair kernel is A_ij = F_i F_j and the
first-order relative correction is

    P1/P0 = 1/2 sum_{i != j} sigma_i sigma_j / (P_i P_j) int_0^t xi_ij(t') A_ij(t, t') dt'.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .firm_model import CorrelationSpec, FirmParams, validate_correlation
from .numerics import Array, ConvergenceError, QuadratureConfig, composite_nodes
from .survival import partial_survival_U_gradient, survival_density, survival_prob

log = logging.getLogger(__name__)

ENDPOINT_FRACTION = 1e-6


@dataclass(frozen=True)
class PairKernelResult:
    pair: tuple[int, int]
    integral: float
    error: float
    time_panels: int


@dataclass
class JointSurvivalResult:
    p0: float
    p1_over_p0: float
    joint: float
    method: str = "perturbation"
    error: float = 0.0
    singles: Array | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def out_of_range(self) -> bool:
        return not 0.0 <= self.joint <= 1.0


def kernel_factor(f: FirmParams, t: float, tprime: Array, cfg: QuadratureConfig | None = None, space_panels: int | None = None) -> Array:
    """F(t, t') for each t' in ``tprime`` (0 < t' < t)."""
    cfg = cfg or QuadratureConfig()
    scalar = np.ndim(tprime) == 0
    tp = np.atleast_1d(np.asarray(tprime, dtype=float))
    if np.any((tp <= 0) | (tp >= t)):
        raise ValueError("need 0 < t' < t")
    panels = space_panels or cfg.space_panels
    L = cfg.truncation_sigmas
    tau = t - tp
    zd = f.z_d
    width = f.sigma * np.sqrt(tp)
    center = f.eta * tp
    lo = np.maximum(zd, center - L * width)
    hi = np.maximum(center + L * width, lo)
    # split off the boundary layer of dU/dx next to the barrier
    mid = np.clip(zd + L * f.sigma * np.sqrt(tau), lo, hi)
    total = np.zeros_like(tp)
    for a, b in ((lo, mid), (mid, hi)):
        x, w = composite_nodes(a, b, panels, cfg.order)
        g = partial_survival_U_gradient(f, x, tau[:, None]) * survival_density(f, x, tp[:, None])
        total -= np.sum(g * w, axis=-1)
    return float(total[0]) if scalar else total


def kernel_factor_at_zero(f: FirmParams, t: float) -> float:
    """Limit of F(t, t') as t' -> 0."""
    return -float(partial_survival_U_gradient(f, 0.0, t))


def pair_kernel_A(fi: FirmParams, fj: FirmParams, t: float, tprime, cfg: QuadratureConfig | None = None):
    tp = np.asarray(tprime, dtype=float)
    return kernel_factor(fi, t, tp, cfg) * kernel_factor(fj, t, tp, cfg)


def _firm_key(f: FirmParams) -> FirmParams:
    # the kernel depends on sigma, z_d and eta only
    return FirmParams("", f.sigma, f.d_over_v0, f.q + f.lam - f.mu)


@lru_cache(maxsize=256)
def _profile(key: FirmParams, t: float, cfg: QuadratureConfig, time_panels: int, space_panels: int) -> Array:
    eps = t * ENDPOINT_FRACTION
    nodes, _ = composite_nodes(eps, t - eps, time_panels, cfg.order)
    out = kernel_factor(key, t, nodes, cfg, space_panels)
    out.setflags(write=False)
    return out


def _integrals_fixed(
    firms: Sequence[FirmParams],
    t: float,
    cfg: QuadratureConfig,
    time_panels: int,
    space_panels: int,
    weight: Callable[[Array], Array] | None,
) -> Array:
    eps = t * ENDPOINT_FRACTION
    nodes, w = composite_nodes(eps, t - eps, time_panels, cfg.order)
    w0 = eps
    if weight is not None:
        w = w * np.asarray(weight(nodes), dtype=float)
        w0 = eps * float(np.asarray(weight(np.array([0.0])))[0])
    profiles = []
    for f in firms:
        k = _firm_key(f)
        profiles.append((_profile(k, t, cfg, time_panels, space_panels), kernel_factor_at_zero(f, t)))
    n = len(firms)
    out = np.zeros((n, n))
    # t' -> t endpoint contributes nothing (A -> 0); t' -> 0 endpoint by its limit
    for i in range(n):
        for j in range(i, n):
            v = float(np.dot(profiles[i][0] * profiles[j][0], w)) + w0 * profiles[i][1] * profiles[j][1]
            out[i, j] = out[j, i] = v
    return out


def kernel_integrals(
    firms: Sequence[FirmParams],
    t: float,
    cfg: QuadratureConfig | None = None,
    weight: Callable[[Array], Array] | None = None,
) -> tuple[Array, Array, int]:
    """Matrix of int_0^t weight(t') A_ij(t, t') dt' with an error estimate.

    Time panels are doubled until successive results agree; the space
    resolution is checked once by halving it on the final time grid.
    Returns (integrals, error estimates, final time panel count).
    """
    cfg = cfg or QuadratureConfig()
    if not t > 0:
        raise ValueError("horizon must be > 0")
    panels = cfg.time_panels
    coarse = _integrals_fixed(firms, t, cfg, panels, cfg.space_panels, weight)
    for _ in range(cfg.max_doublings):
        panels *= 2
        fine = _integrals_fixed(firms, t, cfg, panels, cfg.space_panels, weight)
        err = np.abs(fine - coarse)
        tol = np.maximum(cfg.rel_tol * np.abs(fine), cfg.abs_tol)
        if np.all(err <= tol):
            half = _integrals_fixed(firms, t, cfg, panels, max(1, cfg.space_panels // 2), weight)
            return fine, err + np.abs(fine - half), panels
        coarse = fine
    raise ConvergenceError(f"time integral did not converge with {panels} panels")


def pair_kernel_integral(fi: FirmParams, fj: FirmParams, t: float, cfg: QuadratureConfig | None = None) -> PairKernelResult:
    vals, errs, panels = kernel_integrals([fi, fj], t, cfg)
    return PairKernelResult((0, 1), float(vals[0, 1]), float(errs[0, 1]), panels)


def _weights_matrix(firms: Sequence[FirmParams], t: float, integrals: Array) -> tuple[Array, Array]:
    sig = np.array([f.sigma for f in firms])
    p = np.array([float(survival_prob(f, t)) for f in firms])
    m = np.outer(sig, sig) * integrals / np.outer(p, p)
    np.fill_diagonal(m, 0.0)
    return m, p


def _ordered_half_sum(m: Array) -> float:
    # fixed (i, j) order, i != j
    n = len(m)
    s = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                s += m[i, j]
    return 0.5 * s


def _correction(firms, corr: CorrelationSpec, t: float, cfg) -> tuple[float, float, Array]:
    n = len(firms)
    validate_correlation(corr, n, horizon=t)
    if corr.is_time_dependent:
        integrals, errs, _ = kernel_integrals(firms, t, cfg, weight=corr.xi_at)
        m, p = _weights_matrix(firms, t, integrals)
        e, _ = _weights_matrix(firms, t, errs)
        return _ordered_half_sum(m), _ordered_half_sum(e), p
    xi = corr.as_matrix(n)
    if n > 1 and np.all(xi[~np.eye(n, dtype=bool)] == 0):
        p = np.array([float(survival_prob(f, t)) for f in firms])
        return 0.0, 0.0, p
    integrals, errs, _ = kernel_integrals(firms, t, cfg)
    m, p = _weights_matrix(firms, t, integrals)
    e, _ = _weights_matrix(firms, t, errs)
    return _ordered_half_sum(xi * m), _ordered_half_sum(np.abs(xi) * e), p


def first_order_correction(
    firms: Sequence[FirmParams],
    corr: CorrelationSpec,
    t: float,
    cfg: QuadratureConfig | None = None,
) -> float:
    """Relative first-order correction P1/P0."""
    if len(firms) < 2:
        raise ValueError("first-order correction needs at least two firms")
    return _correction(firms, corr, t, cfg)[0]


def joint_survival(
    firms: Sequence[FirmParams],
    corr: CorrelationSpec,
    t: float,
    cfg: QuadratureConfig | None = None,
) -> JointSurvivalResult:
    """P0 (1 + P1/P0). Results outside [0, 1] are reported raw with a warning."""
    if len(firms) == 0:
        raise ValueError("no firms")
    if len(firms) == 1:
        p = float(survival_prob(firms[0], t))
        return JointSurvivalResult(p, 0.0, p, singles=np.array([p]))
    corr_val, err, p = _correction(firms, corr, t, cfg)
    p0 = float(np.prod(p))
    joint = p0 * (1.0 + corr_val)
    warnings = []
    if not 0.0 <= joint <= 1.0:
        msg = f"first-order joint survival {joint:.6g} is outside [0, 1]; perturbation theory is not valid here"
        log.warning(msg)
        warnings.append(msg)
    return JointSurvivalResult(p0, corr_val, joint, "perturbation", p0 * err, p, warnings)


def correlation_duration(firms: Sequence[FirmParams], t: float, cfg: QuadratureConfig | None = None) -> float:
    """d log P / d xi at xi = 0 for a common correlation."""
    if len(firms) < 2:
        raise ValueError("duration needs at least two firms")
    integrals, _, _ = kernel_integrals(firms, t, cfg)
    m, _ = _weights_matrix(firms, t, integrals)
    return _ordered_half_sum(m)


def pairwise_decomposition(pair_joints: Array, singles: Sequence[float]) -> float:
    """Joint survival of all firms from pair joints, valid to first order."""
    p = np.asarray(singles, dtype=float)
    pij = np.asarray(pair_joints, dtype=float)
    n = len(p)
    if pij.shape != (n, n):
        raise ValueError(f"pair matrix shape {pij.shape} does not match {n} singles")
    ratio = pij / np.outer(p, p) - 1.0
    return float(np.prod(p)) * (1.0 + _ordered_half_sum(ratio))


def default_correlation(
    fi: FirmParams,
    fj: FirmParams,
    xi: float,
    t: float,
    cfg: QuadratureConfig | None = None,
) -> float:
    res = joint_survival([fi, fj], CorrelationSpec.equicorrelated(xi), t, cfg)
    pi, pj = res.singles
    return (res.joint - pi * pj) / math.sqrt((1 - pi) * pi * (1 - pj) * pj)


def default_correlation_matrix(firms: Sequence[FirmParams], corr: CorrelationSpec, t: float, cfg: QuadratureConfig | None = None) -> Array:
    """Pairwise first-order default correlations, unit diagonal."""
    n = len(firms)
    validate_correlation(corr, n, horizon=t)
    if corr.is_time_dependent:
        integrals, _, _ = kernel_integrals(firms, t, cfg, weight=corr.xi_at)
        xi = np.ones((n, n))
    else:
        integrals, _, _ = kernel_integrals(firms, t, cfg)
        xi = corr.as_matrix(n)
    m, p = _weights_matrix(firms, t, integrals)
    pij = np.outer(p, p) * (1.0 + xi * m)
    v = np.sqrt((1 - p) * p)
    d = (pij - np.outer(p, p)) / np.outer(v, v)
    np.fill_diagonal(d, 1.0)
    return d


def third_cross_moment_check(
    firms: Sequence[FirmParams],
    corr: CorrelationSpec,
    t: float,
    cfg: QuadratureConfig | None = None,
    triple: tuple[int, int, int] = (0, 1, 2),
) -> float:
    """E[dn_i dn_j dn_k] from first-order joint survivals of the subsets of a triple."""
    i, j, k = triple
    if len({i, j, k}) != 3:
        raise ValueError("triple must hold three distinct indices")
    n = len(firms)
    validate_correlation(corr, n, horizon=t)

    def sub(idx):
        fs = [firms[a] for a in idx]
        if corr.kind == "matrix":
            c = CorrelationSpec.from_matrix(corr.matrix[np.ix_(idx, idx)])
        else:
            c = corr
        return joint_survival(fs, c, t, cfg).joint

    pi, pj, pk = (float(survival_prob(firms[a], t)) for a in (i, j, k))
    pij, pik, pjk = sub([i, j]), sub([i, k]), sub([j, k])
    pijk = sub([i, j, k])
    return pijk - pi * pjk - pj * pik - pk * pij + 2 * pi * pj * pk
