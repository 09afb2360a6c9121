"""Monte Carlo oracle: correlated barrier-absorbed random walks in z-space.

Paths are split into fixed-size blocks; block ``b`` draws from the counter
stream ``(seed, b)`` and every draw is addressed by (path, step, lane), so the
result does not depend on how blocks are scheduled across threads.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numba as nb
import numpy as np

from .firm_model import CorrelationSpec, FirmParams, validate_correlation
from .numerics import Array, QuadratureConfig, counter_normal, counter_uniform, stream_key
from .perturbation import joint_survival

log = logging.getLogger(__name__)

# skip the bridge test when the crossing probability is below exp(-BRIDGE_CUTOFF)
BRIDGE_CUTOFF = 40.0


@dataclass(frozen=True)
class SimConfig:
    paths: int = 1_000_000
    steps_per_year: int = 252
    bridge_correction: bool = True
    seed: int = 0
    block_size: int = 10_000
    workers: int = 1

    def __post_init__(self) -> None:
        if self.block_size < 1 or self.paths < 1:
            raise ValueError("paths and block_size must be positive")
        if self.paths % self.block_size:
            raise ValueError("paths must be a multiple of block_size")
        if self.steps_per_year < 1:
            raise ValueError("steps_per_year must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def blocks(self) -> int:
        return self.paths // self.block_size


@dataclass
class SimResult:
    joint: float
    joint_stderr: float
    marginals: Array
    marginal_stderr: Array
    pair_joint: Array
    default_correlation: Array
    default_correlation_stderr: Array
    paths: int
    steps: int
    config: SimConfig = field(repr=False, default=None)


@nb.njit(nogil=True, cache=True, error_model="numpy")
def _simulate_block(key, n_paths, n_steps, dt, eta, sig, zd, chol, bridge, alive_out):
    n = eta.shape[0]
    # per (path, step): n normal lanes, then n bridge-uniform lanes
    lanes = 2 * n
    sqdt = math.sqrt(dt)
    drift = eta * dt
    scale = sig * sqdt
    eps = np.empty(n)
    z = np.empty(n)
    alive = np.empty(n, dtype=np.bool_)
    n_chol = chol.shape[0]
    for p in range(n_paths):
        for i in range(n):
            z[i] = 0.0
            alive[i] = True
        n_alive = n
        for s in range(n_steps):
            base = (np.uint64(p) * np.uint64(n_steps) + np.uint64(s)) * np.uint64(lanes)
            for k in range(n):
                eps[k] = counter_normal(key, base + np.uint64(k))
            c = min(s, n_chol - 1)
            for i in range(n):
                if not alive[i]:
                    continue
                y = 0.0
                for k in range(i + 1):
                    y += chol[c, i, k] * eps[k]
                zn = z[i] + drift[i] + scale[i] * y
                dead = zn <= zd[i]
                if not dead and bridge:
                    arg = 2.0 * (z[i] - zd[i]) * (zn - zd[i]) / (sig[i] * sig[i] * dt)
                    if arg < BRIDGE_CUTOFF:
                        u = counter_uniform(key, base + np.uint64(n + i))
                        dead = u < math.exp(-arg)
                if dead:
                    alive[i] = False
                    n_alive -= 1
                z[i] = zn
            if n_alive == 0:
                break
        for i in range(n):
            alive_out[p, i] = alive[i]


def _cholesky_schedule(corr: CorrelationSpec, n: int, n_steps: int, dt: float) -> Array:
    if corr.is_time_dependent:
        mids = (np.arange(n_steps) + 0.5) * dt
        mats = [corr.as_matrix(n, float(t)) for t in mids]
    else:
        mats = [corr.as_matrix(n)]
    return np.ascontiguousarray(np.stack([_psd_cholesky(m) for m in mats]))


def _psd_cholesky(m: Array) -> Array:
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        # singular but PSD (e.g. xi -> 1): tiny diagonal jitter
        return np.linalg.cholesky(m + 1e-12 * np.eye(len(m)))


def _block_counts(alive: np.ndarray) -> tuple[int, Array, Array]:
    a = alive.astype(np.int64)
    return int(np.all(alive, axis=1).sum()), a.sum(axis=0), a.T @ a


def _default_corr(pij: Array, p: Array) -> Array:
    v = np.sqrt(np.clip(p * (1 - p), 0, None))
    denom = np.outer(v, v)
    with np.errstate(invalid="ignore", divide="ignore"):
        d = (pij - np.outer(p, p)) / denom
    d[~np.isfinite(d)] = 0.0
    np.fill_diagonal(d, 1.0)
    return d


def simulate_joint_survival(
    firms: Sequence[FirmParams],
    corr: CorrelationSpec,
    t: float,
    sim: SimConfig | None = None,
) -> SimResult:
    """Estimate joint and marginal survival by simulating the correlated walks.

    Increments have covariance sigma_i sigma_j xi_ij dt. With the bridge
    correction on, a surviving step is still killed with the Brownian-bridge
    crossing probability given its endpoints (per firm, ignoring cross-firm
    dependence inside a step).
    """
    sim = sim or SimConfig()
    if not t > 0:
        raise ValueError("horizon must be > 0")
    n = len(firms)
    validate_correlation(corr, n, horizon=t)
    n_steps = max(1, int(round(sim.steps_per_year * t)))
    dt = t / n_steps
    eta = np.array([f.eta for f in firms])
    sig = np.array([f.sigma for f in firms])
    zd = np.array([f.z_d for f in firms])
    chol = _cholesky_schedule(corr, n, n_steps, dt)

    def run(b: int):
        alive = np.empty((sim.block_size, n), dtype=np.bool_)
        key = stream_key(sim.seed, b)
        _simulate_block(key, sim.block_size, n_steps, dt, eta, sig, zd, chol, sim.bridge_correction, alive)
        return _block_counts(alive)

    if sim.workers == 1:
        counts = [run(b) for b in range(sim.blocks)]
    else:
        with ThreadPoolExecutor(sim.workers) as pool:
            counts = list(pool.map(run, range(sim.blocks)))

    # fixed ascending-block reduction
    joint_c = np.array([c[0] for c in counts], dtype=np.int64)
    marg_c = np.stack([c[1] for c in counts])
    pair_c = np.stack([c[2] for c in counts])
    N = sim.paths
    joint = joint_c.sum() / N
    marg = marg_c.sum(axis=0) / N
    pair = pair_c.sum(axis=0) / N
    d = _default_corr(pair, marg)
    if sim.blocks > 1:
        bs = sim.block_size
        d_blocks = np.stack([_default_corr(pc / bs, mc / bs) for pc, mc in zip(pair_c, marg_c)])
        d_err = d_blocks.std(axis=0, ddof=1) / math.sqrt(sim.blocks)
    else:
        d_err = np.full((n, n), np.nan)
    return SimResult(
        joint=float(joint),
        joint_stderr=float(math.sqrt(max(joint * (1 - joint), 1.0 / N) / N)),
        marginals=marg,
        marginal_stderr=np.sqrt(np.maximum(marg * (1 - marg), 1.0 / N) / N),
        pair_joint=pair,
        default_correlation=d,
        default_correlation_stderr=d_err,
        paths=N,
        steps=n_steps,
        config=sim,
    )


@dataclass
class LadderRow:
    xi: float
    mc_joint: float
    mc_stderr: float
    perturbative_joint: float
    difference: float


@dataclass
class LadderStudy:
    rows: list[LadderRow]
    quad_coef: float  # a in difference ~ a xi^2 + b xi^3
    cubic_coef: float
    linear_coef: float  # free linear term of the auxiliary fit, should be ~0
    linear_stderr: float


def ladder_study(
    firms: Sequence[FirmParams],
    xi_grid: Sequence[float],
    t: float,
    sim: SimConfig | None = None,
    cfg: QuadratureConfig | None = None,
) -> LadderStudy:
    """Compare MC and first-order joint survival along an equicorrelation grid.

    The MC-minus-perturbation difference should be O(xi^2). It is fitted as
    a xi^2 + b xi^3 and, separately, with a free linear term whose size is
    reported against its standard error.
    """
    rows = []
    for xi in xi_grid:
        corr = CorrelationSpec.equicorrelated(xi)
        mc = simulate_joint_survival(firms, corr, t, sim)
        pt = joint_survival(firms, corr, t, cfg).joint
        rows.append(LadderRow(xi, mc.joint, mc.joint_stderr, pt, mc.joint - pt))
    x = np.array([r.xi for r in rows])
    y = np.array([r.difference for r in rows])
    w = 1.0 / np.array([max(r.mc_stderr, 1e-12) for r in rows])
    a = b = lin = lin_err = float("nan")
    if len(rows) >= 2:
        X = np.stack([x**2, x**3], axis=1)
        coef, *_ = np.linalg.lstsq(X * w[:, None], y * w, rcond=None)
        a, b = map(float, coef)
    if len(rows) >= 3:
        X = np.stack([x, x**2, x**3], axis=1)[:, : min(3, len(rows) - 1)]
        Xw = X * w[:, None]
        coef, *_ = np.linalg.lstsq(Xw, y * w, rcond=None)
        cov = np.linalg.pinv(Xw.T @ Xw)
        lin, lin_err = float(coef[0]), float(math.sqrt(cov[0, 0]))
    return LadderStudy(rows, a, b, lin, lin_err)
