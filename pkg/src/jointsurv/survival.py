"""Closed-form single-firm first-passage quantities.

In barrier-relative coordinates a firm's log asset value z starts at 0 and
drifts at ``eta`` with volatility ``sigma``; it defaults on reaching
``z_d < 0``. All functions broadcast over their array arguments.
"""
from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike

from .firm_model import FirmParams
from .numerics import INV_SQRT_2PI, TWO_OVER_SQRT_PI, erfc, exp_erfc

TAU_FLOOR = 1e-12


def _check_time(t: ArrayLike, name: str = "t") -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError(f"{name} must be > 0")
    return t


def _ret(v: np.ndarray):
    return v if np.ndim(v) else float(v)


def transition_density(f: FirmParams, z: ArrayLike, x: ArrayLike, tau: ArrayLike):
    """Density of reaching z at time tau from x without touching the barrier."""
    tau = np.maximum(_check_time(tau, "tau"), TAU_FLOOR)
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    s2, zd, eta = f.sigma**2, f.z_d, f.eta
    v = s2 * tau
    direct = -((z - x - eta * tau) ** 2) / (2 * v)
    # image exponent never exceeds the direct one on z, x >= z_d
    image = -((z + x - 2 * zd - eta * tau) ** 2) / (2 * v) + 2 * eta * (zd - x) / s2
    out = INV_SQRT_2PI / np.sqrt(v) * (np.exp(direct) - np.exp(image))
    out = np.where((z > zd) & (x > zd), np.maximum(out, 0.0), 0.0)
    return _ret(out)


def survival_density(f: FirmParams, z: ArrayLike, t: ArrayLike):
    """Density in z of surviving to t having started at z = 0."""
    return transition_density(f, z, 0.0, t)


def partial_survival_U(f: FirmParams, z: ArrayLike, tau: ArrayLike):
    """Probability of surviving a further tau years when starting at z."""
    tau = _check_time(tau, "tau")
    z = np.asarray(z, dtype=float)
    s2, zd, eta = f.sigma**2, f.z_d, f.eta
    a = np.sqrt(2 * s2 * tau)
    dist = z - zd
    w1 = (dist + eta * tau) / a
    w2 = (dist - eta * tau) / a
    c = -2 * eta * dist / s2
    out = 0.5 * np.asarray(erfc(-w1)) - 0.5 * np.asarray(exp_erfc(c, w2))
    out = np.where(dist > 0, np.clip(out, 0.0, 1.0), 0.0)
    return _ret(out)


def partial_survival_U_gradient(f: FirmParams, z: ArrayLike, tau: ArrayLike):
    """Analytic dU/dz."""
    tau = _check_time(tau, "tau")
    z = np.asarray(z, dtype=float)
    s2, zd, eta = f.sigma**2, f.z_d, f.eta
    a = np.sqrt(2 * s2 * tau)
    dist = z - zd
    w1 = (dist + eta * tau) / a
    w2 = (dist - eta * tau) / a
    c = -2 * eta * dist / s2
    # the image term's Gaussian part folds into exp(-w1^2) since c - w2^2 = -w1^2
    out = TWO_OVER_SQRT_PI * np.exp(-w1 * w1) / a + (eta / s2) * np.asarray(exp_erfc(c, w2))
    out = np.where(dist >= 0, out, 0.0)
    return _ret(out)


def survival_prob(f: FirmParams, t: ArrayLike):
    """Probability the firm has not defaulted by t."""
    return partial_survival_U(f, 0.0, t)


def default_prob(f: FirmParams, t: ArrayLike):
    t = _check_time(t)
    s2, zd, eta = f.sigma**2, f.z_d, f.eta
    a = np.sqrt(2 * s2 * t)
    # 1 - P without cancellation for very safe firms
    out = 0.5 * np.asarray(erfc((eta * t - zd) / a)) + 0.5 * np.asarray(
        exp_erfc(2 * eta * zd / s2, -(eta * t + zd) / a)
    )
    return _ret(out)


__all__ = [
    "transition_density",
    "survival_density",
    "partial_survival_U",
    "partial_survival_U_gradient",
    "survival_prob",
    "default_prob",
]
