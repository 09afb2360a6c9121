"""Firm parameters, calibration from market data, and correlation specifications."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .numerics import Array

PSD_REL_TOL = 1e-10


class CalibrationError(ValueError):
    pass


class CorrelationError(ValueError):
    pass


class FirmFileError(ValueError):
    pass


@dataclass(frozen=True)
class FirmParams:
    """One firm in barrier-relative log coordinates.

    ``mu`` and ``lam`` only enter through ``mu - lam``; in risk-neutral mode
    with the barrier growing at the risk-free rate both equal r and cancel,
    which is why the defaults are zero.
    """

    ticker: str
    sigma: float
    d_over_v0: float
    q: float = 0.0
    lam: float = 0.0
    mu: float = 0.0

    def __post_init__(self) -> None:
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise CalibrationError(f"{self.ticker}: asset volatility must be > 0")
        if not 0 < self.d_over_v0 < 1:
            raise CalibrationError(
                f"{self.ticker}: barrier fraction d/V0={self.d_over_v0} must lie in (0, 1)"
            )
        if not math.isfinite(self.eta):
            raise CalibrationError(f"{self.ticker}: drift is not finite")

    @property
    def z_d(self) -> float:
        return math.log(self.d_over_v0)

    @property
    def eta(self) -> float:
        return self.mu - 0.5 * self.sigma**2 - self.lam - self.q


@dataclass(frozen=True)
class MarketInputs:
    ticker: str
    market_cap: float
    debt_pv: float
    equity_vol: float
    dividend_yield: float = 0.0
    barrier_growth: float | None = None  # None: grows at the risk-free rate
    mu: float | None = None  # None: risk-neutral drift

    def __post_init__(self) -> None:
        if not self.market_cap > 0:
            raise CalibrationError(f"{self.ticker}: market cap must be > 0")
        if not self.debt_pv >= 0:
            raise CalibrationError(f"{self.ticker}: debt must be >= 0")
        if not self.equity_vol > 0:
            raise CalibrationError(f"{self.ticker}: equity volatility must be > 0")
        if not self.dividend_yield >= 0:
            raise CalibrationError(f"{self.ticker}: dividend yield must be >= 0")


def calibrate(m: MarketInputs, rate: float | None = None) -> FirmParams:
    """Map market data to firm parameters: V0 = S0 + D0, d/V0 = D0/V0, sigma = (S0/V0) sigma_S.

    The risk-free ``rate`` is only needed when exactly one of the drift and
    the barrier growth is tied to it.
    """
    v0 = m.market_cap + m.debt_pv
    d = m.debt_pv / v0
    if d <= 0:
        raise CalibrationError(f"{m.ticker}: zero debt gives no default barrier")
    if d >= 1:
        raise CalibrationError(f"{m.ticker}: firm starts at/below barrier")
    sigma = m.market_cap / v0 * m.equity_vol
    mu, lam = _resolve_drifts(m.ticker, m.mu, m.barrier_growth, rate)
    return FirmParams(m.ticker, sigma, d, m.dividend_yield, lam, mu)


def _resolve_drifts(ticker: str, mu: float | None, lam: float | None, rate: float | None) -> tuple[float, float]:
    if mu is None and lam is None:
        r = rate or 0.0
        return r, r
    if mu is None or lam is None:
        if rate is None:
            raise CalibrationError(f"{ticker}: a risk-free rate is required when only one of mu/lambda is tied to it")
        return (rate if mu is None else mu), (rate if lam is None else lam)
    return mu, lam


# ---------------------------------------------------------------------------
# correlations


@dataclass(frozen=True)
class CorrelationSpec:
    """Asset correlations: a full matrix, a constant common value, or a common value xi(t')."""

    kind: str
    xi: float = 0.0
    matrix: Array | None = field(default=None, compare=False)
    xi_fn: Callable[[Array], Array] | None = field(default=None, compare=False)

    @classmethod
    def equicorrelated(cls, xi: float) -> "CorrelationSpec":
        return cls("equicorrelated", xi=float(xi))

    @classmethod
    def from_matrix(cls, m: Sequence[Sequence[float]] | Array) -> "CorrelationSpec":
        return cls("matrix", matrix=np.array(m, dtype=float))

    @classmethod
    def time_dependent(cls, fn: Callable[[Array], Array]) -> "CorrelationSpec":
        return cls("time_dependent", xi_fn=fn)

    @property
    def is_time_dependent(self) -> bool:
        return self.kind == "time_dependent"

    def xi_at(self, t: Array | float) -> Array:
        """Common correlation at time(s) t; only for the scalar variants."""
        t = np.asarray(t, dtype=float)
        if self.kind == "equicorrelated":
            return np.full(t.shape, self.xi)
        if self.kind == "time_dependent":
            return np.broadcast_to(np.asarray(self.xi_fn(t), dtype=float), t.shape).copy()
        raise CorrelationError("xi_at is undefined for a full matrix")

    def as_matrix(self, n: int, t: float = 0.0) -> Array:
        if self.kind == "matrix":
            if self.matrix.shape != (n, n):
                raise CorrelationError(f"matrix is {self.matrix.shape}, expected {(n, n)}")
            return self.matrix.copy()
        xi = float(self.xi_at(t))
        return equicorrelation_matrix(n, xi)


def equicorrelation_matrix(n: int, xi: float) -> Array:
    m = np.full((n, n), xi)
    np.fill_diagonal(m, 1.0)
    return m


def check_psd(m: Array) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise CorrelationError("correlation matrix must be square")
    if not np.allclose(m, m.T, atol=1e-12):
        raise CorrelationError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(m), 1.0, atol=1e-12):
        raise CorrelationError("correlation matrix must have unit diagonal")
    if np.any(np.abs(m) > 1 + 1e-12):
        raise CorrelationError("correlations must lie in [-1, 1]")
    eig = np.linalg.eigvalsh(m)
    if eig[0] < -PSD_REL_TOL * max(eig[-1], 1.0):
        raise CorrelationError(f"correlation matrix is not positive semi-definite (min eigenvalue {eig[0]:.3g})")


def _check_equi(xi: Array, n: int) -> None:
    lo = -1.0 / (n - 1) if n > 1 else -1.0
    bad = (xi < lo - 1e-15) | (xi >= 1.0) | ~np.isfinite(xi)
    if np.any(bad):
        raise CorrelationError(f"equicorrelation must lie in [{lo:.4g}, 1) for n={n}")


def validate_correlation(spec: CorrelationSpec, n: int, horizon: float = 5.0, grid: int = 257) -> CorrelationSpec:
    """Return ``spec`` unchanged if it is a valid correlation structure for n firms."""
    if n < 1:
        raise CorrelationError("need at least one firm")
    if spec.kind == "matrix":
        if spec.matrix is None or spec.matrix.shape != (n, n):
            shape = None if spec.matrix is None else spec.matrix.shape
            raise CorrelationError(f"matrix shape {shape} does not match {n} firms")
        check_psd(spec.matrix)
    elif spec.kind == "equicorrelated":
        _check_equi(np.array([spec.xi]), n)
    elif spec.kind == "time_dependent":
        if spec.xi_fn is None:
            raise CorrelationError("time-dependent correlation needs a function")
        _check_equi(spec.xi_at(np.linspace(0.0, horizon, grid)), n)
    else:
        raise CorrelationError(f"unknown correlation kind {spec.kind!r}")
    return spec


# ---------------------------------------------------------------------------
# files

FIRM_COLUMNS = ["ticker", "d_over_v0", "sigma", "q", "lambda_mode", "mu_mode"]
MARKET_COLUMNS = ["ticker", "market_cap", "debt_pv", "equity_vol", "dividend_yield"]


def _num(text: str, what: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise FirmFileError(f"line {line}: {what} {text!r} is not a number") from None
    if not math.isfinite(v):
        raise FirmFileError(f"line {line}: {what} must be finite")
    return v


def _mode(text: str, what: str, line: int) -> float | None:
    t = text.strip().lower()
    if t in ("", "r", "risk_free", "risk_neutral"):
        return None
    return _num(t, what, line)


def read_firm_csv(path: str | Path, rate: float | None = None) -> list[FirmParams]:
    """Read either firm-parameter or market-data CSV (detected from the header).

    ``lambda_mode``/``mu_mode`` accept ``r`` (tied to the risk-free rate) or a
    numeric annual rate.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not rows:
        raise FirmFileError(f"{path}: empty file")
    header = [c.strip() for c in rows[0][1]]
    if header == FIRM_COLUMNS:
        market = False
    elif header == MARKET_COLUMNS:
        market = True
    else:
        raise FirmFileError(
            f"line {rows[0][0]}: unrecognised header {header}; expected {FIRM_COLUMNS} or {MARKET_COLUMNS}"
        )
    firms: list[FirmParams] = []
    seen: set[str] = set()
    for line, row in rows[1:]:
        if len(row) != len(header):
            raise FirmFileError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        cells = dict(zip(header, (c.strip() for c in row)))
        ticker = cells["ticker"]
        if not ticker:
            raise FirmFileError(f"line {line}: empty ticker")
        if ticker in seen:
            raise FirmFileError(f"line {line}: duplicate ticker {ticker}")
        seen.add(ticker)
        try:
            if market:
                m = MarketInputs(
                    ticker,
                    _num(cells["market_cap"], "market_cap", line),
                    _num(cells["debt_pv"], "debt_pv", line),
                    _num(cells["equity_vol"], "equity_vol", line),
                    _num(cells["dividend_yield"], "dividend_yield", line),
                )
                firms.append(calibrate(m, rate))
            else:
                lam = _mode(cells["lambda_mode"], "lambda_mode", line)
                mu = _mode(cells["mu_mode"], "mu_mode", line)
                mu, lam = _resolve_drifts(ticker, mu, lam, rate)
                firms.append(
                    FirmParams(
                        ticker,
                        _num(cells["sigma"], "sigma", line),
                        _num(cells["d_over_v0"], "d_over_v0", line),
                        _num(cells["q"], "q", line),
                        lam,
                        mu,
                    )
                )
        except CalibrationError as exc:
            raise FirmFileError(f"line {line}: {exc}") from None
    return firms


def read_correlation_csv(path: str | Path, tickers: Sequence[str]) -> CorrelationSpec:
    """Square matrix CSV with a ticker header row; reindexed to ``tickers`` order."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise CorrelationError(f"{path}: empty correlation file")
    header = [c.strip() for c in rows[0]]
    # allow an optional leading label column
    labelled = len(rows) > 1 and len(rows[1]) == len(header) and header[0] == ""
    names = header[1:] if labelled else header
    body = rows[1:]
    if len(body) != len(names):
        raise CorrelationError(f"{path}: expected {len(names)} matrix rows, got {len(body)}")
    try:
        m = np.array([[float(c) for c in (r[1:] if labelled else r)] for r in body])
    except ValueError as exc:
        raise CorrelationError(f"{path}: {exc}") from None
    if m.shape != (len(names), len(names)):
        raise CorrelationError(f"{path}: matrix is not square")
    if sorted(names) != sorted(tickers):
        raise CorrelationError(f"{path}: tickers {names} do not match firms {list(tickers)}")
    idx = [names.index(t) for t in tickers]
    m = m[np.ix_(idx, idx)]
    spec = CorrelationSpec.from_matrix(m)
    return validate_correlation(spec, len(tickers))
