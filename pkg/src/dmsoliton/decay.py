"""Tail diagnostics: the tail distribution beta(n), rate fits, and the
self-consistency bound.

beta(n) = (sum_{|x| >= n} |f(x)|^2)^{1/2} is monotone and smooths parity
oscillations, so decay rates are extracted from it rather than from |f(x)|
pointwise.  The exponential rate is the least-squares slope of -ln beta
against n; the super-exponential rate uses the regressor (n+1) ln(n+1),
matching the weight family (s+1)^{nu(s+1)} exactly.  Fit windows skip the
core (beta > 0.1 beta(0)) and the numerical floor (beta < 100 floor),
because floor contamination biases slopes down.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from dmsoliton.field import LatticeField

_MIN_WINDOW = 8


class WindowError(ValueError):
    pass


class FitResult(NamedTuple):
    rate: float
    residual: float   # rms misfit of -ln(beta) over the window


@dataclass
class TailStats:
    beta: np.ndarray
    floor: float
    n_lo: int
    n_hi: int
    nu_hat: Optional[float] = None
    nu2_hat: Optional[float] = None
    exp_fit_residual: Optional[float] = None
    superexp_fit_residual: Optional[float] = None

    def window(self) -> np.ndarray:
        return np.arange(self.n_lo, self.n_hi + 1)


def tail_distribution(f: LatticeField) -> np.ndarray:
    """beta(n) for n = 0..M; beta(0) = ||f||_2 and beta is nonincreasing."""
    m = f.box_radius
    sq = np.abs(f.values) ** 2
    out = np.empty(m + 1)
    # accumulate from the boundary inward so each beta is a pure prefix sum
    acc = 0.0
    out[m] = sq[0] + sq[-1] if m > 0 else sq[m]
    for n in range(m, 0, -1):
        acc += sq[m - n] + sq[m + n]
        out[n] = acc
    out[0] = acc + sq[m]
    return np.sqrt(out)


def make_tail_stats(source: Union[LatticeField, np.ndarray],
                    floor: Optional[float] = None) -> TailStats:
    """Window selection for rate fits; ``source`` is a field or a beta array."""
    beta = tail_distribution(source) if isinstance(source, LatticeField) \
        else np.asarray(source, dtype=float)
    if beta.size < 2 or beta[0] <= 0:
        raise WindowError("tail distribution is empty")
    if floor is None:
        # boundary mass is the box-leakage estimate
        floor = max(1e-13, 2.0 * float(beta[-1]))
    above_core = np.nonzero(beta < 0.1 * beta[0])[0]
    n_lo = int(above_core[0]) if above_core.size else 1
    above_floor = np.nonzero(beta > 100.0 * floor)[0]
    n_hi = int(above_floor[-1]) if above_floor.size else 0
    return TailStats(beta=beta, floor=floor, n_lo=n_lo, n_hi=n_hi)


def _fit_line(t: np.ndarray, y: np.ndarray) -> FitResult:
    a = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    return FitResult(float(coef[0]), float(np.sqrt(np.mean(resid ** 2))))


def _window_points(stats: TailStats):
    n = stats.window()
    if n.size < _MIN_WINDOW:
        raise WindowError(
            f"fit window [{stats.n_lo}, {stats.n_hi}] has {n.size} points; "
            f"need at least {_MIN_WINDOW} above the floor")
    beta = stats.beta[n]
    if np.any(beta <= 0):
        raise WindowError("beta hits zero inside the fit window")
    return n, -np.log(beta)


def fit_exp_rate(stats: TailStats) -> FitResult:
    """Least-squares slope of -ln beta(n) versus n over the window."""
    n, y = _window_points(stats)
    fit = _fit_line(n.astype(float), y)
    stats.nu_hat, stats.exp_fit_residual = fit.rate, fit.residual
    return fit


def fit_superexp_rate(stats: TailStats) -> FitResult:
    """Least-squares slope of -ln beta(n) versus (n+1) ln(n+1) over the window."""
    n, y = _window_points(stats)
    t = (n + 1.0) * np.log(n + 1.0)
    fit = _fit_line(t, y)
    stats.nu2_hat, stats.superexp_fit_residual = fit.rate, fit.residual
    return fit


def heuristic_rate(omega: float, d_av: float) -> float:
    """The predicted exponential rate: 2 d_av (cosh(nu) - 1) = |omega|."""
    if omega >= 0 or d_av <= 0:
        raise ValueError("heuristic rate needs omega < 0 and d_av > 0")
    return float(np.arccosh(abs(omega) / (2.0 * d_av) + 1.0))


@dataclass
class SelfConsistencyReport:
    theta: float
    alpha: float
    c_star: float
    c_star_half_range: float
    n_max: int
    stable: bool
    argmax: tuple


def self_consistency_check(stats: TailStats, theta: float, alpha: float,
                           growth_slack: float = 1.5) -> SelfConsistencyReport:
    """C* = max_{n,m} beta(n+m) / (beta(n)^theta + (m+1)^{-alpha(m+1)}).

    The bound carries an implicit constant, so the check is that C* is finite
    and does not grow when the (n, m) range is extended: C* over the full
    range must stay within growth_slack of C* over the half range.  Geometric
    (merely exponential) tails fail this by a factor that explodes with the
    range.
    """
    if not theta > 1:
        raise ValueError("theta must exceed 1")
    if not 0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    beta = stats.beta
    n_max = stats.n_hi
    if n_max < 2:
        raise WindowError("not enough tail above the floor")

    def scan(cap: int):
        best, arg = 0.0, (0, 0)
        for n in range(cap + 1):
            for m in range(cap + 1 - n):
                denom = beta[n] ** theta + np.exp(-alpha * (m + 1) * np.log(m + 1.0))
                val = beta[n + m] / denom
                if val > best:
                    best, arg = float(val), (n, m)
        return best, arg

    c_half, _ = scan(n_max // 2)
    c_full, arg = scan(n_max)
    stable = c_full <= growth_slack * c_half
    return SelfConsistencyReport(theta=theta, alpha=alpha, c_star=c_full,
                                 c_star_half_range=c_half, n_max=n_max,
                                 stable=bool(stable), argmax=arg)


def analyze_tail(f: LatticeField, d_av: Optional[float] = None,
                 omega: Optional[float] = None,
                 floor: Optional[float] = None) -> TailStats:
    """TailStats with whichever fits the regime supports filled in."""
    stats = make_tail_stats(f, floor=floor)
    try:
        fit_exp_rate(stats)
        fit_superexp_rate(stats)
    except WindowError:
        pass
    return stats
