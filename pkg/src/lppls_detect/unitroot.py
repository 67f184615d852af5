"""Dickey-Fuller and Phillips-Perron unit-root tests, constant-only form.

Fit residuals should behave like a mean-reverting AR(1) process rather than
a random walk; both tests check that by testing the unit-root null. Only the
constant/no-trend specification is provided because fit residuals have no
deterministic trend left by construction.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import UsageError

MIN_OBSERVATIONS = 30


def mackinnon_crit_5pct(nobs: int) -> float:
    """Finite-sample 5% critical value for the constant-only test statistic.

    Response-surface fit in 1/n; approaches the asymptotic -2.8615 from
    below as the sample grows.
    """
    if nobs < 1:
        raise UsageError("sample size must be positive")
    n = float(nobs)
    return -2.86154 - 2.8903 / n - 4.234 / n**2 - 40.04 / n**3


def newey_west_lag(nobs: int) -> int:
    """Standard automatic bandwidth floor(4 * (n/100)^(2/9))."""
    return int(4.0 * (nobs / 100.0) ** (2.0 / 9.0))


def _ols(x: np.ndarray, y: np.ndarray):
    """Least squares with coefficient standard errors. Returns (beta, resid, se)."""
    beta, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < x.shape[1]:
        raise UsageError("collinear regressors in unit-root regression")
    resid = y - x @ beta
    dof = x.shape[0] - x.shape[1]
    s2 = float(resid @ resid) / dof
    xtx_inv = np.linalg.inv(x.T @ x)
    se = np.sqrt(s2 * np.diag(xtx_inv))
    return beta, resid, se


def dickey_fuller_stat(y: np.ndarray, lags: int = 0) -> float:
    """t-statistic on the level coefficient in dy_t = c + pi*y_{t-1} + e_t.

    lags > 0 augments the regression with that many lagged differences
    (fixed lag count, no data-driven selection).
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.size < MIN_OBSERVATIONS:
        raise UsageError(f"need a 1-d series of at least {MIN_OBSERVATIONS} observations")
    if lags < 0 or lags > y.size - MIN_OBSERVATIONS + 10:
        raise UsageError("invalid lag count for augmentation")

    dy = np.diff(y)
    lhs = dy[lags:]
    n = lhs.size
    cols = [y[lags:-1], np.ones(n)]
    for j in range(1, lags + 1):
        cols.append(dy[lags - j : len(dy) - j])
    x = np.column_stack(cols)
    beta, _, se = _ols(x, lhs)
    return float(beta[0] / se[0])


def phillips_perron_stat(y: np.ndarray, lags: int | None = None) -> float:
    """Z_tau statistic from the levels regression y_t = rho*y_{t-1} + c + u_t.

    The serial-correlation correction uses the Newey-West long-run variance
    of the regression residuals with Bartlett weights; `lags` defaults to
    the automatic bandwidth.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.size < MIN_OBSERVATIONS:
        raise UsageError(f"need a 1-d series of at least {MIN_OBSERVATIONS} observations")

    lhs = y[1:]
    n = lhs.size
    if lags is None:
        lags = newey_west_lag(n)
    if lags < 0 or lags >= n:
        raise UsageError("invalid Newey-West lag count")

    x = np.column_stack([y[:-1], np.ones(n)])
    beta, u, se = _ols(x, lhs)
    k = x.shape[1]

    s2 = float(u @ u) / (n - k)
    gamma0 = float(u @ u) / n
    lam2 = gamma0
    for j in range(1, lags + 1):
        w = 1.0 - j / (lags + 1.0)
        lam2 += 2.0 * w * float(u[j:] @ u[:-j]) / n
    if lam2 <= 0.0:
        # Bartlett weights keep this nonnegative; zero means no variation
        raise UsageError("degenerate residual variance in Phillips-Perron test")

    t_rho = (beta[0] - 1.0) / se[0]
    lam = math.sqrt(lam2)
    s = math.sqrt(s2)
    return float(math.sqrt(gamma0 / lam2) * t_rho - (lam2 - gamma0) / (2.0 * lam * s) * n * se[0])
