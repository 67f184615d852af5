"""Qualification filters applied to calibrated fits.

A raw optimizer fit is only evidence of a bubble if it also looks like one:
exponent and frequency inside the meaningful band, critical time close past
the window end, enough oscillations to be distinguishable from noise, price
tracked closely, genuine spectral peak in the detrended residual, and
mean-reverting (not random-walk) fit residuals. Each condition gets its own
boolean so ensembles can report why fits were rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .calibration import damping_ratio
from .errors import ConfigError, UsageError
from .model import LpplsFit, lppls_curve
from .series import PriceSeries
from .spectral import DEFAULT_OVERSAMPLING, lomb_scan
from .unitroot import dickey_fuller_stat, phillips_perron_stat

# response-surface coefficients (constant-only) for the finite-sample
# critical value at the three conventional significance levels
_CRIT_SURFACE = {
    0.01: (-3.43035, -6.5393, -16.786, -79.433),
    0.05: (-2.86154, -2.8903, -4.234, -40.04),
    0.10: (-2.56677, -1.5384, -2.809, 0.0),
}


@dataclass(frozen=True)
class FilterConfig:
    """Thresholds for fit qualification.

    oscillation_denominator is pi for the half-period reading of the
    oscillation count; 2 reproduces the stricter printed variant.
    unit_root_rule selects whether both tests or either test must reject.
    """

    m_range: tuple[float, float] = (0.01, 0.99)
    omega_range: tuple[float, float] = (2.0, 25.0)
    tc_fraction: float = 0.2
    min_half_periods: float = 2.5
    max_rel_err: float = 0.15
    alpha_sig: float = 0.05
    unit_root_alpha: float = 0.05
    oscillation_denominator: float = math.pi
    unit_root_rule: str = "both"
    df_lags: int = 0
    require_damping: bool = True
    oversampling: int = DEFAULT_OVERSAMPLING

    def __post_init__(self):
        if not (self.m_range[0] < self.m_range[1]):
            raise ConfigError("m_range must be ordered")
        if not (self.omega_range[0] < self.omega_range[1]):
            raise ConfigError("omega_range must be ordered")
        if self.omega_range[0] <= 0:
            raise ConfigError("omega_range must be positive")
        if not (0 < self.alpha_sig < 1):
            raise ConfigError("alpha_sig must lie in (0, 1)")
        if self.unit_root_alpha not in _CRIT_SURFACE:
            raise ConfigError(
                "unit_root_alpha must be one of "
                + ", ".join(str(a) for a in sorted(_CRIT_SURFACE))
            )
        if self.tc_fraction <= 0:
            raise ConfigError("tc_fraction must be positive")
        if self.min_half_periods <= 0:
            raise ConfigError("min_half_periods must be positive")
        if self.max_rel_err <= 0:
            raise ConfigError("max_rel_err must be positive")
        if self.oscillation_denominator <= 0:
            raise ConfigError("oscillation_denominator must be positive")
        if self.unit_root_rule not in ("both", "either"):
            raise ConfigError("unit_root_rule must be 'both' or 'either'")
        if self.df_lags < 0:
            raise ConfigError("df_lags must be nonnegative")


@dataclass(frozen=True)
class FilterVerdict:
    """Per-condition outcome for one fit.

    Boolean fields are None when the check was skipped (bound failures
    short-circuit the spectral and unit-root tests). `passed` is the
    conjunction of all eight conditions; a skipped check never passes.
    """

    m_ok: bool
    omega_ok: bool
    tc_ok: bool
    oscillation_ok: bool
    damping_ok: bool
    rel_err_ok: bool | None = None
    lomb_ok: bool | None = None
    ar1_ok: bool | None = None
    damping: float = math.nan
    half_periods: float = math.nan
    max_rel_err_observed: float | None = None
    lomb_p: float | None = None
    pp_stat: float | None = None
    df_stat: float | None = None

    @property
    def bounds_ok(self) -> bool:
        return self.m_ok and self.omega_ok and self.tc_ok and self.oscillation_ok and self.damping_ok

    @property
    def passed(self) -> bool:
        return (
            self.bounds_ok
            and self.rel_err_ok is True
            and self.lomb_ok is True
            and self.ar1_ok is True
        )


def half_period_count(fit: LpplsFit, denominator: float = math.pi) -> float:
    """Number of half-oscillations inside the window,
    (omega/denominator) * ln((tc - t1)/(tc - t2)) in window-relative time."""
    t2 = float(fit.window.t2_index - fit.window.t1_index)
    if fit.tc <= t2:
        return math.inf  # tc inside the window: the log diverges
    return (fit.omega / denominator) * math.log(fit.tc / (fit.tc - t2))


def damping_of(fit: LpplsFit) -> float:
    """Damping ratio of the fit; +inf when there is no oscillation."""
    return damping_ratio(fit.m, fit.B, fit.omega, fit.C1, fit.C2)


def check_bounds(fit: LpplsFit, config: FilterConfig) -> FilterVerdict:
    """Parameter-box, oscillation-count and damping checks only.

    Returns a verdict whose data-dependent fields are unset; qualify()
    fills those in when the bounds admit the fit.
    """
    t2 = float(fit.window.t2_index - fit.window.t1_index)
    d = damping_of(fit)
    hp = half_period_count(fit, config.oscillation_denominator)
    return FilterVerdict(
        m_ok=config.m_range[0] <= fit.m <= config.m_range[1],
        omega_ok=config.omega_range[0] <= fit.omega <= config.omega_range[1],
        tc_ok=t2 <= fit.tc <= t2 + config.tc_fraction * t2,
        oscillation_ok=hp >= config.min_half_periods,
        damping_ok=(d >= 1.0) if config.require_damping else True,
        damping=d,
        half_periods=hp,
    )


def _window_arrays(fit: LpplsFit, series: PriceSeries):
    w = fit.window
    prices = series.prices[w.t1_index : w.t2_index + 1]
    times = np.arange(prices.size, dtype=np.float64)
    return times, prices


def check_rel_err(fit: LpplsFit, series: PriceSeries, threshold: float = 0.15) -> tuple[bool, float]:
    """Worst pointwise relative price error of the fitted curve."""
    times, prices = _window_arrays(fit, series)
    curve = np.exp(lppls_curve(times, fit.tc, fit.m, fit.omega, fit.A, fit.B, fit.C1, fit.C2))
    worst = float(np.max(np.abs(curve - prices) / prices))
    return worst <= threshold, worst


def lomb_test(fit: LpplsFit, series: PriceSeries, config: FilterConfig) -> tuple[float, bool]:
    """Spectral check of the detrended residual.

    r(t) = (tc-t)^(-m) (ln p - A - B (tc-t)^m) strips the power-law trend
    but keeps the oscillatory part; a real log-periodic signature shows as
    a significant peak against tau = ln(tc - t).
    """
    times, prices = _window_arrays(fit, series)
    if times.size < 30:
        raise UsageError("window too short for the spectral test")
    dt = fit.tc - times
    if np.any(dt <= 0):
        raise UsageError("critical time inside the window")
    pow_term = dt**fit.m
    r = (np.log(prices) - fit.A - fit.B * pow_term) / pow_term
    tau = np.log(dt)
    band = (
        config.omega_range[0] / (2.0 * math.pi),
        config.omega_range[1] / (2.0 * math.pi),
    )
    result = lomb_scan(tau, r, freq_range=band, oversampling=config.oversampling)
    return result.p_value, result.p_value <= config.alpha_sig


def unit_root_test(
    fit: LpplsFit, series: PriceSeries, config: FilterConfig
) -> tuple[float, float, bool]:
    """Reject the unit-root null for the fit residuals ln p_hat - ln p.

    Returns (pp_stat, df_stat, ok) where ok applies the configured rule at
    the configured significance level. Exactly constant residuals are
    treated as trivially stationary.
    """
    times, prices = _window_arrays(fit, series)
    if times.size < 30:
        raise UsageError("window too short for unit-root testing")
    eps = lppls_curve(times, fit.tc, fit.m, fit.omega, fit.A, fit.B, fit.C1, fit.C2) - np.log(prices)
    # numerically constant residuals (exact fits up to float round-trip) are
    # trivially stationary; the regression below would be rank-deficient
    if np.max(np.abs(eps - eps.mean())) < 1e-10:
        return -math.inf, -math.inf, True

    b = _CRIT_SURFACE[config.unit_root_alpha]

    def crit(nobs: int) -> float:
        return b[0] + b[1] / nobs + b[2] / nobs**2 + b[3] / nobs**3

    df = dickey_fuller_stat(eps, lags=config.df_lags)
    pp = phillips_perron_stat(eps)
    df_rej = df < crit(eps.size - 1 - config.df_lags)
    pp_rej = pp < crit(eps.size - 1)
    ok = (df_rej and pp_rej) if config.unit_root_rule == "both" else (df_rej or pp_rej)
    return pp, df, ok


def qualify(fit: LpplsFit, series: PriceSeries, config: FilterConfig) -> FilterVerdict:
    """Run the full battery on one fit.

    Bound checks come first; if any fails, the spectral and unit-root
    tests are skipped and their fields left unset.
    """
    partial = check_bounds(fit, config)
    if not partial.bounds_ok:
        return partial

    rel_ok, rel_worst = check_rel_err(fit, series, config.max_rel_err)
    lomb_p, lomb_ok = lomb_test(fit, series, config)
    pp, df, ar1_ok = unit_root_test(fit, series, config)
    return FilterVerdict(
        m_ok=partial.m_ok,
        omega_ok=partial.omega_ok,
        tc_ok=partial.tc_ok,
        oscillation_ok=partial.oscillation_ok,
        damping_ok=partial.damping_ok,
        rel_err_ok=rel_ok,
        lomb_ok=lomb_ok,
        ar1_ok=ar1_ok,
        damping=partial.damping,
        half_periods=partial.half_periods,
        max_rel_err_observed=rel_worst,
        lomb_p=lomb_p,
        pp_stat=pp,
        df_stat=df,
    )
