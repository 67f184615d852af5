"""Lomb periodogram for unevenly sampled residual series.

The detrended residuals of a log-periodic fit live on the warped time axis
tau = ln(tc - t), where genuine log-periodicity becomes ordinary periodicity.
Sampling on that axis is inherently uneven, which rules out the FFT; the Lomb
normalized periodogram handles arbitrary sample times and keeps the classic
exponential null distribution for each frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

# angular-frequency band of interest for log-periodic oscillations,
# expressed in ordinary frequency units (cycles per unit tau)
DEFAULT_FREQ_RANGE = (2.0 / (2.0 * math.pi), 25.0 / (2.0 * math.pi))
DEFAULT_OVERSAMPLING = 4


@dataclass(frozen=True)
class LombResult:
    frequencies: np.ndarray
    power: np.ndarray
    peak_frequency: float
    peak_power: float
    p_value: float
    n_independent: int


def lomb_periodogram(times: np.ndarray, values: np.ndarray, frequencies: np.ndarray) -> np.ndarray:
    """Normalized Lomb periodogram P(f) of `values` sampled at `times`.

    Power is normalized by the sample variance, so under white Gaussian
    noise each P(f) is approximately Exp(1) distributed. Times need not be
    sorted or evenly spaced.
    """
    t = np.asarray(times, dtype=np.float64)
    x = np.asarray(values, dtype=np.float64)
    if t.shape != x.shape or t.ndim != 1:
        raise UsageError("times and values must be 1-d arrays of equal length")
    if t.size < 4:
        raise UsageError("need at least 4 samples for a periodogram")

    xc = x - x.mean()
    var = float(xc @ xc) / (x.size - 1)
    if var <= 0.0 or not math.isfinite(var):
        return np.zeros(len(frequencies))

    omega = 2.0 * math.pi * np.asarray(frequencies, dtype=np.float64)[:, None]
    wt = omega * t[None, :]
    # per-frequency phase shift that makes the sine/cosine bases orthogonal
    tau = np.arctan2(np.sin(2.0 * wt).sum(axis=1), np.cos(2.0 * wt).sum(axis=1)) / 2.0
    arg = wt - tau[:, None]
    cos_a = np.cos(arg)
    sin_a = np.sin(arg)
    c_num = (xc[None, :] * cos_a).sum(axis=1) ** 2
    s_num = (xc[None, :] * sin_a).sum(axis=1) ** 2
    c_den = (cos_a**2).sum(axis=1)
    s_den = (sin_a**2).sum(axis=1)
    power = np.zeros(omega.shape[0])
    good_c = c_den > 0
    good_s = s_den > 0
    power[good_c] += c_num[good_c] / c_den[good_c]
    power[good_s] += s_num[good_s] / s_den[good_s]
    return power / (2.0 * var)


def false_alarm_probability(peak_power: float, n_independent: int) -> float:
    """Probability that white noise produces a peak at least this high
    somewhere among `n_independent` frequencies: 1 - (1 - e^-P)^M.

    Evaluated in log space so that tiny probabilities survive underflow.
    """
    if not math.isfinite(peak_power) or peak_power <= 0:
        return 1.0
    m = max(int(n_independent), 1)
    # log(1 - e^-P), stable for both large and small P
    log_keep = math.log1p(-math.exp(-peak_power)) if peak_power < 700 else 0.0
    if log_keep == 0.0 and peak_power >= 700:
        # 1 - e^-P rounds to 1; FAP ~ M * e^-P
        return min(1.0, m * math.exp(-min(peak_power, 745.0)))
    return float(-math.expm1(m * log_keep))


def lomb_scan(
    times: np.ndarray,
    values: np.ndarray,
    freq_range: tuple[float, float] = DEFAULT_FREQ_RANGE,
    oversampling: int = DEFAULT_OVERSAMPLING,
) -> LombResult:
    """Scan the periodogram over a frequency band and attach a false-alarm
    probability to the tallest peak.

    The grid step is 1/(oversampling * span) where span is the extent of
    `times`; the number of independent frequencies is taken as grid size
    divided by the oversampling factor.
    """
    t = np.asarray(times, dtype=np.float64)
    x = np.asarray(values, dtype=np.float64)
    lo, hi = float(freq_range[0]), float(freq_range[1])
    if not (0 < lo < hi):
        raise UsageError("frequency range must satisfy 0 < low < high")
    if oversampling < 1:
        raise UsageError("oversampling must be at least 1")
    span = float(t.max() - t.min())
    if span <= 0:
        raise UsageError("times must span a positive interval")

    step = 1.0 / (oversampling * span)
    n_grid = int(math.floor((hi - lo) / step)) + 1
    freqs = lo + step * np.arange(n_grid)

    if np.ptp(x) == 0.0:
        # constant input carries no oscillation; report the null outcome
        return LombResult(freqs, np.zeros(n_grid), float(freqs[0]), 0.0, 1.0, max(n_grid // oversampling, 1))

    power = lomb_periodogram(t, x, freqs)
    k = int(np.argmax(power))
    m_indep = max(n_grid // oversampling, 1)
    fap = false_alarm_probability(float(power[k]), m_indep)
    return LombResult(freqs, power, float(freqs[k]), float(power[k]), fap, m_indep)
