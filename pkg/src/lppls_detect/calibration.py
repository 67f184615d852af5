"""Per-window calibration: search the nonlinear triple (tc, m, w) with CMA-ES.

Windows are re-indexed to sample times 0..N-1 before fitting, so tc is found
and stored in window-relative sample units. The search box follows the
standard slack limits: m in [0, 1], w in [1, 50], tc in (t2, t2 + (t2-t1)/3].
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .cmaes import CmaesConfig, minimize
from .errors import NoFitError, UsageError
from .model import INFEASIBLE_COST, LpplsFit, cost, solve_linear
from .series import FitWindow, PriceSeries

# tc strictly beyond the window end: offset in samples for the search floor.
TC_EPSILON = 1e-2


@dataclass(frozen=True)
class SearchSpace:
    """Box constraints for the nonlinear parameters, in window-relative samples."""

    tc_range: tuple[float, float]
    m_range: tuple[float, float] = (0.0, 1.0)
    omega_range: tuple[float, float] = (1.0, 50.0)

    def __post_init__(self):
        for lo, hi in (self.tc_range, self.m_range, self.omega_range):
            if hi <= lo:
                raise UsageError("search range not ordered")

    @classmethod
    def for_window(cls, n_samples: int, tc_fraction: float = 1.0 / 3.0) -> "SearchSpace":
        t2 = float(n_samples - 1)
        return cls(tc_range=(t2 + TC_EPSILON, t2 + (t2 - 0.0) * tc_fraction))

    def bounds(self) -> list[tuple[float, float]]:
        """(lo, hi) per coordinate, in candidate order (tc, m, w)."""
        return [self.tc_range, self.m_range, self.omega_range]


def window_seed(global_seed: int, level_name: str, t2_index: int, length: int) -> int:
    """Deterministic per-window RNG seed.

    Depends only on (global seed, level, endpoint, window length), so a window
    gets the same seed whether it is fitted inside the benchmark ensemble or
    inside a short/long-term partition, and regardless of worker scheduling.
    """
    level_tag = zlib.crc32(level_name.encode("utf-8"))
    ss = np.random.SeedSequence([global_seed & 0xFFFFFFFF, level_tag, t2_index, length])
    return int(ss.generate_state(1)[0])


def damping_ratio(m: float, B: float, omega: float, C1: float, C2: float) -> float:
    """m|B| / (w * sqrt(C1^2 + C2^2)); +inf when there is no oscillation to damp."""
    c = math.hypot(C1, C2)
    if c == 0.0:
        return math.inf
    return m * abs(B) / (omega * c)


def fit_window(
    series: PriceSeries,
    window: FitWindow,
    config: CmaesConfig,
    space: SearchSpace | None = None,
    enforce_damping: bool = False,
) -> LpplsFit:
    """Calibrate one window, returning the best feasible fit across restarts.

    Deterministic for a fixed config.seed. Raises NoFitError when no candidate
    ever produced a finite cost.
    """
    if window.t2_index >= len(series):
        raise UsageError(f"window end {window.t2_index} beyond series length {len(series)}")
    n = window.length
    logs = series.log_prices[window.t1_index : window.t2_index + 1]
    times = np.arange(n, dtype=np.float64)
    if space is None:
        space = SearchSpace.for_window(n)

    if enforce_damping:

        def cost_fn(x: np.ndarray) -> float:
            tc, m, w = x
            try:
                A, B, C1, C2, ssr = solve_linear(logs, times, tc, m, w)
            except Exception:
                return INFEASIBLE_COST
            if damping_ratio(m, B, w, C1, C2) < 1.0:
                return INFEASIBLE_COST
            return ssr

    else:

        def cost_fn(x: np.ndarray) -> float:
            tc, m, w = x
            return cost(logs, times, tc, m, w)

    result = minimize(cost_fn, space.bounds(), config)
    if not math.isfinite(result.cost):
        raise NoFitError(f"no feasible candidate for window ({window.t1_index}, {window.t2_index})")

    tc, m, w = (float(v) for v in result.x)
    A, B, C1, C2, ssr = solve_linear(logs, times, tc, m, w)
    return LpplsFit(
        tc=tc,
        m=m,
        omega=w,
        A=A,
        B=B,
        C1=C1,
        C2=C2,
        ssr=ssr,
        window=window,
        converged=result.converged,
    )
