"""The log-periodic power law singularity model and its slaved linear subproblem.

The log-price ansatz is

    f(t) = A + B*(tc - t)^m + C1*(tc - t)^m * cos(w * ln(tc - t))
                            + C2*(tc - t)^m * sin(w * ln(tc - t)),   t < tc.

For fixed nonlinear parameters (tc, m, w) the linear quadruple (A, B, C1, C2)
has a closed-form least-squares solution through 4x4 normal equations built
from the basis f_i = (tc - t_i)^m, g_i = f_i*cos(w*ln(tc - t_i)),
h_i = f_i*sin(w*ln(tc - t_i)). The calibration cost of a candidate
(tc, m, w) is the residual sum of squares at that solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateBasisError, UsageError
from .series import DAILY, FitWindow, PriceSeries, TimescaleLevel

# Candidates whose linear subproblem is unsolvable get this cost, which must
# order above every finite cost inside the optimizer.
INFEASIBLE_COST = math.inf

# Normal matrices with an equilibrated condition estimate above this are
# treated as rank-deficient rather than silently solved.
CONDITION_LIMIT = 1e13


@dataclass(frozen=True)
class LpplsFit:
    """One calibrated parameter set plus fit diagnostics for one window.

    `tc` is in window-relative sample units (samples past the window start);
    it exceeds the window's last sample time for any valid fit.
    """

    tc: float
    m: float
    omega: float
    A: float
    B: float
    C1: float
    C2: float
    ssr: float
    window: Optional[FitWindow] = None
    converged: bool = False

    @property
    def C(self) -> float:
        return math.hypot(self.C1, self.C2)

    @property
    def phase(self) -> float:
        return math.atan2(self.C2, self.C1) % (2.0 * math.pi)


def lppls_curve(
    times: np.ndarray, tc: float, m: float, omega: float, A: float, B: float, C1: float, C2: float
) -> np.ndarray:
    """Model log-price at each time in `times` (all strictly before tc)."""
    times = np.asarray(times, dtype=np.float64)
    dt = tc - times
    if np.any(dt <= 0):
        raise UsageError(f"time at or past the critical time tc={tc}")
    powm = dt**m
    ang = omega * np.log(dt)
    return A + powm * (B + C1 * np.cos(ang) + C2 * np.sin(ang))


def lppls_value(t: float, fit: LpplsFit) -> float:
    """Model log-price at a single window-relative sample time."""
    return float(lppls_curve(np.array([t]), fit.tc, fit.m, fit.omega, fit.A, fit.B, fit.C1, fit.C2)[0])


def _basis(window_times: np.ndarray, tc: float, m: float, omega: float):
    dt = tc - window_times
    powm = dt**m
    ang = omega * np.log(dt)
    return powm, powm * np.cos(ang), powm * np.sin(ang)


def solve_linear(
    window_logs: np.ndarray,
    window_times: np.ndarray,
    tc: float,
    m: float,
    omega: float,
) -> tuple[float, float, float, float, float]:
    """Exact least-squares (A, B, C1, C2) and residual sum of squares at fixed (tc, m, w).

    Solves the 4x4 normal equations of the design [1, f, g, h]. The matrix is
    symmetrically equilibrated before the solve and the result polished with
    one iterative-refinement step; a condition estimate above CONDITION_LIMIT
    raises DegenerateBasisError so the caller can treat the candidate as
    infeasible.
    """
    y = np.asarray(window_logs, dtype=np.float64)
    t = np.asarray(window_times, dtype=np.float64)
    n = len(y)
    if n < 4:
        raise UsageError("need at least 4 samples to slave 4 linear parameters")
    if tc <= t.max():
        raise DegenerateBasisError(f"tc={tc} not beyond the window end {t.max()}")

    f, g, h = _basis(t, tc, m, omega)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
        raise DegenerateBasisError("non-finite basis values")

    sf, sg, sh = f.sum(), g.sum(), h.sum()
    M = np.array(
        [
            [n, sf, sg, sh],
            [sf, f @ f, f @ g, f @ h],
            [sg, f @ g, g @ g, g @ h],
            [sh, f @ h, g @ h, h @ h],
        ]
    )
    b = np.array([y.sum(), f @ y, g @ y, h @ y])

    d = np.sqrt(np.diag(M))
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise DegenerateBasisError("zero or non-finite basis norm")
    D = 1.0 / d
    Ms = M * D[:, None] * D[None, :]
    cond = np.linalg.cond(Ms)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise DegenerateBasisError(f"normal matrix condition {cond:.3g} above limit")

    bs = b * D
    try:
        xs = np.linalg.solve(Ms, bs)
        xs += np.linalg.solve(Ms, bs - Ms @ xs)  # one refinement step
    except np.linalg.LinAlgError as exc:
        raise DegenerateBasisError(str(exc)) from exc
    A, B, C1, C2 = xs * D

    resid = y - (A + B * f + C1 * g + C2 * h)
    ssr = float(resid @ resid)
    return float(A), float(B), float(C1), float(C2), ssr


def cost(
    window_logs: np.ndarray,
    window_times: np.ndarray,
    tc: float,
    m: float,
    omega: float,
) -> float:
    """Calibration cost of a nonlinear candidate: the slaved residual sum of squares.

    Infeasible candidates (tc inside the window, degenerate basis) get
    INFEASIBLE_COST so evolutionary search keeps a total order.
    """
    t = np.asarray(window_times, dtype=np.float64)
    if tc <= t.max():
        return INFEASIBLE_COST
    try:
        return solve_linear(window_logs, window_times, tc, m, omega)[4]
    except DegenerateBasisError:
        return INFEASIBLE_COST


def generate_synthetic(
    *,
    tc: float,
    m: float,
    omega: float,
    A: float,
    B: float,
    C1: float = 0.0,
    C2: float = 0.0,
    n: int,
    noise_sd: float = 0.0,
    seed: int = 0,
    level: TimescaleLevel = DAILY,
    start_timestamp: int = 0,
) -> PriceSeries:
    """Simulate prices exp(f(t_i) + eps_i) on sample times 0..n-1.

    eps_i are i.i.d. normal(0, noise_sd^2) from a generator seeded with
    `seed`, so output is reproducible. tc must lie beyond the last sample.
    """
    if n < 1:
        raise UsageError("n must be positive")
    if tc <= n - 1:
        raise UsageError(f"tc={tc} must exceed the last sample time {n - 1}")
    if noise_sd < 0:
        raise UsageError("noise_sd must be nonnegative")
    times = np.arange(n, dtype=np.float64)
    logs = lppls_curve(times, tc, m, omega, A, B, C1, C2)
    if noise_sd > 0:
        rng = np.random.default_rng(seed)
        logs = logs + rng.normal(0.0, noise_sd, size=n)
    timestamps = start_timestamp + np.arange(n, dtype=np.int64) * level.spacing
    return PriceSeries(timestamps=timestamps, prices=np.exp(logs), level=level)
