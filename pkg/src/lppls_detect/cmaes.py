"""Covariance matrix adaptation evolution strategy for box-constrained minimization.

Implements the standard (mu/mu_w, lambda) strategy with cumulative step-size
adaptation and rank-one plus rank-mu covariance updates. Search runs in the
unit cube (coordinates affinely rescaled from the caller's box); sampled
candidates are clipped coordinate-wise back into the cube and charged a
quadratic penalty on the squared clip distance, so returned candidates are
always feasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError

_PENALTY_WEIGHT = 10.0


@dataclass(frozen=True)
class CmaesConfig:
    """Strategy settings. Defaults suit 3-d calibration problems.

    tol_fun is relative: tolerances are scaled by the run's first finite cost.
    A run terminates once the per-generation best costs have been flat (range
    below tolerance) over a trailing window of 10 + ceil(30 n / lambda)
    generations; the wider window rides out plateaus during early covariance
    adaptation. The `converged` flag on the result reports the stricter
    contract: best-ever improvement over the last `stagnation_window`
    generations fell below tolerance.
    """

    population_size: int = 7
    max_generations: int = 400
    tol_fun: float = 1e-8
    restarts: int = 3
    seed: int = 0
    sigma0: float = 0.3
    stagnation_window: int = 10

    def __post_init__(self):
        if self.population_size < 4:
            raise UsageError("population_size must be at least 4")
        if self.tol_fun <= 0:
            raise UsageError("tol_fun must be positive")
        if self.restarts < 1:
            raise UsageError("restarts must be at least 1")


@dataclass
class MinimizeResult:
    x: np.ndarray
    cost: float
    converged: bool
    generations: int
    evaluations: int
    trace: list[float] = field(default_factory=list)


class _Strategy:
    """One CMA-ES run on the unit cube."""

    def __init__(self, n: int, lam: int, sigma0: float, mean: np.ndarray):
        self.n = n
        self.lam = lam
        mu = lam // 2
        w = np.log(lam / 2 + 0.5) - np.log(np.arange(1, mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights**2)
        self.mu = mu

        self.cs = (self.mueff + 2) / (n + self.mueff + 5)
        self.ds = 1 + 2 * max(0.0, math.sqrt((self.mueff - 1) / (n + 1)) - 1) + self.cs
        self.cc = (4 + self.mueff / n) / (n + 4 + 2 * self.mueff / n)
        self.c1 = 2 / ((n + 1.3) ** 2 + self.mueff)
        self.cmu = min(1 - self.c1, 2 * (self.mueff - 2 + 1 / self.mueff) / ((n + 2) ** 2 + self.mueff))
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

        self.mean = mean.astype(np.float64)
        self.sigma = sigma0
        self.C = np.eye(n)
        self.ps = np.zeros(n)
        self.pc = np.zeros(n)
        self.gen = 0

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        # eigendecomposition each generation; trivial at n=3
        self.C = (self.C + self.C.T) / 2
        evals, evecs = np.linalg.eigh(self.C)
        evals = np.maximum(evals, 1e-30)
        self._B = evecs
        self._D = np.sqrt(evals)
        z = rng.standard_normal((self.lam, self.n))
        return self.mean + self.sigma * (z * self._D) @ self._B.T

    def update(self, xs: np.ndarray, order: np.ndarray) -> None:
        old_mean = self.mean
        sel = xs[order[: self.mu]]
        self.mean = self.weights @ sel

        y = (self.mean - old_mean) / self.sigma
        c_inv_half = self._B @ np.diag(1.0 / self._D) @ self._B.T
        self.ps = (1 - self.cs) * self.ps + math.sqrt(self.cs * (2 - self.cs) * self.mueff) * (
            c_inv_half @ y
        )
        self.gen += 1
        hsig = float(
            np.linalg.norm(self.ps) / math.sqrt(1 - (1 - self.cs) ** (2 * self.gen)) / self.chi_n
            < 1.4 + 2 / (self.n + 1)
        )
        self.pc = (1 - self.cc) * self.pc + hsig * math.sqrt(self.cc * (2 - self.cc) * self.mueff) * y

        art = (sel - old_mean) / self.sigma
        rank_mu = (art.T * self.weights) @ art
        self.C = (
            (1 - self.c1 - self.cmu) * self.C
            + self.c1 * (np.outer(self.pc, self.pc) + (1 - hsig) * self.cc * (2 - self.cc) * self.C)
            + self.cmu * rank_mu
        )
        self.sigma *= math.exp((self.cs / self.ds) * (np.linalg.norm(self.ps) / self.chi_n - 1))


def minimize(cost_fn, bounds, config: CmaesConfig) -> MinimizeResult:
    """Minimize cost_fn over the box given by `bounds` (sequence of (lo, hi)).

    Runs `config.restarts` independent strategies with initial means drawn
    uniformly in the box from one seeded generator, keeping the best feasible
    candidate ever evaluated. Deterministic for a fixed config.
    """
    lo = np.array([b[0] for b in bounds], dtype=np.float64)
    hi = np.array([b[1] for b in bounds], dtype=np.float64)
    if np.any(hi <= lo):
        raise UsageError("degenerate search box")
    width = hi - lo
    n = len(lo)

    rng = np.random.default_rng(config.seed)
    best_x = None
    best_f = math.inf
    best_run_converged = False
    trace: list[float] = []
    total_gens = 0
    total_evals = 0

    for _ in range(config.restarts):
        strat = _Strategy(n, config.population_size, config.sigma0, rng.uniform(size=n))
        run_best = math.inf
        run_hist: list[float] = []  # monotone best-ever within the run
        gen_hist: list[float] = []  # best cost of each generation (jitters)
        tol_abs = None
        w_term = config.stagnation_window + math.ceil(30 * n / strat.lam)

        for _ in range(config.max_generations):
            raw = strat.sample(rng)
            clipped = np.clip(raw, 0.0, 1.0)
            d2 = np.sum((raw - clipped) ** 2, axis=1)
            fitness = np.empty(strat.lam)
            gen_best = math.inf
            for k in range(strat.lam):
                f_feas = cost_fn(lo + clipped[k] * width)
                total_evals += 1
                if f_feas < best_f:
                    best_f = f_feas
                    best_x = lo + clipped[k] * width
                if f_feas < run_best:
                    run_best = f_feas
                if f_feas < gen_best:
                    gen_best = f_feas
                if math.isinf(f_feas):
                    fitness[k] = f_feas
                else:
                    fitness[k] = f_feas + _PENALTY_WEIGHT * (1.0 + abs(f_feas)) * d2[k]
            total_gens += 1
            trace.append(best_f)

            finite = np.isfinite(fitness)
            if not finite.any():
                # flat infeasible landscape so far; keep sampling
                order = np.arange(strat.lam)
            else:
                order = np.argsort(fitness, kind="stable")
            strat.update(raw, order)

            if tol_abs is None and math.isfinite(run_best):
                tol_abs = config.tol_fun * max(abs(run_best), 1e-300)
            run_hist.append(run_best)
            gen_hist.append(gen_best)
            if tol_abs is not None and len(gen_hist) >= w_term:
                window = gen_hist[-w_term:]
                if max(window) - min(window) < tol_abs:
                    break
            if strat.sigma < 1e-14:
                break

        w = config.stagnation_window
        run_converged = (
            tol_abs is not None
            and len(run_hist) > w
            and run_hist[-w - 1] - run_hist[-1] < tol_abs
        )
        if run_best <= best_f:
            best_run_converged = run_converged

    if best_x is None:
        # never sampled (cannot happen with restarts >= 1) or cost always inf
        best_x = lo + 0.5 * width
    return MinimizeResult(
        x=np.asarray(best_x),
        cost=best_f,
        converged=best_run_converged,
        generations=total_gens,
        evaluations=total_evals,
        trace=trace,
    )
