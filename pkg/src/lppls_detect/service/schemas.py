"""Request and response models for the HTTP API.

Option models mirror the library's config dataclasses field for field so a
JSON body can express anything the Python API can; to_domain() methods do
the translation. Endpoint bounds (t2_start, t2_stop, t2) accept either an
integer sample index or an ISO-8601 date/datetime string.
"""

from __future__ import annotations

import math

from pydantic import BaseModel

from ..cmaes import CmaesConfig
from ..filters import FilterConfig
from ..indicator import IndicatorConfig

Endpoint = int | str | None


class SeriesPayload(BaseModel):
    """A price series, inline or by server-side CSV path."""

    path: str | None = None
    timestamps: list[int] | None = None
    prices: list[float] | None = None
    level: str = "1d"


class CmaesOptions(BaseModel):
    population_size: int = 7
    max_generations: int = 400
    tol_fun: float = 1e-8
    restarts: int = 3
    sigma0: float = 0.3
    stagnation_window: int = 10

    def to_domain(self, seed: int = 0) -> CmaesConfig:
        return CmaesConfig(
            population_size=self.population_size,
            max_generations=self.max_generations,
            tol_fun=self.tol_fun,
            restarts=self.restarts,
            seed=seed,
            sigma0=self.sigma0,
            stagnation_window=self.stagnation_window,
        )


class FilterOptions(BaseModel):
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

    def to_domain(self) -> FilterConfig:
        return FilterConfig(
            m_range=self.m_range,
            omega_range=self.omega_range,
            tc_fraction=self.tc_fraction,
            min_half_periods=self.min_half_periods,
            max_rel_err=self.max_rel_err,
            alpha_sig=self.alpha_sig,
            unit_root_alpha=self.unit_root_alpha,
            oscillation_denominator=self.oscillation_denominator,
            unit_root_rule=self.unit_root_rule,
            df_lags=self.df_lags,
            require_damping=self.require_damping,
        )


class Options(BaseModel):
    """Shared run options: seeding, gap policy, parallelism, sub-configs."""

    seed: int = 0
    workers: int = 1
    max_gap_run: int = 3
    cmaes: CmaesOptions = CmaesOptions()
    filters: FilterOptions = FilterOptions()

    def to_domain(self) -> IndicatorConfig:
        return IndicatorConfig(
            cmaes=self.cmaes.to_domain(),
            filters=self.filters.to_domain(),
            seed=self.seed,
            max_gap_run=self.max_gap_run,
            workers=self.workers,
        )


class FitRequest(BaseModel):
    series: SeriesPayload
    t1: Endpoint = None
    t2: Endpoint = None
    options: Options = Options()


class FitParams(BaseModel):
    tc: float
    m: float
    omega: float
    A: float
    B: float
    C1: float
    C2: float
    ssr: float
    converged: bool


class VerdictModel(BaseModel):
    m_ok: bool
    omega_ok: bool
    tc_ok: bool
    oscillation_ok: bool
    damping_ok: bool
    rel_err_ok: bool | None
    lomb_ok: bool | None
    ar1_ok: bool | None
    passed: bool
    damping: float | None
    half_periods: float | None
    max_rel_err_observed: float | None
    lomb_p: float | None
    pp_stat: float | None
    df_stat: float | None


class CurveModel(BaseModel):
    timestamps: list[int]
    actual: list[float]
    fitted: list[float]


class FitResponse(BaseModel):
    status: str  # "ok" or "no_fit"
    detail: str | None = None
    fit: FitParams | None = None
    verdict: VerdictModel | None = None
    curve: CurveModel | None = None


class ScanRequest(BaseModel):
    series: SeriesPayload
    t2_start: Endpoint = None
    t2_stop: Endpoint = None
    stride: int = 1
    schedule: tuple[int, int, int] = (30, 650, 5)
    split_horizon: bool = False
    detail: bool = False
    options: Options = Options()


class ScanRow(BaseModel):
    """Attribute-compatible with ConfidenceReport for the CSV writers."""

    t2: int
    level_name: str
    schedule_tag: str
    n_windows: int
    n_pass_pos: int
    n_pass_neg: int
    ci_pos: float
    ci_neg: float


class ScanResponse(BaseModel):
    rows: list[ScanRow]
    short_rows: list[ScanRow] | None = None
    long_rows: list[ScanRow] | None = None
    detail_reports: list[dict] | None = None
    skipped: list[int] = []
    config_digest: str


class LevelOptions(BaseModel):
    level: str
    schedule: tuple[int, int, int]
    trigger: float


class PlanOptions(BaseModel):
    levels: list[LevelOptions]
    zero_run: int = 1
    trigger_on: str = "max"


class MultilevelRequest(BaseModel):
    feeds: list[SeriesPayload]
    plan: PlanOptions
    t2_start: Endpoint = None
    t2_stop: Endpoint = None
    stride: int = 1
    options: Options = Options()


class RecordRow(BaseModel):
    """Attribute-compatible with InstantRecord for the CSV writers."""

    time: int
    level_name: str
    ci_pos: float
    ci_neg: float
    triggered: bool


class MultilevelResponse(BaseModel):
    records: list[RecordRow]
    episodes: list[dict]
    config_digest: str


class CrashesRequest(BaseModel):
    series: SeriesPayload
    threshold: float = 0.15
    horizon_days: int = 21
    peak_window: int = 2
    resample_to_daily: bool = False


class EventRow(BaseModel):
    """Attribute-compatible with CrashEvent plus its derived columns."""

    peak_time: int
    peak_price: float
    end_time: int
    end_price: float
    duration_days: int
    size: float


class CrashesResponse(BaseModel):
    events: list[EventRow]
    summary: dict
    config_digest: str


class SynthRequest(BaseModel):
    tc: float
    m: float = 0.5
    omega: float = 9.0
    A: float = 8.0
    B: float = -1.0
    C1: float = 0.0
    C2: float = 0.0
    n: int = 500
    noise_sd: float = 0.0
    seed: int = 0
    level: str = "1d"
    start_timestamp: int = 0


class SynthResponse(BaseModel):
    timestamps: list[int]
    prices: list[float]
    level: str
    params: dict


class HealthResponse(BaseModel):
    status: str
    version: str
