"""Request/response models for the HTTP service.

Days travel as parallel arrays (timestamps in milliseconds, prices, volumes);
fitted models and adjustment curves travel as the same JSON documents the CLI
writes to disk, so a fit response is self-contained for later diagnosis,
forecasting, and realized-measure calls.
"""

from __future__ import annotations

from datetime import date

import numpy as np
from pydantic import BaseModel, Field

from ..gasfilter import ModelParams, ModelSpec
from ..smoothing import AdjustmentCurves, SplineCurve
from ..ticks import TickDay


class DayPayload(BaseModel):
    day_id: str
    time_ms: list[int]
    price: list[float]
    volume: list[int]

    @classmethod
    def from_tickday(cls, day: TickDay) -> "DayPayload":
        return cls(day_id=day.day_id.isoformat(),
                   time_ms=day.time_ms.tolist(),
                   price=day.price.tolist(),
                   volume=day.volume.tolist())

    def to_tickday(self) -> TickDay:
        return TickDay(day_id=date.fromisoformat(self.day_id),
                       time_ms=np.asarray(self.time_ms, dtype=np.int64),
                       price=np.asarray(self.price, dtype=float),
                       volume=np.asarray(self.volume, dtype=np.int64))


class CleanedDayPayload(DayPayload):
    duration_s: list[float] = Field(default_factory=list)
    price_change_cents: list[int] = Field(default_factory=list)

    @classmethod
    def from_tickday(cls, day: TickDay) -> "CleanedDayPayload":
        return cls(day_id=day.day_id.isoformat(),
                   time_ms=day.time_ms.tolist(),
                   price=day.price.tolist(),
                   volume=day.volume.tolist(),
                   duration_s=[round(d, 3) for d in day.durations],
                   price_change_cents=day.price_changes.tolist())


class CurvePayload(BaseModel):
    knots: list[float]
    values: list[float]
    second_derivs: list[float]
    penalty: float
    domain: list[float]

    @classmethod
    def from_curve(cls, curve: SplineCurve) -> "CurvePayload":
        return cls(**curve.to_dict())

    def to_curve(self) -> SplineCurve:
        return SplineCurve.from_dict(self.model_dump())


class CurvesPayload(BaseModel):
    floor_eps: float
    f_dur: CurvePayload
    f_var: CurvePayload
    f_rel: CurvePayload

    @classmethod
    def from_curves(cls, curves: AdjustmentCurves) -> "CurvesPayload":
        return cls(floor_eps=curves.floor_eps,
                   f_dur=CurvePayload.from_curve(curves.f_dur),
                   f_var=CurvePayload.from_curve(curves.f_var),
                   f_rel=CurvePayload.from_curve(curves.f_rel))

    def to_curves(self) -> AdjustmentCurves:
        return AdjustmentCurves(f_dur=self.f_dur.to_curve(),
                                f_var=self.f_var.to_curve(),
                                f_rel=self.f_rel.to_curve(),
                                floor_eps=self.floor_eps)


class SpecPayload(BaseModel):
    family: str = "ziskellam_meandisp"
    mean_dynamics: str = "ma1"
    dispersion_dynamics: str = "gas"
    inflation_dynamics: str = "static"
    use_diurnal_adjustment: bool = True
    use_duration_adjustment: bool = True

    def to_spec(self) -> ModelSpec:
        return ModelSpec(**self.model_dump())

    @classmethod
    def from_spec(cls, spec: ModelSpec) -> "SpecPayload":
        return cls(**spec.to_dict())


class ParamsPayload(BaseModel):
    theta: float = 0.0
    omega: float = 0.0
    phi: float = 0.0
    alpha: float = 0.0
    pi: float = 0.0
    kappa: float = 0.0
    rho: float = 0.0
    gamma: float = 0.0
    psi: float = 0.0
    eta: float = 0.0
    nu: float = 5.0

    def to_params(self) -> ModelParams:
        return ModelParams(**self.model_dump())

    @classmethod
    def from_params(cls, params: ModelParams) -> "ParamsPayload":
        return cls(**params.to_dict())


class FitPayload(BaseModel):
    variant: str | None = None
    spec: SpecPayload
    params: ParamsPayload
    loglik_mean: float
    iterations: int
    converged: bool
    start_params: ParamsPayload
    curves: CurvesPayload | None = None


class RowErrorPayload(BaseModel):
    line: int
    message: str


class CleanRequest(BaseModel):
    csv_text: str
    open_time: str = "09:30"
    close_time: str = "16:00"
    skip_open_s: float = 300.0
    aggregate: bool = False


class CleanResponse(BaseModel):
    days: list[CleanedDayPayload]
    row_errors: list[RowErrorPayload]
    warnings: list[str]


class AdjustRequest(BaseModel):
    days: list[DayPayload]
    floor_eps: float = 1e-4


class AdjustResponse(BaseModel):
    curves: CurvesPayload
    warnings: list[str]


class FitRequest(BaseModel):
    day: DayPayload
    curves: CurvesPayload | None = None
    variants: list[str] = Field(default_factory=lambda: ["proposed"])
    aggregate: bool = False


class FitFailure(BaseModel):
    variant: str
    message: str


class FitResponse(BaseModel):
    fits: list[FitPayload]
    failures: list[FitFailure]


class DiagnoseRequest(BaseModel):
    day: DayPayload
    fit: FitPayload
    curves: CurvesPayload | None = None
    lags: list[int] = Field(default_factory=lambda: [1, 10, 100])


class DiagnoseResponse(BaseModel):
    ar_r2: dict[int, float | None]
    arch_r2: dict[int, float | None]
    ljung_box_p: dict[int, float | None]
    arch_lm_p: dict[int, float | None]
    loglik_mean: float


class ForecastRequest(BaseModel):
    next_day: DayPayload
    fit: FitPayload
    curves: CurvesPayload | None = None
    aggregate_next: bool = False


class ForecastResponse(BaseModel):
    loglik_mean: float
    mae: float
    rmse: float


class RealizedRequest(BaseModel):
    day: DayPayload
    fit: FitPayload | None = None
    curves: CurvesPayload | None = None


class RealizedResponse(BaseModel):
    day_id: str
    rv: float
    rk: float
    tmv: float | None = None
    amv: float | None = None


class SimulateRequest(BaseModel):
    spec: SpecPayload
    params: ParamsPayload
    n_ticks: int
    seed: int = 0
    duration_process: str = "iid_exponential"
    mean_duration_s: float = 1.0
    zero_duration_share: float = 0.0
    base_price: float = 100.0
    day_id: str = "2022-03-01"
    start_ms: int = 34_500_000
    curves: CurvesPayload | None = None


class SimulateResponse(BaseModel):
    day_id: str
    csv_text: str


class HealthResponse(BaseModel):
    status: str
    version: str
