"""FastAPI application wrapping the modeling pipeline.

Every pipeline stage is one POST endpoint over JSON payloads; file handling
stays with the clients.  Data problems map to HTTP 422 and numerical failures
to HTTP 409, both carrying a machine-readable ``code``.
"""

from __future__ import annotations

import io
import warnings
from datetime import datetime, time, timedelta

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..diagnostics import compute_report, evaluate_forecast
from ..errors import DataError, NumericalError
from ..estimator import ALL_VARIANTS, fit
from ..gasfilter import VARIANTS, filter_day, prepare_day_inputs
from ..realized import (
    adjusted_model_volatility,
    realized_kernel,
    realized_variance,
    total_model_variance,
)
from ..simulator import SimConfig, simulate_day
from ..smoothing import build_adjustment_curves
from ..ticks import (
    aggregate_simultaneous,
    clean_day,
    load_ticks,
    partition_days,
)
from . import schemas as sc

__all__ = ["create_app"]


def _parse_hhmm(text: str) -> time:
    return datetime.strptime(text.strip(), "%H:%M").time()


def _resolve_curves(fit_doc: sc.FitPayload | None,
                    override: sc.CurvesPayload | None):
    if override is not None:
        return override.to_curves()
    if fit_doc is not None and fit_doc.curves is not None:
        return fit_doc.curves.to_curves()
    return None


def _fit_inputs(day, curves, spec):
    if curves is None:
        from dataclasses import replace
        spec = replace(spec, use_diurnal_adjustment=False,
                       use_duration_adjustment=False)
    y, t, d_tilde = prepare_day_inputs(day, curves, spec)
    return spec, y, t, d_tilde


def create_app() -> FastAPI:
    app = FastAPI(title="tickvol", version=__version__)

    @app.exception_handler(DataError)
    async def data_error_handler(request: Request, exc: DataError):
        return JSONResponse(status_code=422, content={
            "detail": {"code": "data_error", "message": str(exc)}})

    @app.exception_handler(NumericalError)
    async def numerical_error_handler(request: Request, exc: NumericalError):
        return JSONResponse(status_code=409, content={
            "detail": {"code": "numerical_error", "message": str(exc),
                       "index": exc.index}})

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={
            "detail": {"code": "data_error", "message": str(exc)}})

    @app.get("/health", response_model=sc.HealthResponse)
    def health():
        return sc.HealthResponse(status="ok", version=__version__)

    @app.post("/clean", response_model=sc.CleanResponse)
    def clean(req: sc.CleanRequest):
        ticks, row_errors = load_ticks(io.StringIO(req.csv_text))
        captured: list[str] = []
        days_out = []
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            for day_id, day_ticks in partition_days(ticks).items():
                try:
                    day = clean_day(day_ticks,
                                    open_time=_parse_hhmm(req.open_time),
                                    close_time=_parse_hhmm(req.close_time),
                                    skip_after_open=timedelta(seconds=req.skip_open_s))
                except DataError as exc:
                    captured.append(f"day {day_id}: {exc}")
                    continue
                if req.aggregate:
                    day = aggregate_simultaneous(day)
                days_out.append(sc.CleanedDayPayload.from_tickday(day))
            captured.extend(str(w.message) for w in caught)
        return sc.CleanResponse(
            days=days_out,
            row_errors=[sc.RowErrorPayload(line=e.line, message=e.message)
                        for e in row_errors],
            warnings=captured)

    @app.post("/adjust", response_model=sc.AdjustResponse)
    def adjust(req: sc.AdjustRequest):
        days = [p.to_tickday() for p in req.days]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            curves = build_adjustment_curves(days, floor_eps=req.floor_eps)
        return sc.AdjustResponse(curves=sc.CurvesPayload.from_curves(curves),
                                 warnings=[str(w.message) for w in caught])

    @app.post("/fit", response_model=sc.FitResponse)
    def fit_models(req: sc.FitRequest):
        day = req.day.to_tickday()
        if req.aggregate:
            day = aggregate_simultaneous(day)
        curves = req.curves.to_curves() if req.curves is not None else None
        names = list(ALL_VARIANTS) if req.variants == ["all"] else req.variants
        unknown = [n for n in names if n not in VARIANTS]
        if unknown:
            raise DataError(f"unknown variants: {', '.join(unknown)}")
        fits, failures = [], []
        for name in names:
            spec, y, t, d_tilde = _fit_inputs(day, curves, VARIANTS[name])
            try:
                result = fit(spec, y, t, d_tilde, curves, variant=name)
            except NumericalError as exc:
                failures.append(sc.FitFailure(variant=name, message=str(exc)))
                continue
            fits.append(sc.FitPayload(
                variant=name,
                spec=sc.SpecPayload.from_spec(result.spec),
                params=sc.ParamsPayload.from_params(result.params),
                loglik_mean=result.loglik_mean,
                iterations=result.iterations,
                converged=result.converged,
                start_params=sc.ParamsPayload.from_params(result.start_params),
                curves=req.curves))
        return sc.FitResponse(fits=fits, failures=failures)

    @app.post("/diagnose", response_model=sc.DiagnoseResponse)
    def diagnose(req: sc.DiagnoseRequest):
        day = req.day.to_tickday()
        curves = _resolve_curves(req.fit, req.curves)
        spec, y, t, d_tilde = _fit_inputs(day, curves, req.fit.spec.to_spec())
        params = req.fit.params.to_params()
        out = filter_day(spec, params, y, t, d_tilde, curves)
        report = compute_report(y, out, pi=params.pi, nu=params.nu,
                                lags=tuple(req.lags))

        def clean_map(d):
            return {k: (None if np.isnan(v) else v) for k, v in d.items()}

        return sc.DiagnoseResponse(ar_r2=clean_map(report.ar_r2),
                                   arch_r2=clean_map(report.arch_r2),
                                   ljung_box_p=clean_map(report.ljung_box_p),
                                   arch_lm_p=clean_map(report.arch_lm_p),
                                   loglik_mean=report.loglik_mean)

    @app.post("/forecast", response_model=sc.ForecastResponse)
    def forecast(req: sc.ForecastRequest):
        day = req.next_day.to_tickday()
        if req.aggregate_next:
            day = aggregate_simultaneous(day)
        curves = _resolve_curves(req.fit, req.curves)
        spec, y, t, d_tilde = _fit_inputs(day, curves, req.fit.spec.to_spec())
        metrics = evaluate_forecast(spec, req.fit.params.to_params(),
                                    y, t, d_tilde, curves)
        return sc.ForecastResponse(**metrics.to_dict())

    @app.post("/realized", response_model=sc.RealizedResponse)
    def realized(req: sc.RealizedRequest):
        day = req.day.to_tickday()
        y = day.price_changes
        rv = realized_variance(y)
        rk = realized_kernel(y.astype(float))
        tmv = amv = None
        if req.fit is not None:
            curves = _resolve_curves(req.fit, req.curves)
            spec, yy, t, d_tilde = _fit_inputs(day, curves, req.fit.spec.to_spec())
            params = req.fit.params.to_params()
            out = filter_day(spec, params, yy, t, d_tilde, curves)
            if spec.family.startswith("ziskellam"):
                tmv = total_model_variance(out, pi=params.pi)
            amv = adjusted_model_volatility(out)
        return sc.RealizedResponse(day_id=req.day.day_id, rv=rv, rk=rk,
                                   tmv=tmv, amv=amv)

    @app.post("/simulate", response_model=sc.SimulateResponse)
    def simulate(req: sc.SimulateRequest):
        cfg = SimConfig(spec=req.spec.to_spec(), params=req.params.to_params(),
                        n_ticks=req.n_ticks, seed=req.seed,
                        duration_process=req.duration_process,
                        mean_duration_s=req.mean_duration_s,
                        zero_duration_share=req.zero_duration_share,
                        base_price=req.base_price,
                        day_id=date.fromisoformat(req.day_id),
                        start_ms=req.start_ms)
        curves = req.curves.to_curves() if req.curves is not None else None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            day = simulate_day(cfg, curves)
        return sc.SimulateResponse(day_id=day.day_id.isoformat(),
                                   csv_text=raw_csv_text(day))

    return app
