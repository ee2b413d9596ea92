"""Residual diagnostics and out-of-sample forecast evaluation.

Residuals are Pearson-standardized with the filtered conditional mean and
variance.  Serial structure is summarized three ways: R-squared of the
residuals (and their squares) regressed on their own lags, the Ljung-Box
portmanteau test, and the ARCH-LM test.  Forecast evaluation reruns the
filter with a previous day's coefficients on the next day's data and reports
the average log-likelihood, MAE, and RMSE of the point predictions.

For the continuous families the comparable likelihood is the discretized
one: the probability the continuous variable falls in (y - 1/2, y + 1/2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DataError
from .gasfilter import FilterOutput, ModelParams, ModelSpec, filter_day
from .smoothing import AdjustmentCurves

__all__ = [
    "DiagnosticsReport",
    "ForecastMetrics",
    "arch_lm",
    "compute_report",
    "discretized_loglik_terms",
    "evaluate_forecast",
    "ljung_box",
    "r2_regression",
    "residuals",
]

REPORT_LAGS = (1, 10, 100)


def _conditional_moments(output: FilterOutput, pi: float | None):
    fam = output.spec.family
    mu = output.mu_path
    if fam in ("ziskellam_meandisp", "ziskellam_meanvar"):
        p = output.pi_path if pi is None else np.full_like(mu, float(pi))
        delta = output.delta_path
        mean = (1.0 - p) * mu
        var = (1.0 - p) * (np.abs(mu) + delta + p * mu ** 2)
        return mean, var
    if fam == "normal":
        return mu, output.dispersion_path
    # student_t: variance is sigma^2 * nu / (nu - 2) when it exists
    return mu, None


def residuals(y, output: FilterOutput, pi: float | None = None,
              nu: float | None = None) -> np.ndarray:
    """Pearson residuals (y_i - E_i) / sqrt(V_i) from the filtered paths.

    NaN when the family has no finite variance (Student's t with nu <= 2).
    """
    y = np.asarray(y, dtype=float)
    fam = output.spec.family
    if fam == "student_t":
        if nu is None or nu <= 2.0:
            return np.full(y.shape, np.nan)
        var = output.dispersion_path * nu / (nu - 2.0)
        return (y - output.mu_path) / np.sqrt(var)
    mean, var = _conditional_moments(output, pi)
    if np.any(var <= 0.0):
        raise DataError("zero conditional variance in residual computation")
    return (y - mean) / np.sqrt(var)


def r2_regression(series, max_lag: int) -> float:
    """R^2 of an OLS regression of the series on its first max_lag lags.

    A constant (or too-short) series returns 0 by convention.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if max_lag <= 0:
        raise ValueError("lag must be positive")
    if n <= max_lag + 1:
        raise ValueError(f"series of length {n} too short for lag {max_lag}")
    resp = x[max_lag:]
    sst = float(np.sum((resp - resp.mean()) ** 2))
    if sst <= 0.0:
        return 0.0
    cols = [np.ones(n - max_lag)]
    cols += [x[max_lag - k:n - k] for k in range(1, max_lag + 1)]
    design = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(design, resp, rcond=None)
    ssr = float(np.sum((resp - design @ coef) ** 2))
    return max(0.0, 1.0 - ssr / sst)


def _autocorrelations(x, max_lag):
    xc = x - x.mean()
    denom = float(np.dot(xc, xc))
    if denom <= 0.0:
        return np.zeros(max_lag)
    return np.array([float(np.dot(xc[:-k], xc[k:])) / denom
                     for k in range(1, max_lag + 1)])


def ljung_box(series, lag: int) -> float:
    """p-value of the Ljung-Box Q test for no autocorrelation up to the lag."""
    if lag <= 0:
        raise ValueError("lag must be positive")
    x = np.asarray(series, dtype=float)
    n = x.size
    if n <= lag:
        raise ValueError(f"series of length {n} too short for lag {lag}")
    rho = _autocorrelations(x, lag)
    q = n * (n + 2) * float(np.sum(rho ** 2 / (n - np.arange(1, lag + 1))))
    return float(stats.chi2.sf(q, lag))


def arch_lm(series, lag: int) -> float:
    """p-value of the ARCH-LM test: n R^2 of squared values on their lags."""
    if lag <= 0:
        raise ValueError("lag must be positive")
    x = np.asarray(series, dtype=float) ** 2
    r2 = r2_regression(x, lag)
    lm = (x.size - lag) * r2
    return float(stats.chi2.sf(lm, lag))


@dataclass(frozen=True)
class DiagnosticsReport:
    ar_r2: dict[int, float]
    arch_r2: dict[int, float]
    ljung_box_p: dict[int, float]
    arch_lm_p: dict[int, float]
    loglik_mean: float

    def to_dict(self) -> dict:
        return {
            "ar_r2": {str(k): v for k, v in self.ar_r2.items()},
            "arch_r2": {str(k): v for k, v in self.arch_r2.items()},
            "ljung_box_p": {str(k): v for k, v in self.ljung_box_p.items()},
            "arch_lm_p": {str(k): v for k, v in self.arch_lm_p.items()},
            "loglik_mean": self.loglik_mean,
        }


def discretized_loglik_terms(y, mu, variance, family: str = "normal",
                             nu: float = 5.0) -> np.ndarray:
    """ln P(y - 1/2 < Y <= y + 1/2) for a continuous fitted distribution."""
    y = np.asarray(y, dtype=float)
    sd = np.sqrt(variance)
    if family == "normal":
        hi = stats.norm.cdf((y + 0.5 - mu) / sd)
        lo = stats.norm.cdf((y - 0.5 - mu) / sd)
    elif family == "student_t":
        hi = stats.t.cdf((y + 0.5 - mu) / sd, df=nu)
        lo = stats.t.cdf((y - 0.5 - mu) / sd, df=nu)
    else:
        raise ValueError(f"no discretized likelihood for family {family!r}")
    return np.log(np.maximum(hi - lo, 1e-300))


def compute_report(y, output: FilterOutput, pi: float | None = None,
                   nu: float | None = None,
                   lags: tuple[int, ...] = REPORT_LAGS) -> DiagnosticsReport:
    """Residual table in the shape used throughout: AR and ARCH R^2 plus tests.

    For the continuous families the reported likelihood is the discretized
    one so that it is comparable with the integer families.
    """
    fam = output.spec.family
    if fam == "student_t" and nu is None:
        raise ValueError("student_t diagnostics need nu")
    res = residuals(y, output, pi=pi, nu=nu)
    if np.all(np.isnan(res)):
        nan_map = {k: float("nan") for k in lags}
        ll = _comparable_loglik(y, output, nu)
        return DiagnosticsReport(ar_r2=dict(nan_map), arch_r2=dict(nan_map),
                                 ljung_box_p=dict(nan_map),
                                 arch_lm_p=dict(nan_map), loglik_mean=ll)
    sq = res ** 2
    return DiagnosticsReport(
        ar_r2={k: r2_regression(res, k) for k in lags},
        arch_r2={k: r2_regression(sq, k) for k in lags},
        ljung_box_p={k: ljung_box(res, k) for k in lags},
        arch_lm_p={k: arch_lm(res, k) for k in lags},
        loglik_mean=_comparable_loglik(y, output, nu),
    )


def _comparable_loglik(y, output: FilterOutput, nu: float | None) -> float:
    if output.spec.family in ("normal", "student_t"):
        terms = discretized_loglik_terms(
            y, output.mu_path, output.dispersion_path,
            family=output.spec.family, nu=nu if nu is not None else 5.0)
        return float(terms.mean())
    return output.loglik_mean


@dataclass(frozen=True)
class ForecastMetrics:
    loglik_mean: float
    mae: float
    rmse: float

    def to_dict(self) -> dict:
        return {"loglik_mean": self.loglik_mean, "mae": self.mae, "rmse": self.rmse}


def evaluate_forecast(spec: ModelSpec, params: ModelParams, y,
                      t_seconds=None, d_tilde=None,
                      curves: AdjustmentCurves | None = None) -> ForecastMetrics:
    """Run yesterday's coefficients on today's data.

    The point prediction is the conditional mean (1 - pi) mu_i, which is
    computable from the previous tick; MAE and RMSE measure its errors, and
    the likelihood is averaged as in estimation (discretized for the
    continuous families).
    """
    out = filter_day(spec, params, y, t_seconds, d_tilde, curves)
    if spec.family in ("normal", "student_t"):
        expected = out.mu_path
    else:
        expected = (1.0 - out.pi_path) * out.mu_path
    err = np.asarray(y, dtype=float) - expected
    return ForecastMetrics(
        loglik_mean=_comparable_loglik(y, out, params.nu),
        mae=float(np.abs(err).mean()),
        rmse=float(np.sqrt((err ** 2).mean())),
    )
