"""Maximum-likelihood estimation of any model variant on one day of data.

Free coefficients are mapped to an unconstrained vector (atanh for the AR
coefficients, logit for the inflation probability, log for the degrees of
freedom), and the average log-likelihood is maximized with Nelder-Mead.
Points where the filter fails (non-finite likelihood, variance bound) take a
large penalty instead of aborting the search, so the simplex can back out of
infeasible regions; the final fit is re-validated with a clean filter pass.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .errors import FittingWarning, NumericalError
from .gasfilter import (
    FilterOutput,
    ModelParams,
    ModelSpec,
    VARIANTS,
    _log_adjustment,
    filter_day,
)
from .skellam import _log_bessel_i

__all__ = [
    "FitResult",
    "fit",
    "fit_all_variants",
    "free_parameters",
    "transform",
    "untransform",
]

PENALTY = 1e6
XATOL = 1e-6
MAX_ITER = 5_000
SIMPLEX_STEP = 0.2

_ATANH_PARAMS = {"phi", "psi"}
_LOGIT_PARAMS = {"pi"}
_LOG_PARAMS = {"nu"}


def free_parameters(spec: ModelSpec) -> tuple[str, ...]:
    """The coefficients a spec actually estimates, in a fixed order."""
    names: list[str] = []
    if spec.mean_dynamics == "gas":
        names += ["kappa", "rho"]
    if spec.mean_dynamics in ("ma1", "gas"):
        names.append("theta")
    names.append("omega")
    if spec.dispersion_dynamics == "gas":
        names += ["phi", "alpha"]
    if spec.inflation_dynamics == "static":
        names.append("pi")
    elif spec.inflation_dynamics == "gas":
        names += ["gamma", "psi", "eta"]
    if spec.family == "student_t":
        names.append("nu")
    return tuple(names)


def transform(params: ModelParams, spec: ModelSpec) -> np.ndarray:
    """Natural parameters -> unconstrained optimization vector."""
    out = []
    for name in free_parameters(spec):
        v = getattr(params, name)
        if name in _ATANH_PARAMS:
            out.append(math.atanh(v))
        elif name in _LOGIT_PARAMS:
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name}={v} not strictly inside (0, 1)")
            out.append(math.log(v / (1.0 - v)))
        elif name in _LOG_PARAMS:
            out.append(math.log(v))
        else:
            out.append(float(v))
    return np.array(out)


def untransform(vector, spec: ModelSpec) -> ModelParams:
    """Unconstrained vector -> natural parameters (inverse of transform)."""
    values = {}
    for name, v in zip(free_parameters(spec), vector):
        if name in _ATANH_PARAMS:
            values[name] = math.tanh(v)
        elif name in _LOGIT_PARAMS:
            values[name] = 1.0 / (1.0 + math.exp(-v))
        elif name in _LOG_PARAMS:
            values[name] = math.exp(v)
        else:
            values[name] = float(v)
    return ModelParams(**values)


@dataclass(frozen=True)
class FitResult:
    spec: ModelSpec
    params: ModelParams
    loglik_mean: float
    iterations: int
    converged: bool
    start_params: ModelParams
    variant: str | None = None

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "spec": self.spec.to_dict(),
            "params": self.params.to_dict(),
            "loglik_mean": self.loglik_mean,
            "iterations": self.iterations,
            "converged": self.converged,
            "start_params": self.start_params.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FitResult":
        return cls(
            spec=ModelSpec.from_dict(doc["spec"]),
            params=ModelParams.from_dict(doc["params"]),
            loglik_mean=float(doc["loglik_mean"]),
            iterations=int(doc["iterations"]),
            converged=bool(doc["converged"]),
            start_params=ModelParams.from_dict(doc["start_params"]),
            variant=doc.get("variant"),
        )


def default_start(spec: ModelSpec, y, t_seconds=None, d_tilde=None,
                  curves=None) -> ModelParams:
    """Data-driven start values.

    omega starts at the log of the day's mean temporally-adjusted squared
    change; pi at the excess of observed zeros over what the start model
    implies; the dynamics coefficients at mildly persistent values.
    """
    y = np.asarray(y, dtype=np.int64)
    log_adj = _log_adjustment(spec, y.size, t_seconds, d_tilde, curves)
    adj_y2 = y.astype(float) ** 2 / np.exp(log_adj)
    omega0 = math.log(max(adj_y2.mean(), 1e-4))
    values = dict(omega=omega0)
    if spec.mean_dynamics == "ma1":
        values["theta"] = -0.3
    if spec.mean_dynamics == "gas":
        values["theta"] = -0.3
        values["kappa"] = 0.0
        values["rho"] = 0.0
    if spec.dispersion_dynamics == "gas":
        values["phi"] = 0.9
        values["alpha"] = 0.05
    if spec.inflation_dynamics in ("static", "gas"):
        zero_share = float(np.mean(y == 0))
        delta0 = math.exp(omega0)
        implied = math.exp(-delta0 + _log_bessel_i(0, delta0))
        pi0 = max(0.05, zero_share - implied)
        pi0 = min(pi0, 0.95)
        if spec.inflation_dynamics == "static":
            values["pi"] = pi0
        else:
            values["gamma"] = values["psi"] = values["eta"] = 0.0
    if spec.family == "student_t":
        values["nu"] = 5.0
    return ModelParams(**values)


def _fallback_start(start: ModelParams, spec: ModelSpec) -> ModelParams:
    """All dynamics coefficients zeroed; keeps the level parameters."""
    return replace(start, theta=0.0, phi=0.0, alpha=0.0, kappa=0.0, rho=0.0,
                   psi=0.0, eta=0.0)


def _objective(spec, y, t_seconds, d_tilde, curves):
    def fn(vector):
        try:
            params = untransform(vector, spec)
        except (ValueError, OverflowError):
            return PENALTY
        try:
            out = filter_day(spec, params, y, t_seconds, d_tilde, curves)
        except NumericalError:
            return PENALTY
        return -out.loglik_mean
    return fn


def fit(spec: ModelSpec, y, t_seconds=None, d_tilde=None,
        curves=None, start: ModelParams | None = None,
        extra_starts: tuple[ModelParams, ...] = (),
        variant: str | None = None) -> FitResult:
    """Maximize the average log-likelihood with Nelder-Mead.

    Convergence is declared when the simplex diameter falls below 1e-6 in
    the transformed space, capped at 5000 iterations; the best point is
    returned either way.  When several starts are given, each is polished
    and the best final point wins.
    """
    y = np.ascontiguousarray(y, dtype=np.int64)
    objective = _objective(spec, y, t_seconds, d_tilde, curves)
    start = start if start is not None else default_start(
        spec, y, t_seconds, d_tilde, curves)

    starts = [start, *extra_starts]
    if objective(transform(starts[0], spec)) >= PENALTY:
        fallback = _fallback_start(starts[0], spec)
        if objective(transform(fallback, spec)) >= PENALTY:
            raise NumericalError("filter fails at the start point and at the "
                                 "all-static fallback")
        starts[0] = fallback

    best = None
    iterations = 0
    converged = False
    for s in starts:
        x0 = transform(s, spec)
        if objective(x0) >= PENALTY:
            continue
        res = minimize(objective, x0, method="Nelder-Mead",
                       options=dict(xatol=XATOL, fatol=np.inf,
                                    maxiter=MAX_ITER, adaptive=False,
                                    initial_simplex=_initial_simplex(x0)))
        if best is None or res.fun < best.fun:
            best = res
            iterations = int(res.nit)
            converged = bool(res.success)
    if best is None:
        raise NumericalError("no usable start point")

    params = untransform(best.x, spec)
    out = filter_day(spec, params, y, t_seconds, d_tilde, curves)
    return FitResult(spec=spec, params=params, loglik_mean=out.loglik_mean,
                     iterations=iterations, converged=converged,
                     start_params=start, variant=variant)


def _initial_simplex(x0: np.ndarray) -> np.ndarray:
    simplex = np.tile(x0, (x0.size + 1, 1))
    for k in range(x0.size):
        simplex[k + 1, k] += SIMPLEX_STEP
    return simplex


def _project_into(params: ModelParams, target: ModelSpec,
                  source: ModelSpec) -> ModelParams | None:
    """Express a restricted fit as a start point of a more general spec."""
    values = params.to_dict()
    if target.inflation_dynamics == "gas" and source.inflation_dynamics == "static":
        p = min(max(params.pi, 1e-6), 1 - 1e-6)
        values.update(gamma=math.log(p / (1.0 - p)), psi=0.0, eta=0.0, pi=0.0)
    try:
        candidate = ModelParams(**values)
        transform(candidate, target)
    except (ValueError, OverflowError):
        return None
    return candidate


# Fitting order and warm-start sources: each variant may start from the best
# fit of specs it nests, which keeps the fitted log-likelihoods monotone in
# the nesting partial order.
_WARM_SOURCES: dict[str, tuple[str, ...]] = {
    "naive": (),
    "no_inflation": ("naive",),
    "static_dispersion": ("naive",),
    "static_mean": ("naive",),
    "proposed": ("no_inflation", "static_dispersion", "static_mean"),
    "meanvar": ("proposed",),
    "gas_mean": ("static_mean",),
    "gas_inflation": ("proposed",),
    "normal": (),
    "student_t": ("normal",),
}

BASE_VARIANTS = ("naive", "no_inflation", "static_dispersion", "static_mean",
                 "proposed")
ALTERNATIVE_VARIANTS = ("meanvar", "gas_mean", "gas_inflation", "normal",
                        "student_t")
ALL_VARIANTS = BASE_VARIANTS + ALTERNATIVE_VARIANTS


def fit_all_variants(y, t_seconds=None, d_tilde=None, curves=None,
                     variants=ALL_VARIANTS) -> dict[str, FitResult]:
    """Fit the requested variants in nesting order with warm starts.

    Per-variant failures are recorded as warnings and skipped; the rest
    proceed.
    """
    ordered = [v for v in ALL_VARIANTS if v in set(variants)]
    results: dict[str, FitResult] = {}
    for name in ordered:
        spec = VARIANTS[name]
        if curves is None:
            spec = replace(spec, use_diurnal_adjustment=False,
                           use_duration_adjustment=False)
        extra = []
        for src in _WARM_SOURCES[name]:
            if src in results:
                seed = _project_into(results[src].params, spec, VARIANTS[src])
                if seed is not None:
                    extra.append(seed)
        try:
            results[name] = fit(spec, y, t_seconds, d_tilde, curves,
                                extra_starts=tuple(extra), variant=name)
        except NumericalError as exc:
            warnings.warn(f"variant {name} failed: {exc}", FittingWarning)
    return results
