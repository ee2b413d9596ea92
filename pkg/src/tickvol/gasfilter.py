"""Observation-driven (score-driven) filtering recursions for all model variants.

One pass over a day's integer price changes produces per-tick parameter paths
and the average log-likelihood.  The mean follows an MA(1) with zero
intercept (or a score recursion, or stays at zero), the log of the dispersion
state follows an AR(1)-plus-lagged-score recursion on top of the temporal
adjustment terms, and the zero-inflation probability is static, absent, or
logit-score-driven depending on the variant.

The recursion is inherently sequential, so the core loop is numba-compiled;
it reuses the scalar distribution kernels.  Everything here is deterministic:
identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .errors import NumericalError
from .skellam import _log_pmf, _score_logdelta, _score_logit_pi, _score_mu
from .smoothing import AdjustmentCurves, adjust_durations

__all__ = [
    "FilterOutput",
    "ModelParams",
    "ModelSpec",
    "VARIANTS",
    "filter_day",
    "forecast_adjusted_path",
    "prepare_day_inputs",
    "write_filter_csv",
]

FAMILIES = ("ziskellam_meandisp", "ziskellam_meanvar", "normal", "student_t")
MEAN_DYNAMICS = ("zero", "ma1", "gas")
DISPERSION_DYNAMICS = ("static", "gas")
INFLATION_DYNAMICS = ("none", "static", "gas")

_STATUS_OK = 0
_STATUS_VARIANCE_BOUND = 1
_STATUS_NOT_FINITE = 2


@dataclass(frozen=True)
class ModelSpec:
    """Which family and which dynamics are switched on."""

    family: str = "ziskellam_meandisp"
    mean_dynamics: str = "ma1"
    dispersion_dynamics: str = "gas"
    inflation_dynamics: str = "static"
    use_diurnal_adjustment: bool = True
    use_duration_adjustment: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.mean_dynamics not in MEAN_DYNAMICS:
            raise ValueError(f"unknown mean dynamics {self.mean_dynamics!r}")
        if self.dispersion_dynamics not in DISPERSION_DYNAMICS:
            raise ValueError(f"unknown dispersion dynamics {self.dispersion_dynamics!r}")
        if self.inflation_dynamics not in INFLATION_DYNAMICS:
            raise ValueError(f"unknown inflation dynamics {self.inflation_dynamics!r}")
        if self.family in ("normal", "student_t") and self.inflation_dynamics != "none":
            raise ValueError(f"{self.family} admits no zero inflation")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "mean_dynamics": self.mean_dynamics,
            "dispersion_dynamics": self.dispersion_dynamics,
            "inflation_dynamics": self.inflation_dynamics,
            "use_diurnal_adjustment": self.use_diurnal_adjustment,
            "use_duration_adjustment": self.use_duration_adjustment,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelSpec":
        return cls(**doc)


# The named variants of the modeling study: the base model plus its
# restrictions, the alternative parametrizations, and the continuous families.
VARIANTS: dict[str, ModelSpec] = {
    "naive": ModelSpec(mean_dynamics="zero", dispersion_dynamics="static",
                       inflation_dynamics="none"),
    "no_inflation": ModelSpec(mean_dynamics="ma1", dispersion_dynamics="gas",
                              inflation_dynamics="none"),
    "static_dispersion": ModelSpec(mean_dynamics="ma1", dispersion_dynamics="static",
                                   inflation_dynamics="static"),
    "static_mean": ModelSpec(mean_dynamics="zero", dispersion_dynamics="gas",
                             inflation_dynamics="static"),
    "proposed": ModelSpec(mean_dynamics="ma1", dispersion_dynamics="gas",
                          inflation_dynamics="static"),
    "meanvar": ModelSpec(family="ziskellam_meanvar", mean_dynamics="ma1",
                         dispersion_dynamics="gas", inflation_dynamics="static"),
    "gas_mean": ModelSpec(mean_dynamics="gas", dispersion_dynamics="gas",
                          inflation_dynamics="static"),
    "gas_inflation": ModelSpec(mean_dynamics="ma1", dispersion_dynamics="gas",
                               inflation_dynamics="gas"),
    "normal": ModelSpec(family="normal", mean_dynamics="ma1",
                        dispersion_dynamics="gas", inflation_dynamics="none"),
    "student_t": ModelSpec(family="student_t", mean_dynamics="ma1",
                           dispersion_dynamics="gas", inflation_dynamics="none"),
}


@dataclass(frozen=True)
class ModelParams:
    """Static coefficients; fields irrelevant to a spec are simply ignored."""

    theta: float = 0.0     # MA / score-mean coefficient
    omega: float = 0.0     # dispersion intercept
    phi: float = 0.0       # dispersion AR coefficient
    alpha: float = 0.0     # dispersion score coefficient
    pi: float = 0.0        # zero-inflation probability (static)
    kappa: float = 0.0     # score-mean intercept
    rho: float = 0.0       # score-mean AR coefficient
    gamma: float = 0.0     # inflation logit intercept
    psi: float = 0.0       # inflation logit AR coefficient
    eta: float = 0.0       # inflation logit score coefficient
    nu: float = 5.0        # Student's t degrees of freedom

    def __post_init__(self):
        if not abs(self.phi) < 1.0:
            raise ValueError(f"|phi| must be < 1, got {self.phi}")
        if not abs(self.psi) < 1.0:
            raise ValueError(f"|psi| must be < 1, got {self.psi}")
        if not 0.0 <= self.pi < 1.0:
            raise ValueError(f"pi must be in [0, 1), got {self.pi}")
        if not self.nu > 0.0:
            raise ValueError(f"nu must be positive, got {self.nu}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "theta", "omega", "phi", "alpha", "pi", "kappa", "rho",
            "gamma", "psi", "eta", "nu")}

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelParams":
        return cls(**doc)


@dataclass(frozen=True)
class FilterOutput:
    """Per-tick filtered paths plus the average log-likelihood.

    ``dispersion_path`` holds the state the recursion drives: the
    overdispersion for the base family, the variance for the mean-variance
    and continuous families.
    """

    spec: ModelSpec
    mu_path: np.ndarray
    dispersion_path: np.ndarray
    epsilon_path: np.ndarray
    pi_path: np.ndarray
    loglik_terms: np.ndarray
    loglik_mean: float
    omega: float

    @property
    def delta_path(self) -> np.ndarray:
        """The Skellam overdispersion path (defined for the Skellam families)."""
        if self.spec.family == "ziskellam_meandisp":
            return self.dispersion_path
        if self.spec.family == "ziskellam_meanvar":
            return self.dispersion_path - np.abs(self.mu_path)
        raise ValueError(f"no overdispersion path for family {self.spec.family!r}")

    @property
    def adjusted_dispersion_path(self) -> np.ndarray:
        """exp(omega + eps_i): the dispersion state net of temporal adjustments."""
        return np.exp(self.omega + self.epsilon_path)


@njit(cache=True, nogil=True)
def _filter_core(y, log_adj, fam, mdyn, ddyn, idyn,
                 theta, omega, phi, alpha, pi0, kappa, rho, gam, psi, eta, nu,
                 eps0):
    n = y.size
    mu_path = np.zeros(n)
    disp_path = np.empty(n)
    eps_path = np.empty(n)
    pi_path = np.zeros(n)
    ll = np.empty(n)
    status = _STATUS_OK
    bad = -1

    mu_init = 0.0
    if mdyn == 2:
        mu_init = kappa / (1.0 - rho) if abs(rho) < 1.0 else kappa
    lp_init = gam / (1.0 - psi) if idyn == 2 else 0.0
    lp_prev = lp_init

    for i in range(n):
        if i == 0:
            mu_i = mu_init
            eps_i = eps0
            lp_i = lp_init
        else:
            y_lag = y[i - 1]
            mu_lag = mu_path[i - 1]
            pi_lag = pi_path[i - 1]
            state_lag = disp_path[i - 1]
            if fam == 1:
                delta_lag = state_lag - abs(mu_lag)
            else:
                delta_lag = state_lag

            if mdyn == 1:
                mu_i = theta * (y_lag - mu_lag)
            elif mdyn == 2:
                mu_i = kappa + rho * mu_lag
                if theta != 0.0:
                    mu_i += theta * _score_mu(y_lag, mu_lag, delta_lag, pi_lag)
            else:
                mu_i = 0.0

            if ddyn == 1:
                eps_i = phi * eps_path[i - 1]
                if alpha != 0.0:
                    if fam == 0:
                        s = _score_logdelta(y_lag, mu_lag, delta_lag, pi_lag)
                    elif fam == 1:
                        s = (state_lag / delta_lag) * _score_logdelta(
                            y_lag, mu_lag, delta_lag, pi_lag)
                    elif fam == 2:
                        z2 = (y_lag - mu_lag) ** 2 / state_lag
                        s = 0.5 * (z2 - 1.0)
                    else:
                        z2 = (y_lag - mu_lag) ** 2 / state_lag
                        s = -0.5 + 0.5 * (nu + 1.0) * z2 / (nu + z2)
                    eps_i += alpha * s
            else:
                eps_i = 0.0

            if idyn == 2:
                lp_i = gam + psi * lp_prev
                if eta != 0.0:
                    lp_i += eta * _score_logit_pi(y_lag, mu_lag, delta_lag, pi_lag)
            else:
                lp_i = lp_init

        state_i = math.exp(omega + log_adj[i] + eps_i)
        if idyn == 0:
            pi_i = 0.0
        elif idyn == 1:
            pi_i = pi0
        else:
            pi_i = 1.0 / (1.0 + math.exp(-lp_i))

        if fam == 0:
            term = _log_pmf(y[i], mu_i, state_i, pi_i)
        elif fam == 1:
            delta_i = state_i - abs(mu_i)
            if delta_i <= 0.0:
                status = _STATUS_VARIANCE_BOUND
                bad = i
                break
            term = _log_pmf(y[i], mu_i, delta_i, pi_i)
        elif fam == 2:
            term = -0.5 * math.log(2.0 * math.pi * state_i) \
                - 0.5 * (y[i] - mu_i) ** 2 / state_i
        else:
            z2 = (y[i] - mu_i) ** 2 / state_i
            term = (math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu)
                    - 0.5 * math.log(math.pi * nu * state_i)
                    - 0.5 * (nu + 1.0) * math.log1p(z2 / nu))

        if not math.isfinite(term):
            status = _STATUS_NOT_FINITE
            bad = i
            break

        mu_path[i] = mu_i
        disp_path[i] = state_i
        eps_path[i] = eps_i
        pi_path[i] = pi_i
        ll[i] = term
        lp_prev = lp_i

    return mu_path, disp_path, eps_path, pi_path, ll, status, bad


def prepare_day_inputs(day, curves: AdjustmentCurves | None, spec: ModelSpec):
    """(y, t_seconds, d_tilde) for one day, with the training-set duration curve."""
    y = np.asarray(day.price_changes, dtype=np.int64)
    t = day.obs_times_seconds()
    d_tilde = adjust_durations(day, curves) if curves is not None else None
    return y, t, d_tilde


def _log_adjustment(spec, n, t_seconds, d_tilde, curves):
    log_adj = np.zeros(n)
    if spec.use_diurnal_adjustment:
        if curves is None or t_seconds is None:
            raise ValueError("diurnal adjustment requires curves and times")
        log_adj += np.log(curves.var_factor(t_seconds))
    if spec.use_duration_adjustment:
        if curves is None or d_tilde is None:
            raise ValueError("duration adjustment requires curves and adjusted durations")
        log_adj += np.log(curves.rel_factor(d_tilde))
    return log_adj


def filter_day(spec: ModelSpec, params: ModelParams, y,
               t_seconds=None, d_tilde=None, curves: AdjustmentCurves | None = None,
               eps0: float = 0.0) -> FilterOutput:
    """Run the recursions over one day of price changes.

    Mean and score states start at their long-term values (zero for the MA
    mean and the dispersion error; the logit recursion at its fixed point).
    Raises NumericalError when the mean-variance bound fails or a likelihood
    term is non-finite, carrying the offending index.
    """
    y = np.ascontiguousarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("empty series")
    log_adj = _log_adjustment(spec, y.size, t_seconds, d_tilde, curves)
    mu, disp, eps, pi, ll, status, bad = _filter_core(
        y, log_adj,
        FAMILIES.index(spec.family), MEAN_DYNAMICS.index(spec.mean_dynamics),
        DISPERSION_DYNAMICS.index(spec.dispersion_dynamics),
        INFLATION_DYNAMICS.index(spec.inflation_dynamics),
        params.theta, params.omega, params.phi, params.alpha, params.pi,
        params.kappa, params.rho, params.gamma, params.psi, params.eta,
        params.nu, eps0)
    if status == _STATUS_VARIANCE_BOUND:
        raise NumericalError(f"variance bound violated at observation {bad}", index=bad)
    if status == _STATUS_NOT_FINITE:
        raise NumericalError(f"non-finite log-likelihood at observation {bad}", index=bad)
    return FilterOutput(spec=spec, mu_path=mu, dispersion_path=disp,
                        epsilon_path=eps, pi_path=pi, loglik_terms=ll,
                        loglik_mean=float(ll.mean()), omega=params.omega)


def forecast_adjusted_path(spec: ModelSpec, params: ModelParams, y,
                           t_seconds=None, d_tilde=None,
                           curves: AdjustmentCurves | None = None) -> np.ndarray:
    """The adjustment-free dispersion path exp(omega + eps_i).

    Unlike the dispersion path itself, this needs no same-tick time or
    duration information, so it is forecastable from the previous tick.
    """
    out = filter_day(spec, params, y, t_seconds, d_tilde, curves)
    return out.adjusted_dispersion_path


def write_filter_csv(output: FilterOutput, y, path) -> None:
    """Per-tick dump: i, y, mu, delta, epsilon, loglik."""
    delta = (output.delta_path if output.spec.family.startswith("ziskellam")
             else output.dispersion_path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "y", "mu", "delta", "epsilon", "loglik"])
        for i in range(len(y)):
            w.writerow([i, int(y[i]), repr(float(output.mu_path[i])),
                        repr(float(delta[i])), repr(float(output.epsilon_path[i])),
                        repr(float(output.loglik_terms[i]))])
