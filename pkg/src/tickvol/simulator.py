"""Synthetic tick days drawn from a specified model.

Durations and price changes are simulated independently by default (their
only modeled link runs through the duration adjustment curve, which can be
supplied to exercise exactly that path).  Timestamps carry millisecond
resolution with an explicit share of exact zero durations, mimicking bursts
of simultaneous transactions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from datetime import date

import numpy as np
from numba import njit

from .errors import CleaningWarning, DataError, NumericalError
from .gasfilter import (
    DISPERSION_DYNAMICS,
    FAMILIES,
    INFLATION_DYNAMICS,
    MEAN_DYNAMICS,
    ModelParams,
    ModelSpec,
)
from .skellam import _score_logdelta, _score_logit_pi, _score_mu
from .smoothing import AdjustmentCurves
from .ticks import TickDay

__all__ = ["SimConfig", "simulate_day"]

DEFAULT_START_MS = 34_500_000        # 09:35:00, right after the opening skip


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to generate one synthetic trading day."""

    spec: ModelSpec
    params: ModelParams
    n_ticks: int
    seed: int = 0
    duration_process: str = "iid_exponential"      # or "diurnal_exponential"
    mean_duration_s: float = 1.0
    zero_duration_share: float = 0.0
    base_price: float = 100.0
    day_id: date = date(2022, 3, 1)
    start_ms: int = DEFAULT_START_MS

    def __post_init__(self):
        if self.n_ticks < 2:
            raise ValueError("n_ticks must be at least 2")
        if not 0.0 <= self.zero_duration_share < 1.0:
            raise ValueError("zero_duration_share must be in [0, 1)")
        if self.duration_process not in ("iid_exponential", "diurnal_exponential"):
            raise ValueError(f"unknown duration process {self.duration_process!r}")
        if self.spec.family not in ("ziskellam_meandisp", "ziskellam_meanvar"):
            raise ValueError("simulation is defined for the Skellam families only")

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "params": self.params.to_dict(),
            "n_ticks": self.n_ticks,
            "seed": self.seed,
            "duration_process": self.duration_process,
            "mean_duration_s": self.mean_duration_s,
            "zero_duration_share": self.zero_duration_share,
            "base_price": self.base_price,
            "day_id": self.day_id.isoformat(),
            "start_ms": self.start_ms,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SimConfig":
        doc = dict(doc)
        doc["spec"] = ModelSpec.from_dict(doc["spec"])
        doc["params"] = ModelParams.from_dict(doc["params"])
        if isinstance(doc.get("day_id"), str):
            doc["day_id"] = date.fromisoformat(doc["day_id"])
        return cls(**doc)


@njit(cache=True, nogil=True)
def _simulate_core(n, log_adj, fam, mdyn, ddyn, idyn,
                   theta, omega, phi, alpha, pi0, kappa, rho, gam, psi, eta,
                   seed):
    # mirrors the filter recursion, drawing y_i instead of reading it
    np.random.seed(seed)
    y = np.empty(n, dtype=np.int64)
    mu_prev = 0.0
    eps_prev = 0.0
    status = 0
    mu_init = 0.0
    if mdyn == 2:
        mu_init = kappa / (1.0 - rho) if abs(rho) < 1.0 else kappa
    lp_init = gam / (1.0 - psi) if idyn == 2 else 0.0
    lp_prev = lp_init
    delta_prev = 1.0
    pi_prev = 0.0
    for i in range(n):
        if i == 0:
            mu_i = mu_init
            eps_i = 0.0
            lp_i = lp_init
        else:
            if mdyn == 1:
                mu_i = theta * (y[i - 1] - mu_prev)
            elif mdyn == 2:
                mu_i = kappa + rho * mu_prev
                if theta != 0.0:
                    mu_i += theta * _score_mu(y[i - 1], mu_prev, delta_prev, pi_prev)
            else:
                mu_i = 0.0
            if ddyn == 1:
                eps_i = phi * eps_prev
                if alpha != 0.0:
                    s = _score_logdelta(y[i - 1], mu_prev, delta_prev, pi_prev)
                    if fam == 1:
                        s *= (delta_prev + abs(mu_prev)) / delta_prev
                    eps_i += alpha * s
            else:
                eps_i = 0.0
            if idyn == 2:
                lp_i = gam + psi * lp_prev
                if eta != 0.0:
                    lp_i += eta * _score_logit_pi(y[i - 1], mu_prev, delta_prev, pi_prev)
            else:
                lp_i = lp_init

        state_i = math.exp(omega + log_adj[i] + eps_i)
        if fam == 1:
            delta_i = state_i - abs(mu_i)
            if delta_i <= 0.0:
                status = 1
                break
        else:
            delta_i = state_i
        if idyn == 0:
            pi_i = 0.0
        elif idyn == 1:
            pi_i = pi0
        else:
            pi_i = 1.0 / (1.0 + math.exp(-lp_i))

        if np.random.random() < pi_i:
            y[i] = 0
        else:
            am = abs(mu_i)
            lam1 = 0.5 * (am + mu_i + delta_i)
            lam2 = 0.5 * (am - mu_i + delta_i)
            y[i] = np.random.poisson(lam1) - np.random.poisson(lam2)

        mu_prev = mu_i
        eps_prev = eps_i
        lp_prev = lp_i
        delta_prev = delta_i
        pi_prev = pi_i
    return y, status


def _draw_timestamps(config: SimConfig, rng: np.random.Generator,
                     curves: AdjustmentCurves | None) -> np.ndarray:
    n = config.n_ticks
    zero = rng.random(n - 1) < config.zero_duration_share
    base = rng.exponential(config.mean_duration_s, size=n - 1)
    if config.duration_process == "diurnal_exponential":
        if curves is None:
            raise ValueError("diurnal duration process requires curves")
        # scale by the diurnal curve at provisional times (one refinement pass)
        t_prov = config.start_ms / 1000.0 + np.cumsum(np.where(zero, 0.0, base))
        base = base * curves.dur_factor(t_prov)
    steps_ms = np.where(zero, 0, np.maximum(1, np.rint(base * 1000.0).astype(np.int64)))
    return config.start_ms + np.concatenate([[0], np.cumsum(steps_ms)])


def simulate_day(config: SimConfig, curves: AdjustmentCurves | None = None) -> TickDay:
    """Generate one synthetic day; deterministic under the config seed.

    A price path that would cross zero is resimulated from a doubled base
    price with a warning.
    """
    rng = np.random.default_rng(config.seed)
    time_ms = _draw_timestamps(config, rng, curves)
    t_seconds = time_ms[1:] / 1000.0
    spec, params = config.spec, config.params

    log_adj = np.zeros(config.n_ticks - 1)
    if curves is not None:
        if spec.use_diurnal_adjustment:
            log_adj += np.log(curves.var_factor(t_seconds))
        if spec.use_duration_adjustment:
            d = np.diff(time_ms) / 1000.0
            mean = d.mean()
            if mean <= 0:
                raise DataError("cannot standardize simulated durations")
            d_tilde = (d / mean) / curves.dur_factor(t_seconds)
            log_adj += np.log(curves.rel_factor(d_tilde))

    y, status = _simulate_core(
        config.n_ticks - 1, log_adj,
        FAMILIES.index(spec.family), MEAN_DYNAMICS.index(spec.mean_dynamics),
        DISPERSION_DYNAMICS.index(spec.dispersion_dynamics),
        INFLATION_DYNAMICS.index(spec.inflation_dynamics),
        params.theta, params.omega, params.phi, params.alpha, params.pi,
        params.kappa, params.rho, params.gamma, params.psi, params.eta,
        config.seed + 1)
    if status == 1:
        raise NumericalError("variance bound violated during simulation")

    price = config.base_price + np.concatenate([[0.0], np.cumsum(y)]) / 100.0
    if price.min() <= 0.0:
        warnings.warn(
            f"simulated price path hit {price.min():.2f}; resimulating from "
            f"base price {2 * config.base_price:.2f}", CleaningWarning)
        from dataclasses import replace
        return simulate_day(replace(config, base_price=2 * config.base_price), curves)

    volume = rng.integers(1, 1000, size=config.n_ticks)
    return TickDay(day_id=config.day_id, time_ms=time_ms, price=price,
                   volume=volume)
