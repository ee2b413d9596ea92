"""Cubic smoothing splines and the intraday adjustment curves built from them.

Three curves describe the temporal structure of a pooled tick dataset:

* a diurnal curve for standardized trade durations over time of day,
* a diurnal curve for standardized squared price changes over time of day,
* a relation curve for doubly standardized squared price changes over
  diurnally adjusted durations.

Each is a natural cubic smoothing spline minimizing

    sum_i w_i (y_i - g(x_i))^2 + penalty * integral g''(t)^2 dt

with the penalty chosen by generalized cross-validation unless given.  The
solver uses the banded second-difference formulation, which stays stable in
both penalty limits (interpolation and the weighted least-squares line); the
GCV trace comes from the band of the inverse, so one penalty evaluation is
O(n).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import cholesky_banded, solve_banded, solveh_banded

from .errors import DataError, FittingWarning

__all__ = [
    "AdjustmentCurves",
    "SplineCurve",
    "adjust_durations",
    "build_adjustment_curves",
    "fit_spline",
    "standardize_durations",
]

MAX_EXACT_POINTS = 10_000
MAX_BINS = 1_000
DEFAULT_FLOOR = 1e-4
REL_DURATION_QUANTILE = 0.999


@dataclass(frozen=True)
class SplineCurve:
    """Natural cubic spline stored as knot values plus second derivatives.

    Evaluation outside [knots[0], knots[-1]] clamps to the boundary value;
    cubic extrapolation could go negative, which the adjustment curves cannot
    tolerate.
    """

    knots: np.ndarray
    values: np.ndarray
    second_derivs: np.ndarray
    smoothing_penalty: float

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def __call__(self, x) -> np.ndarray:
        t = self.knots
        xq = np.clip(np.asarray(x, dtype=float), t[0], t[-1])
        idx = np.clip(np.searchsorted(t, xq, side="right") - 1, 0, len(t) - 2)
        h = t[idx + 1] - t[idx]
        a = (xq - t[idx]) / h
        b = (t[idx + 1] - xq) / h
        g0, g1 = self.values[idx], self.values[idx + 1]
        s0, s1 = self.second_derivs[idx], self.second_derivs[idx + 1]
        cubic = ((a ** 3 - a) * s1 + (b ** 3 - b) * s0) * h * h / 6.0
        out = a * g1 + b * g0 + cubic
        return out if np.ndim(x) else float(out)

    def to_dict(self) -> dict:
        return {
            "knots": self.knots.tolist(),
            "values": self.values.tolist(),
            "second_derivs": self.second_derivs.tolist(),
            "penalty": self.smoothing_penalty,
            "domain": list(self.domain),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SplineCurve":
        return cls(
            knots=np.asarray(doc["knots"], dtype=float),
            values=np.asarray(doc["values"], dtype=float),
            second_derivs=np.asarray(doc["second_derivs"], dtype=float),
            smoothing_penalty=float(doc["penalty"]),
        )


def _collapse_duplicates(x, y, w, rel_tol=1e-7):
    """Merge abscissae closer than rel_tol * span into weighted means.

    Gaps that small carry no information for a smoothing fit but wreck the
    conditioning of the second-difference operator (1/h^2 entries).  Returns
    the merged triple plus the within-group weighted scatter of y.
    """
    order = np.argsort(x, kind="stable")
    x, y, w = x[order], y[order], w[order]
    tol = rel_tol * max(x[-1] - x[0], abs(x[-1]), 1e-300)
    gaps = np.diff(x)
    starts = np.concatenate([[0], np.nonzero(gaps > tol)[0] + 1])
    if starts.size == x.size:
        return x, y, w, 0.0
    wsum = np.add.reduceat(w, starts)
    ym = np.add.reduceat(w * y, starts) / wsum
    xm = np.add.reduceat(w * x, starts) / wsum
    scatter = float(np.dot(w, y * y) - np.dot(wsum, ym * ym))
    return xm, ym, wsum, max(scatter, 0.0)


def _quantile_bin(x, y, w, n_bins):
    """Aggregate into quantile bins; also returns the within-bin scatter."""
    edges = np.quantile(x, np.linspace(0.0, 1.0, n_bins + 1))
    edges = np.unique(edges)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(edges) - 2)
    nb = len(edges) - 1
    wsum = np.bincount(idx, weights=w, minlength=nb)
    keep = wsum > 0
    wk = wsum[keep]
    xm = np.bincount(idx, weights=w * x, minlength=nb)[keep] / wk
    ym = np.bincount(idx, weights=w * y, minlength=nb)[keep] / wk
    scatter = float(np.dot(w, y * y) - np.dot(wk, ym * ym))
    return xm, ym, wk, max(scatter, 0.0)


class _SplineSystem:
    """Precomputed banded matrices for one (x, y, w) dataset.

    Notation follows the second-difference construction: Q is the n x (n-2)
    matrix of divided second differences, R the (n-2) x (n-2) inner-product
    matrix of the natural basis, S = Q' W^-1 Q.  The fit solves the
    equivalent saddle system in the deviation u = g - line and v = penalty *
    gamma, which is free of the catastrophic cancellation the classic
    back-substitution g = y - penalty W^-1 Q gamma suffers for very large
    penalties:

        [ W   Q          ] [u]   [W (y - line)]
        [ Q'  -R/penalty ] [v] = [0           ]

    ``n_total`` and ``yssw`` carry the original observation count and the
    within-group scatter lost to duplicate collapsing / binning, so GCV is
    evaluated for the underlying dataset rather than the group means.
    """

    def __init__(self, x, y, w, n_total=None, yssw=0.0):
        self.x, self.y, self.w = x, y, w
        self.n = n = x.size
        self.m = m = n - 2
        self.n_total = n if n_total is None else int(n_total)
        self.yssw = float(yssw)
        h = np.diff(x)
        iw = 1.0 / w
        self.h, self.iw = h, iw
        self.qa = 1.0 / h[:-1]                    # Q[j, j]
        self.qb = -1.0 / h[:-1] - 1.0 / h[1:]     # Q[j+1, j]
        self.qc = 1.0 / h[1:]                     # Q[j+2, j]
        a, b, c = self.qa, self.qb, self.qc
        self.s0 = a * a * iw[:m] + b * b * iw[1:m + 1] + c * c * iw[2:m + 2]
        # columns j and j+1 of Q overlap in rows j+1 (b_j, a_{j+1}) and
        # j+2 (c_j, b_{j+1})
        self.s1 = (b[:-1] * a[1:] * iw[1:m] + c[:-1] * b[1:] * iw[2:m + 1]
                   if m > 1 else np.zeros(0))
        self.s2 = c[:-2] * a[2:] * iw[2:m] if m > 2 else np.zeros(0)
        self.r0 = (h[:-1] + h[1:]) / 3.0
        self.r1 = h[1:-1] / 6.0
        s_scale = float(np.sum(self.s0))
        self.lam_scale = float(np.sum(self.r0)) / s_scale if s_scale > 0 else 1.0
        self.line = self._line_fit()

    def _line_fit(self):
        xc = self.x - self.x.mean()
        basis = np.stack([np.ones(self.n), xc], axis=1)
        sw = np.sqrt(self.w)
        coef, *_ = np.linalg.lstsq(basis * sw[:, None], self.y * sw, rcond=None)
        return basis @ coef

    def solve(self, lam):
        """Fitted values and interior second derivatives at this penalty."""
        n, m = self.n, self.m
        if lam <= 0.0:
            # pure interpolation: R gamma = Q'y, g = y
            ab = np.zeros((2, m))
            ab[0] = self.r0
            ab[1, :-1] = self.r1
            qty = ((self.y[2:] - self.y[1:-1]) / self.h[1:]
                   - (self.y[1:-1] - self.y[:-2]) / self.h[:-1])
            return self.y.copy(), solveh_banded(ab, qty, lower=True)
        size = n + m
        # interleaved ordering u_0, u_1, v_0, u_2, v_1, u_3, ... keeps the
        # saddle system banded with bandwidth 3
        pu = np.empty(n, dtype=np.int64)
        pu[0], pu[1] = 0, 1
        pu[2:] = 2 * np.arange(2, n) - 1
        pv = 2 * np.arange(m) + 2
        rows = [pu, pv, pu[:m], pv, pu[1:m + 1], pv, pu[2:m + 2]]
        cols = [pu, pu[:m], pv, pu[1:m + 1], pv, pu[2:m + 2], pv]
        vals = [self.w, self.qa, self.qa, self.qb, self.qb, self.qc, self.qc]
        rows += [pv]
        cols += [pv]
        vals += [-self.r0 / lam]
        if m > 1:
            rows += [pv[:-1], pv[1:]]
            cols += [pv[1:], pv[:-1]]
            vals += [-self.r1 / lam, -self.r1 / lam]
        ab = np.zeros((7, size))          # (l, u) = (3, 3); row 3 is the diagonal
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        np.add.at(ab, (3 + rows - cols, cols), np.concatenate(vals))
        rhs = np.zeros(size)
        rhs[pu] = self.w * (self.y - self.line)
        sol = solve_banded((3, 3), ab, rhs)
        g = self.line + sol[pu]
        gamma = sol[pv] / lam
        return g, gamma

    def _banded_scaled(self, lam):
        ab = np.zeros((3, self.m))
        ab[0] = self.r0 + lam * self.s0
        if self.m > 1:
            ab[1, :-1] = self.r1 + lam * self.s1
        if self.m > 2:
            ab[2, :-2] = lam * self.s2
        d = np.sqrt(ab[0])
        scaled = np.zeros_like(ab)
        scaled[0] = 1.0
        if self.m > 1:
            scaled[1, :-1] = ab[1, :-1] / (d[:-1] * d[1:])
        if self.m > 2:
            scaled[2, :-2] = ab[2, :-2] / (d[:-2] * d[2:])
        return scaled, d

    def effective_df(self, lam):
        scaled, d = self._banded_scaled(lam)
        chol = cholesky_banded(scaled, lower=True)
        tr = _trace_inverse_band(chol, self.s0 / d ** 2,
                                 self.s1 / (d[:-1] * d[1:]) if self.m > 1 else self.s1,
                                 self.s2 / (d[:-2] * d[2:]) if self.m > 2 else self.s2)
        return self.n - lam * tr

    def gcv(self, lam):
        g, _ = self.solve(lam)
        rss = self.yssw + float(np.dot(self.w, (self.y - g) ** 2))
        nt = self.n_total
        denom = max(nt - min(self.effective_df(lam), self.n), 1e-12)
        return nt * rss / denom ** 2

    def select_penalty(self):
        lam0 = self.lam_scale
        grid = lam0 * 10.0 ** np.arange(-9.0, 9.5, 0.5)
        scores = [self.gcv(lam) for lam in grid]
        best = int(np.argmin(scores))
        la = np.log(grid[max(best - 1, 0)])
        lb = np.log(grid[min(best + 1, len(grid) - 1)])
        gr = (np.sqrt(5.0) - 1.0) / 2.0
        c1 = lb - gr * (lb - la)
        c2 = la + gr * (lb - la)
        f1, f2 = self.gcv(np.exp(c1)), self.gcv(np.exp(c2))
        for _ in range(25):
            if f1 < f2:
                lb, c2, f2 = c2, c1, f1
                c1 = lb - gr * (lb - la)
                f1 = self.gcv(np.exp(c1))
            else:
                la, c1, f1 = c1, c2, f2
                c2 = la + gr * (lb - la)
                f2 = self.gcv(np.exp(c2))
        return float(np.exp(0.5 * (la + lb)))


@njit(cache=True, nogil=True)
def _trace_inverse_band(chol_lower, s0, s1, s2):
    """tr(A^-1 S) for banded SPD A (bandwidth 2) from its Cholesky factor.

    Uses the backward recursion for the band of the inverse: only entries of
    A^-1 within the band of S are ever needed.
    """
    m = s0.size
    # chol_lower rows: diagonal, first sub, second sub (scipy lower form)
    d = chol_lower[0]
    # unit-lower-triangular factors: L[i+1,i], L[i+2,i]
    l1 = np.zeros(m)
    l2 = np.zeros(m)
    for i in range(m - 1):
        l1[i] = chol_lower[1, i] / d[i]
    for i in range(m - 2):
        l2[i] = chol_lower[2, i] / d[i]
    b0 = np.zeros(m)   # (A^-1)_{ii}
    b1 = np.zeros(m)   # (A^-1)_{i,i+1}
    b2 = np.zeros(m)   # (A^-1)_{i,i+2}
    for i in range(m - 1, -1, -1):
        di = 1.0 / (d[i] * d[i])
        if i + 2 < m:
            b2[i] = -l1[i] * b1[i + 1] - l2[i] * b0[i + 2]
        if i + 1 < m:
            t = -l1[i] * b0[i + 1]
            if i + 2 < m:
                t -= l2[i] * b1[i + 1]
            b1[i] = t
        acc = di
        if i + 1 < m:
            acc -= l1[i] * b1[i]
        if i + 2 < m:
            acc -= l2[i] * b2[i]
        b0[i] = acc
    total = 0.0
    for i in range(m):
        total += b0[i] * s0[i]
    for i in range(m - 1):
        total += 2.0 * b1[i] * s1[i]
    for i in range(m - 2):
        total += 2.0 * b2[i] * s2[i]
    return total


def fit_spline(x, y, weights=None, penalty: float | None = None) -> SplineCurve:
    """Fit a natural cubic smoothing spline; GCV picks the penalty if not given.

    Datasets larger than 10k points are pre-binned into at most 1k quantile
    bins (bin mean as point, bin weight as count) before solving.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("x and y must have the same length")
    if x.size < 4:
        raise DataError(f"need at least 4 points to fit a spline, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite abscissae")
    if not np.all(np.isfinite(y)):
        raise DataError("non-finite ordinates")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float).ravel()
    if np.any(w <= 0):
        raise ValueError("weights must be positive")

    n_total = x.size
    yssw = 0.0
    if x.size > MAX_EXACT_POINTS:
        x, y, w, sc = _quantile_bin(x, y, w, MAX_BINS)
        yssw += sc
    x, y, w, sc = _collapse_duplicates(x, y, w)
    yssw += sc
    if x.size < 2 or x[-1] == x[0]:
        raise DataError("degenerate abscissae: all x identical")
    if x.size > MAX_BINS:
        # thin knots like the reference smoothing routines do: gap ratios
        # beyond ~1e4 push the banded system past float64 conditioning
        x, y, w, sc = _quantile_bin(x, y, w, MAX_BINS)
        yssw += sc
        x, y, w, sc = _collapse_duplicates(x, y, w)
        yssw += sc
    if x.size < 4:
        raise DataError("fewer than 4 distinct abscissae after aggregation")

    system = _SplineSystem(x, y, w, n_total=n_total, yssw=yssw)
    lam = system.select_penalty() if penalty is None else float(penalty)
    g, gamma = system.solve(lam)
    second = np.zeros(x.size)
    second[1:-1] = gamma
    return SplineCurve(knots=x, values=g, second_derivs=second,
                       smoothing_penalty=lam)


@dataclass(frozen=True)
class AdjustmentCurves:
    """The three fitted temporal curves plus the evaluation floor.

    The model divides by the duration curve and takes logs of the other two,
    so every evaluation is floored at ``floor_eps``.
    """

    f_dur: SplineCurve
    f_var: SplineCurve
    f_rel: SplineCurve
    floor_eps: float = DEFAULT_FLOOR

    def dur_factor(self, t_seconds) -> np.ndarray:
        return np.maximum(self.f_dur(t_seconds), self.floor_eps)

    def var_factor(self, t_seconds) -> np.ndarray:
        return np.maximum(self.f_var(t_seconds), self.floor_eps)

    def rel_factor(self, d_adjusted) -> np.ndarray:
        return np.maximum(self.f_rel(d_adjusted), self.floor_eps)

    def to_dict(self) -> dict:
        return {
            "floor_eps": self.floor_eps,
            "f_dur": self.f_dur.to_dict(),
            "f_var": self.f_var.to_dict(),
            "f_rel": self.f_rel.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AdjustmentCurves":
        return cls(
            f_dur=SplineCurve.from_dict(doc["f_dur"]),
            f_var=SplineCurve.from_dict(doc["f_var"]),
            f_rel=SplineCurve.from_dict(doc["f_rel"]),
            floor_eps=float(doc["floor_eps"]),
        )

    @classmethod
    def identity(cls) -> "AdjustmentCurves":
        """Unit curves: no temporal adjustment anywhere."""
        knots = np.array([0.0, 30_000.0, 60_000.0, 90_000.0])
        flat = SplineCurve(knots=knots, values=np.ones(4),
                           second_derivs=np.zeros(4), smoothing_penalty=0.0)
        return cls(f_dur=flat, f_var=flat, f_rel=flat)


def standardize_durations(day) -> np.ndarray:
    """Durations divided by their within-day mean."""
    d = np.asarray(day.durations, dtype=float)
    if d.size == 0:
        raise DataError("day has no durations")
    mean = d.mean()
    if mean <= 0.0:
        raise DataError("cannot standardize: mean duration is zero")
    return d / mean


def adjust_durations(day, curves: AdjustmentCurves) -> np.ndarray:
    """Standardized durations divided by the fitted diurnal duration curve."""
    dbar = standardize_durations(day)
    t = day.obs_times_seconds()
    return dbar / curves.dur_factor(t)


def build_adjustment_curves(days, floor_eps: float = DEFAULT_FLOOR) -> AdjustmentCurves:
    """Pool per-day standardized durations and squared changes, fit the curves.

    Days whose squared price changes are all zero cannot be standardized and
    are excluded with a warning.
    """
    t_all, dbar_all, ybar2_all = [], [], []
    for day in days:
        y2 = np.asarray(day.price_changes, dtype=float) ** 2
        m = y2.mean() if y2.size else 0.0
        if m <= 0.0:
            warnings.warn(
                f"day {day.day_id}: mean squared price change is zero; excluded",
                FittingWarning)
            continue
        t_all.append(day.obs_times_seconds())
        dbar_all.append(standardize_durations(day))
        ybar2_all.append(y2 / m)
    if not t_all:
        raise DataError("no usable days for adjustment curves")
    t = np.concatenate(t_all)
    dbar = np.concatenate(dbar_all)
    ybar2 = np.concatenate(ybar2_all)

    f_dur = fit_spline(t, dbar)
    dtil = dbar / np.maximum(f_dur(t), floor_eps)
    f_var = fit_spline(t, ybar2)
    ytil2 = ybar2 / np.maximum(f_var(t), floor_eps)
    # extreme durations would dominate the relation fit through leverage
    cap = np.quantile(dtil, REL_DURATION_QUANTILE)
    keep = dtil <= cap
    f_rel = fit_spline(dtil[keep], ytil2[keep])
    return AdjustmentCurves(f_dur=f_dur, f_var=f_var, f_rel=f_rel,
                            floor_eps=floor_eps)
