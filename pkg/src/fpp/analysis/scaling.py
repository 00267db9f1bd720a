"""Regression of hole counts and sizes against t."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

M_LAWS = ("c*log t", "(log t)^C", "C*t*log t")


@dataclass
class SeriesPoint:
    seed: int
    t: float
    N: int
    M: int
    volume: int = 0
    boundary: int = 0


@dataclass
class ScalingFit:
    series: list
    slope_N: float = math.nan
    slope_N_ci: tuple = (math.nan, math.nan)
    intercept_N: float = math.nan
    r2_N: float = math.nan
    M_model: dict = field(default_factory=dict)  # law -> {"coef", "rss", "r2"}
    best_M_law: str | None = None
    insufficient_holes: bool = False
    note: str = ""
    t_values: list = field(default_factory=list)
    mean_N: list = field(default_factory=list)
    mean_M: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"slope_N": self.slope_N, "slope_N_ci": list(self.slope_N_ci),
                "intercept_N": self.intercept_N, "r2_N": self.r2_N,
                "M_model": self.M_model, "best_M_law": self.best_M_law,
                "insufficient_holes": self.insufficient_holes, "note": self.note,
                "t": self.t_values, "mean_N": self.mean_N, "mean_M": self.mean_M}


def _coerce(p) -> SeriesPoint:
    if isinstance(p, SeriesPoint):
        return p
    if isinstance(p, Mapping):
        return SeriesPoint(int(p["seed"]), float(p["t"]), int(p["N"]), int(p["M"]),
                           int(p.get("volume", 0)), int(p.get("boundary", 0)))
    return SeriesPoint(*p)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """slope, intercept, R^2."""
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / tot if tot > 0 else 1.0
    return float(slope), float(icpt), r2


def _through_origin(x: np.ndarray, y: np.ndarray) -> float:
    den = float(x @ x)
    return float(x @ y) / den if den > 0 else math.nan


def _fit_M(t: np.ndarray, M: np.ndarray) -> dict:
    lt = np.log(t)
    out = {}
    tot = float(((M - M.mean()) ** 2).sum())

    def pack(pred, coef):
        rss = float(((M - pred) ** 2).sum())
        return {"coef": coef, "rss": rss, "r2": 1 - rss / tot if tot > 0 else math.nan}

    c = _through_origin(lt, M)
    out["c*log t"] = pack(c * lt, c)
    pos = M > 0
    if pos.sum() >= 2 and np.all(lt[pos] > 0):
        C = _through_origin(np.log(lt[pos]), np.log(M[pos]))
        out["(log t)^C"] = pack(lt**C, C)
    else:
        out["(log t)^C"] = {"coef": math.nan, "rss": math.inf, "r2": math.nan}
    C = _through_origin(t * lt, M)
    out["C*t*log t"] = pack(C * t * lt, C)
    return out


def fit_scaling(series: Iterable, *, min_t: int = 4, min_seeds: int = 10,
                bootstrap: int = 2000, rng_seed: int = 0) -> ScalingFit:
    pts = [_coerce(p) for p in series]
    by_t = defaultdict(dict)
    for p in pts:
        by_t[p.t][p.seed] = p
    ts = sorted(by_t)
    if len(ts) < min_t:
        raise ValueError(f"need >= {min_t} distinct t values, got {len(ts)}")
    thin = [t for t in ts if len(by_t[t]) < min_seeds]
    if thin:
        raise ValueError(f"need >= {min_seeds} seeds per t; short at t={thin}")
    seeds = sorted(set.intersection(*(set(by_t[t]) for t in ts)))
    if len(seeds) < min_seeds:
        raise ValueError("too few seeds shared by every t")
    N = np.array([[by_t[t][s].N for s in seeds] for t in ts], dtype=np.float64)
    M = np.array([[by_t[t][s].M for s in seeds] for t in ts], dtype=np.float64)
    t = np.array(ts, dtype=np.float64)
    fit = ScalingFit(pts, t_values=ts, mean_N=N.mean(axis=1).tolist(),
                     mean_M=M.mean(axis=1).tolist())
    fit.M_model = _fit_M(t, M.mean(axis=1))
    finite = {k: v["rss"] for k, v in fit.M_model.items() if math.isfinite(v["rss"])}
    fit.best_M_law = min(finite, key=finite.get) if finite else None

    if not N.any():
        fit.insufficient_holes = True
        fit.note = "insufficient holes: N = 0 in every sample"
        return fit
    meanN = N.mean(axis=1)
    use = meanN > 0
    if use.sum() < 2:
        fit.insufficient_holes = True
        fit.note = "insufficient holes: fewer than two t values with N > 0"
        return fit
    fit.slope_N, fit.intercept_N, fit.r2_N = _ols(np.log(t[use]), np.log(meanN[use]))
    if not use.all():
        fit.note = f"t values with mean N = 0 dropped: {t[~use].tolist()}"

    rng = np.random.default_rng(rng_seed)
    slopes = []
    for _ in range(bootstrap):
        pick = rng.integers(0, len(seeds), len(seeds))
        m = N[:, pick].mean(axis=1)
        ok = m > 0
        if ok.sum() >= 2:
            slopes.append(_ols(np.log(t[ok]), np.log(m[ok]))[0])
    if slopes:
        lo, hi = np.percentile(slopes, [2.5, 97.5])
        fit.slope_N_ci = (float(lo), float(hi))
    return fit
