"""Tree-level accuracy metrics, binned residuals and stand-level errors.

R^2 optionally drops outliers whose absolute residual exceeds three times
the mean absolute residual; by default residuals for that rule are taken
in natural-log space.  RMSE and Bias always use every point.  Standard
deviations are population (divide by n).

Stand-level errors use an LR3 model as pseudo ground truth:

    RE    = sum(LR3_i - f_i) / sum(LR3_i)                         (trees of a plot)
    %RMSE = sqrt(mean_p (LR3_p - f_p)^2) / mean_p LR3_p            (plot totals)

``denominator="sum"`` divides the %RMSE numerator by the sum of plot totals
instead of their mean.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Optional

import numpy as np

from .errors import (
    EmptyInput,
    EmptyPlot,
    LengthMismatch,
    NonpositiveInput,
    TooFewPoints,
    ZeroGroundTruth,
    ZeroVariance,
)

__all__ = [
    "EvalReport",
    "BinnedResiduals",
    "StandReport",
    "r_squared",
    "rmse",
    "bias",
    "evaluate",
    "binned_residuals",
    "predict_with",
    "relative_error",
    "stand_relative_error",
    "relative_rmse",
    "stand_report",
]


def _pair(y, yhat):
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.shape != yhat.shape:
        raise LengthMismatch(y.size, yhat.size)
    return y, yhat


def outlier_mask(y, yhat, scale="log"):
    """True where ``|residual| > 3 * MAE`` on the chosen residual scale."""
    y, yhat = _pair(y, yhat)
    if scale == "log":
        if np.any(~(y > 0)) or np.any(~(yhat > 0)):
            raise NonpositiveInput("log-scale outlier rule requires positive values")
        res = np.log(y) - np.log(yhat)
    elif scale == "raw":
        res = y - yhat
    else:
        raise ValueError(f"outlier scale must be 'log' or 'raw', got {scale!r}")
    a = np.abs(res)
    return a > 3.0 * a.mean()


def r_squared(y, yhat, exclude_outliers=True, scale="log"):
    """Coefficient of determination ``1 - RSS/TSS``.

    Returns ``(r2, n_excluded)``.
    """
    y, yhat = _pair(y, yhat)
    if y.size < 2:
        raise TooFewPoints("r_squared needs at least 2 points")
    n_excluded = 0
    if exclude_outliers:
        out = outlier_mask(y, yhat, scale)
        n_excluded = int(out.sum())
        y, yhat = y[~out], yhat[~out]
    tss = float(np.sum((y - y.mean()) ** 2)) if y.size else 0.0
    if tss <= 0.0:
        raise ZeroVariance("ground truth has zero variance")
    rss = float(np.sum((y - yhat) ** 2))
    return 1.0 - rss / tss, n_excluded


def rmse(y, yhat):
    y, yhat = _pair(y, yhat)
    if y.size == 0:
        raise TooFewPoints("rmse needs at least 1 point")
    return math.sqrt(float(np.mean((y - yhat) ** 2)))


def bias(y, yhat):
    """Mean relative error ``mean((yhat - y) / y)``; positive means overestimation."""
    y, yhat = _pair(y, yhat)
    if y.size == 0:
        raise TooFewPoints("bias needs at least 1 point")
    if np.any(y == 0):
        raise ZeroGroundTruth("bias is undefined for zero ground truth")
    return float(np.mean((yhat - y) / y))


@dataclass(frozen=True)
class EvalReport:
    r2: float
    rmse_kg: float
    bias: float
    n_used: int
    n_outliers_excluded: int

    @property
    def n_total(self):
        return self.n_used + self.n_outliers_excluded

    def to_dict(self):
        return asdict(self)


def evaluate(y, yhat, exclude_outliers=True, scale="log") -> EvalReport:
    y, yhat = _pair(y, yhat)
    r2, n_out = r_squared(y, yhat, exclude_outliers, scale)
    return EvalReport(r2, rmse(y, yhat), bias(y, yhat), y.size - n_out, n_out)


@dataclass(frozen=True)
class BinnedResiduals:
    """Equal-count bins on the log of one input.

    ``bin_low``/``bin_high`` are the smallest and largest input value (raw
    units) inside each bin.
    """

    axis: str
    bin_low: np.ndarray
    bin_high: np.ndarray
    mean_residual: np.ndarray
    half_std: np.ndarray
    count: np.ndarray

    @property
    def n_bins(self):
        return self.count.size

    def rows(self):
        for i in range(self.n_bins):
            yield {
                "bin": i,
                "bin_low": float(self.bin_low[i]),
                "bin_high": float(self.bin_high[i]),
                "mean_residual": float(self.mean_residual[i]),
                "half_std": float(self.half_std[i]),
                "count": int(self.count[i]),
            }


def binned_residuals(inputs, residuals, n_bins=10, axis="h") -> BinnedResiduals:
    x, r = _pair(inputs, residuals)
    if n_bins < 1 or x.size < n_bins:
        raise TooFewPoints(f"{x.size} points cannot fill {n_bins} bins")
    if np.any(~(x > 0)):
        raise NonpositiveInput("binning axis is logarithmic; inputs must be > 0")
    order = np.lexsort((r, np.log(x)))
    chunks = np.array_split(order, n_bins)
    low, high, mean, half, count = [], [], [], [], []
    for c in chunks:
        low.append(x[c].min())
        high.append(x[c].max())
        mean.append(r[c].mean())
        half.append(0.5 * r[c].std())
        count.append(c.size)
    return BinnedResiduals(axis, np.array(low), np.array(high), np.array(mean),
                           np.array(half), np.array(count))


def predict_with(model, records) -> np.ndarray:
    """Biomass predictions from a model object, a callable, or a precomputed array."""
    if hasattr(model, "predict_biomass"):
        return np.asarray(model.predict_biomass(records), dtype=float)
    if callable(model):
        return np.asarray(model(records), dtype=float)
    return np.asarray(model, dtype=float)


def relative_error(reference, candidate) -> float:
    ref, cand = _pair(reference, candidate)
    if ref.size == 0:
        raise EmptyPlot("plot has no trees")
    total = float(np.sum(ref))
    if total == 0:
        raise ZeroGroundTruth("reference total is zero")
    return float(np.sum(ref - cand)) / total


def stand_relative_error(plot_trees, candidate_model, lr3_model) -> float:
    trees = list(plot_trees)
    if not trees:
        raise EmptyPlot("plot has no trees")
    return relative_error(predict_with(lr3_model, trees), predict_with(candidate_model, trees))


def _plot_totals(plots, candidate_model, lr3_model):
    ref, cand = [], []
    for trees in plots:
        trees = list(trees)
        if not trees:
            raise EmptyPlot("plot has no trees")
        ref.append(float(np.sum(predict_with(lr3_model, trees))))
        cand.append(float(np.sum(predict_with(candidate_model, trees))))
    return np.array(ref), np.array(cand)


def relative_rmse(plots, candidate_model, lr3_model, denominator="mean") -> float:
    """%RMSE over plot totals, returned as a fraction (0.25 means 25%)."""
    plots = list(plots.values()) if isinstance(plots, Mapping) else list(plots)
    if not plots:
        raise EmptyInput("plot list")
    ref, cand = _plot_totals(plots, candidate_model, lr3_model)
    num = math.sqrt(float(np.mean((ref - cand) ** 2)))
    if denominator == "mean":
        den = float(np.mean(ref))
    elif denominator == "sum":
        den = float(np.sum(ref))
    else:
        raise ValueError(f"denominator must be 'mean' or 'sum', got {denominator!r}")
    return num / den


@dataclass(frozen=True)
class StandReport:
    per_plot_re: tuple  # ((plot_id, RE), ...)
    overall_re: float
    pct_rmse: float
    denominator: str = "mean"

    def to_dict(self):
        return {
            "per_plot_re": [{"plot_id": p, "re": v} for p, v in self.per_plot_re],
            "overall_re": self.overall_re,
            "pct_rmse": self.pct_rmse,
            "pct_rmse_denominator": self.denominator,
        }


def stand_report(plots: Mapping, candidate_model, lr3_model, denominator="mean",
                 min_trees: Optional[int] = None) -> StandReport:
    """Per-plot RE, pooled RE over every tree, and %RMSE of plot totals.

    ``plots`` maps plot id to its trees.  Plots with fewer than ``min_trees``
    trees are skipped.
    """
    items = [(k, list(v)) for k, v in plots.items()]
    if min_trees is not None:
        items = [(k, v) for k, v in items if len(v) >= min_trees]
    if not items:
        raise EmptyInput("plot list")
    per_plot = tuple((k, stand_relative_error(v, candidate_model, lr3_model)) for k, v in items)
    pooled = [t for _, v in items for t in v]
    overall = stand_relative_error(pooled, candidate_model, lr3_model)
    pct = relative_rmse([v for _, v in items], candidate_model, lr3_model, denominator)
    return StandReport(per_plot, overall, pct, denominator)
