"""Uniform construction of the six candidate regressors by name."""

from __future__ import annotations

from dataclasses import dataclass, field

from .allometry import LogLinearKind, fit_loglinear
from .errors import InputError
from .forest import ForestConfig, fit_forest
from .gpr import DEFAULT_SIGMA, SearchConfig, TransformSpec, fit_gpr

MODEL_KINDS = ("lr_hcd", "lr2_h", "lr3_hd", "lr_d", "rf", "gpr")
SHORT_LABELS = {"lr_hcd": "LR", "lr2_h": "LR2", "lr3_hd": "LR3", "lr_d": "LR_D", "rf": "RF", "gpr": "GPR"}


@dataclass(frozen=True)
class FitOptions:
    sigma: float = DEFAULT_SIGMA
    transform: TransformSpec = TransformSpec()
    search: SearchConfig = SearchConfig()
    forest: ForestConfig = field(default_factory=ForestConfig)


def normalize_kind(kind: str) -> str:
    k = str(kind).strip().lower()
    if k in ("rf", "forest", "random_forest"):
        return "rf"
    if k in ("gpr", "gp"):
        return "gpr"
    try:
        return LogLinearKind.parse(k).value
    except InputError:
        raise InputError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}") from None


def fit_model(kind, dataset, options: FitOptions = FitOptions()):
    kind = normalize_kind(kind)
    if kind == "gpr":
        recs = list(dataset)
        return fit_gpr([r.height_m for r in recs], [r.biomass_kg for r in recs],
                       sigma=options.sigma, search=options.search, transform=options.transform)
    if kind == "rf":
        return fit_forest(dataset, options.forest)
    return fit_loglinear(kind, dataset)
