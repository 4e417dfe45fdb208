"""Log-log linear allometric models fitted by ordinary least squares.

=========  ======================================  ============
kind       log-space form                          coefficients
=========  ======================================  ============
LR_HCD     ln B = a ln(H * CD) + b                 a, b
LR2_H      ln B = a ln H + b                       a, b
LR3_HD     ln B = a ln H + b ln D + c              a, b, c
LR_D       ln B = a ln D + b                       a, b
=========  ======================================  ============

The intercept is always the last coefficient.  ``H * CD`` is a single
regressor with one slope.  DBH is used in the units it is stored in
(centimeters); a unit change only moves the intercept.  Back-transformation
is a plain ``exp`` with no lognormal correction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InputError, MissingField, NonpositiveInput, RankDeficient

__all__ = ["LogLinearKind", "LogLinearModel", "fit_loglinear", "fit_loglinear_arrays",
           "predict_loglinear", "design_matrix"]


class LogLinearKind(str, enum.Enum):
    LR_HCD = "lr_hcd"
    LR2_H = "lr2_h"
    LR3_HD = "lr3_hd"
    LR_D = "lr_d"

    @property
    def fields(self):
        """Record attributes this kind needs."""
        return _FIELDS[self]

    @property
    def labels(self):
        return ("a", "b", "c") if self is LogLinearKind.LR3_HD else ("a", "b")

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        t = str(text).strip().lower()
        for k in cls:
            if t in (k.value, k.name.lower()):
                return k
        aliases = {"lr": cls.LR_HCD, "lr2": cls.LR2_H, "lr3": cls.LR3_HD, "lrd": cls.LR_D}
        if t in aliases:
            return aliases[t]
        raise InputError(f"unknown log-linear model kind {text!r}")


_FIELDS = {
    LogLinearKind.LR_HCD: ("height_m", "crown_diameter_m"),
    LogLinearKind.LR2_H: ("height_m",),
    LogLinearKind.LR3_HD: ("height_m", "diameter_cm"),
    LogLinearKind.LR_D: ("diameter_cm",),
}


def _log_positive(name, v):
    v = np.asarray(v, dtype=float).ravel()
    if np.any(~(v > 0)):
        raise NonpositiveInput(f"{name} must be > 0 for a log-log model")
    return np.log(v)


def design_matrix(kind, height=None, diameter=None, crown_diameter=None):
    """Columns: slope regressors in coefficient order, then a column of ones."""
    kind = LogLinearKind.parse(kind)
    given = {"height_m": height, "diameter_cm": diameter, "crown_diameter_m": crown_diameter}
    for f in kind.fields:
        if given[f] is None:
            raise MissingField(kind.name, f)
    if kind is LogLinearKind.LR_HCD:
        cols = [_log_positive("height", height) + _log_positive("crown diameter", crown_diameter)]
    elif kind is LogLinearKind.LR2_H:
        cols = [_log_positive("height", height)]
    elif kind is LogLinearKind.LR3_HD:
        cols = [_log_positive("height", height), _log_positive("diameter", diameter)]
    else:
        cols = [_log_positive("diameter", diameter)]
    n = cols[0].size
    if any(c.size != n for c in cols):
        raise InputError("regressor arrays differ in length")
    return np.column_stack(cols + [np.ones(n)])


@dataclass(frozen=True)
class LogLinearModel:
    kind: LogLinearKind
    coef_a: float
    coef_b: float
    coef_c: float = 0.0
    residual_sigma: float = 0.0
    n_train: int = 0

    @property
    def coefficients(self):
        """Active coefficients in design-matrix order (intercept last)."""
        if self.kind is LogLinearKind.LR3_HD:
            return np.array([self.coef_a, self.coef_b, self.coef_c])
        return np.array([self.coef_a, self.coef_b])

    def labelled(self):
        return dict(zip(self.kind.labels, self.coefficients.tolist()))

    def predict_log(self, **inputs):
        return design_matrix(self.kind, **inputs) @ self.coefficients

    def predict_biomass(self, records):
        return predict_loglinear(self, records)


def fit_loglinear_arrays(kind, biomass, height=None, diameter=None, crown_diameter=None):
    """OLS fit on raw-unit arrays."""
    kind = LogLinearKind.parse(kind)
    x = design_matrix(kind, height, diameter, crown_diameter)
    z = _log_positive("biomass", biomass)
    if z.size != x.shape[0]:
        raise InputError("biomass and regressors differ in length")
    p = x.shape[1]
    if z.size < p or np.linalg.matrix_rank(x) < p:
        raise RankDeficient(f"{kind.name}: design matrix of {z.size} rows is rank deficient")
    coef, *_ = np.linalg.lstsq(x, z, rcond=None)
    resid = z - x @ coef
    sigma = float(np.sqrt(np.mean(resid ** 2)))
    c = float(coef[2]) if p == 3 else 0.0
    return LogLinearModel(kind, float(coef[0]), float(coef[1]), c, sigma, int(z.size))


def _record_inputs(kind, records):
    out = {}
    names = {"height_m": "height", "diameter_cm": "diameter", "crown_diameter_m": "crown_diameter"}
    for f in kind.fields:
        vals = []
        for i, r in enumerate(records):
            v = getattr(r, f)
            if v is None:
                raise MissingField(kind.name, f, row=i)
            vals.append(v)
        out[names[f]] = np.array(vals, dtype=float)
    return out


def fit_loglinear(kind, dataset) -> LogLinearModel:
    kind = LogLinearKind.parse(kind)
    records = list(dataset)
    return fit_loglinear_arrays(kind, [r.biomass_kg for r in records], **_record_inputs(kind, records))


def predict_loglinear(model: LogLinearModel, records=None, **inputs):
    """Biomass in kg for records (or a single record), or for keyword arrays.

    Keywords are ``height``, ``diameter`` and ``crown_diameter``.
    """
    if records is not None:
        single = hasattr(records, "height_m")
        recs = [records] if single else list(records)
        out = np.exp(model.predict_log(**_record_inputs(model.kind, recs)))
        return float(out[0]) if single else out
    return np.exp(model.predict_log(**inputs))
