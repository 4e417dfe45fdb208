"""Model- and fitting-uncertainty indices on log biomass.

Model uncertainty measures how much observed biomass varies among trees that
share similar inputs.  Records are ordered by a sort key and cut into
``n_bins`` equal-count buckets; each bucket contributes
``std(ln B) / mean(ln B)`` and the index is the plain average over buckets.

Fitting uncertainty measures how far a regressor sits from the conditional
average.  Records are assigned to ``n_bins`` equal-width pockets along
``ln(sort key)``; each record contributes ``|ln(prediction) - mean(ln B)|``
against its pocket's mean, and a pocket's ratio is that MAE over the
pocket's ``mean(ln B)``.  Empty pockets are skipped in the average.

Both indices require ``ln B > 0`` for every record (biomass above 1 kg),
which the default 2 kg inclusion filter guarantees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AllPocketsEmpty,
    InputError,
    LengthMismatch,
    MissingField,
    NonpositiveInput,
    NonpositiveLogBiomass,
    TooFewPoints,
)

__all__ = ["SORT_KEYS", "UncertaintyReport", "sort_key_values", "model_uncertainty",
           "fitting_uncertainty", "pocket_assignment", "pocket_geometric_means"]

SORT_KEYS = ("h", "d", "cd", "h_cd", "agb")
DEFAULT_BINS = 10


def sort_key_values(records, sort_key):
    """Raw sort-key values for records: ``h``, ``d``, ``cd``, ``h_cd`` (H x CD) or ``agb``."""
    attrs = {"h": ("height_m",), "d": ("diameter_cm",), "cd": ("crown_diameter_m",),
             "h_cd": ("height_m", "crown_diameter_m"), "agb": ("biomass_kg",)}
    if sort_key not in attrs:
        raise InputError(f"unknown sort key {sort_key!r}; expected one of {SORT_KEYS}")
    out = np.ones(len(records))
    for attr in attrs[sort_key]:
        for i, r in enumerate(records):
            v = getattr(r, attr)
            if v is None:
                raise MissingField(f"sort key {sort_key}", attr, row=i)
            out[i] *= v
    return out


def _log_biomass(records):
    z = np.log(np.array([r.biomass_kg for r in records], dtype=float))
    if np.any(z <= 0):
        raise NonpositiveLogBiomass("every record needs biomass > 1 kg (ln B > 0)")
    return z


@dataclass(frozen=True)
class UncertaintyReport:
    kind: str  # "model" | "fitting"
    sort_key: str
    n_bins: int
    bin_low: np.ndarray  # raw sort-key units
    bin_high: np.ndarray
    count: np.ndarray
    ratio: np.ndarray  # NaN for empty pockets
    overall: float
    label: str = ""

    def rows(self):
        for i in range(self.n_bins):
            yield {
                "bin": i,
                "bin_low": float(self.bin_low[i]),
                "bin_high": float(self.bin_high[i]),
                "count": int(self.count[i]),
                "ratio": float(self.ratio[i]),
            }


def model_uncertainty(dataset, sort_key="h", n_bins=DEFAULT_BINS) -> UncertaintyReport:
    records = list(dataset)
    if n_bins < 1 or len(records) < n_bins:
        raise TooFewPoints(f"{len(records)} records cannot fill {n_bins} buckets")
    z = _log_biomass(records)
    key = sort_key_values(records, sort_key)
    # ties on the key are ordered by biomass, which makes buckets order independent
    order = np.lexsort((z, key))
    low, high, count, ratio = [], [], [], []
    for idx in np.array_split(order, n_bins):
        zb = z[idx]
        low.append(key[idx].min())
        high.append(key[idx].max())
        count.append(idx.size)
        ratio.append(zb.std() / zb.mean())
    ratio = np.array(ratio)
    return UncertaintyReport("model", sort_key, n_bins, np.array(low), np.array(high),
                             np.array(count), ratio, float(ratio.mean()))


def pocket_assignment(key, n_bins):
    """Pocket index per value on ``n_bins`` equal-width intervals of ``ln(key)``.

    Returns ``(index, edges)``; edges are in log units.
    """
    key = np.asarray(key, dtype=float)
    if np.any(~(key > 0)):
        raise NonpositiveInput("sort key must be > 0 for log-axis pockets")
    lk = np.log(key)
    lo, hi = float(lk.min()), float(lk.max())
    if not hi > lo:
        raise AllPocketsEmpty("sort key has zero range; pockets are degenerate")
    edges = np.linspace(lo, hi, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, lk, side="right") - 1, 0, n_bins - 1)
    return idx, edges


def fitting_uncertainty(dataset, predictions, sort_key="h", n_bins=DEFAULT_BINS,
                        label="") -> UncertaintyReport:
    records = list(dataset)
    pred = np.asarray(predictions, dtype=float).ravel()
    if pred.size != len(records):
        raise LengthMismatch(len(records), pred.size)
    if n_bins < 1 or len(records) < 2:
        raise TooFewPoints("fitting uncertainty needs >= 2 records and >= 1 pocket")
    if np.any(~(pred > 0)):
        raise NonpositiveInput("predictions must be > 0")
    z = _log_biomass(records)
    lp = np.log(pred)
    idx, edges = pocket_assignment(sort_key_values(records, sort_key), n_bins)
    count = np.bincount(idx, minlength=n_bins)
    ratio = np.full(n_bins, np.nan)
    for b in np.nonzero(count)[0]:
        m = idx == b
        mean_z = z[m].mean()
        ratio[b] = np.abs(lp[m] - mean_z).mean() / mean_z
    return UncertaintyReport("fitting", sort_key, n_bins, np.exp(edges[:-1]), np.exp(edges[1:]),
                             count, ratio, float(np.nanmean(ratio)), label)


def pocket_geometric_means(dataset, sort_key="h", n_bins=DEFAULT_BINS):
    """Per-record prediction equal to the geometric-mean biomass of its pocket."""
    records = list(dataset)
    z = _log_biomass(records)
    idx, _ = pocket_assignment(sort_key_values(records, sort_key), n_bins)
    means = np.zeros(n_bins)
    for b in np.unique(idx):
        means[b] = z[idx == b].mean()
    return np.exp(means[idx])
