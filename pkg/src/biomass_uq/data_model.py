"""Tree measurement records, inclusion filters and train/test splitting.

Units are fixed: height and crown diameter in meters, DBH in centimeters,
above-ground biomass in kilograms of dry matter.  No unit inference happens
at ingestion.

Inclusion thresholds are inclusive: a record with exactly 5 cm DBH or exactly
2 kg biomass is kept.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from .errors import (
    BadFraction,
    BadNumeric,
    EmptyDataset,
    EmptyInput,
    InvalidRecord,
    MissingColumn,
)

__all__ = [
    "Biome",
    "TreeRecord",
    "Dataset",
    "FilterRules",
    "Schema",
    "CANONICAL_COLUMNS",
    "parse_dataset",
    "read_dataset",
    "filter_records",
    "filter_with_reasons",
    "split_train_test",
    "TreeInputs",
    "parse_inputs",
]


class Biome(str, enum.Enum):
    TROPICAL_SUBTROPICAL = "tropical and subtropical forests"
    TEMPERATE_MIXED = "temperate mixed forests"
    TEMPERATE_CONIFEROUS = "temperate coniferous forests"
    BOREAL = "boreal forests"
    GRASSLAND_SHRUBLAND = "grasslands and shrublands"
    TUNDRA_SAVANNA_MEDITERRANEAN = "tundra, savannas, woodlands and mediterranean forests"
    DESERT_XERIC = "deserts and xeric shrublands"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, text: Optional[str]) -> "Biome":
        """Map free-form biome text onto a class; anything unrecognised is UNKNOWN."""
        if not text:
            return cls.UNKNOWN
        t = text.strip().lower().replace("_", " ")
        for b in cls:
            if t == b.value or t == b.name.lower().replace("_", " "):
                return b
        # keyword fallbacks, most specific first
        if "tropic" in t:
            return cls.TROPICAL_SUBTROPICAL
        if "conifer" in t:
            return cls.TEMPERATE_CONIFEROUS
        if "temperate" in t or "mixed" in t:
            return cls.TEMPERATE_MIXED
        if "boreal" in t or "taiga" in t:
            return cls.BOREAL
        if "desert" in t or "xeric" in t:
            return cls.DESERT_XERIC
        if any(k in t for k in ("tundra", "savanna", "mediterr", "woodland")):
            return cls.TUNDRA_SAVANNA_MEDITERRANEAN
        if "grass" in t or "shrub" in t:
            return cls.GRASSLAND_SHRUBLAND
        return cls.UNKNOWN


def _check_positive(name, value, optional):
    if value is None:
        if optional:
            return
        raise InvalidRecord(f"{name} is required")
    if not (math.isfinite(value) and value > 0):
        raise InvalidRecord(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class TreeRecord:
    """One measured tree."""

    height_m: float
    biomass_kg: float
    diameter_cm: Optional[float] = None
    crown_diameter_m: Optional[float] = None
    biome: Biome = Biome.UNKNOWN
    plot_id: Optional[str] = None
    lat: Optional[float] = None
    lon: Optional[float] = None
    source: str = ""

    def __post_init__(self):
        _check_positive("height_m", self.height_m, optional=False)
        _check_positive("biomass_kg", self.biomass_kg, optional=False)
        _check_positive("diameter_cm", self.diameter_cm, optional=True)
        _check_positive("crown_diameter_m", self.crown_diameter_m, optional=True)
        if self.lat is not None and not -90.0 <= self.lat <= 90.0:
            raise InvalidRecord(f"lat out of range: {self.lat!r}")
        if self.lon is not None and not -180.0 <= self.lon <= 180.0:
            raise InvalidRecord(f"lon out of range: {self.lon!r}")
        if not isinstance(self.biome, Biome):
            object.__setattr__(self, "biome", Biome.parse(self.biome))

    @property
    def has_location(self) -> bool:
        return self.lat is not None and self.lon is not None


# canonical column name -> TreeRecord attribute
CANONICAL_COLUMNS = {
    "h_m": "height_m",
    "d_cm": "diameter_cm",
    "cd_m": "crown_diameter_m",
    "agb_kg": "biomass_kg",
    "biome": "biome",
    "plot_id": "plot_id",
    "lat": "lat",
    "lon": "lon",
    "source": "source",
}
_NUMERIC = {"h_m", "d_cm", "cd_m", "agb_kg", "lat", "lon"}


@dataclass(frozen=True)
class Schema:
    """Column-name mapping from canonical names to the names used in a file.

    ``required`` lists canonical columns whose cells must parse; height and
    biomass are always required.
    """

    columns: Mapping[str, str] = field(default_factory=dict)
    required: frozenset = frozenset({"h_m", "agb_kg"})

    def __post_init__(self):
        unknown = set(self.columns) - set(CANONICAL_COLUMNS)
        if unknown:
            raise ValueError(f"unknown canonical columns in schema: {sorted(unknown)}")
        object.__setattr__(self, "required", frozenset(self.required) | {"h_m", "agb_kg"})

    def column(self, canonical: str) -> str:
        return self.columns.get(canonical, canonical)

    @classmethod
    def from_mapping(cls, mapping: Mapping) -> "Schema":
        """Build from a JSON-like dict: ``{"columns": {...}, "required": [...]}``."""
        return cls(columns=dict(mapping.get("columns", {})),
                   required=frozenset(mapping.get("required", ())))


@dataclass(frozen=True)
class Dataset:
    records: tuple = ()
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx):
        return self.records[idx]

    def column(self, attr: str) -> np.ndarray:
        """Float array of one numeric attribute; absent values are NaN."""
        return np.array(
            [np.nan if getattr(r, attr) is None else getattr(r, attr) for r in self.records],
            dtype=float,
        )

    def subset(self, indices: Iterable[int], provenance: Optional[str] = None) -> "Dataset":
        return Dataset(tuple(self.records[i] for i in indices),
                       self.provenance if provenance is None else provenance)

    def by_plot(self) -> dict:
        """Group records by ``plot_id`` (first-appearance order)."""
        groups: dict = {}
        for r in self.records:
            groups.setdefault(r.plot_id, []).append(r)
        return {k: Dataset(v, f"{self.provenance}[plot={k}]") for k, v in groups.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(CANONICAL_COLUMNS))
        for r in self.records:
            row = []
            for col, attr in CANONICAL_COLUMNS.items():
                v = getattr(r, attr)
                if v is None:
                    row.append("")
                elif col == "biome":
                    row.append(v.value)
                elif col in _NUMERIC:
                    row.append(repr(float(v)))
                else:
                    row.append(v)
            w.writerow(row)
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.to_csv().encode("utf-8")).hexdigest()


def _parse_float(text):
    text = text.strip()
    if not text:
        return None
    v = float(text)  # ValueError propagates to the caller
    if not math.isfinite(v):
        raise ValueError(text)
    return v


def parse_dataset(csv_text: str, schema: Optional[Schema] = None, provenance: str = "") -> Dataset:
    """Parse CSV text into a :class:`Dataset`.

    The first row is the header.  Required columns that fail to parse raise
    :class:`BadNumeric`; optional numeric cells that fail to parse are
    treated as absent.  Row numbers in errors are 1-based data rows.
    """
    schema = schema or Schema()
    if not csv_text.strip():
        raise EmptyInput("CSV text")
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptyInput("CSV text") from None
    index = {name: i for i, name in enumerate(header)}

    positions = {}
    for canonical in CANONICAL_COLUMNS:
        name = schema.column(canonical)
        if name in index:
            positions[canonical] = index[name]
        elif canonical in schema.required:
            raise MissingColumn(name)

    records = []
    for rowno, row in enumerate(reader, start=1):
        if not any(cell.strip() for cell in row):
            continue
        values = {}
        for canonical, pos in positions.items():
            cell = row[pos] if pos < len(row) else ""
            required = canonical in schema.required
            if canonical in _NUMERIC:
                try:
                    v = _parse_float(cell)
                except ValueError:
                    if required:
                        raise BadNumeric(rowno, schema.column(canonical), cell) from None
                    v = None
                if v is None and required:
                    raise BadNumeric(rowno, schema.column(canonical), cell)
            else:
                v = cell.strip() or None
            values[CANONICAL_COLUMNS[canonical]] = v
        values["biome"] = Biome.parse(values.get("biome"))
        values["source"] = values.get("source") or ""
        try:
            records.append(TreeRecord(**values))
        except InvalidRecord as exc:
            raise InvalidRecord(f"row {rowno}: {exc}") from None
    return Dataset(tuple(records), provenance)


def read_dataset(path, schema: Optional[Schema] = None) -> Dataset:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_dataset(fh.read(), schema, provenance=str(path))


@dataclass(frozen=True)
class FilterRules:
    min_diameter_cm: float = 5.0
    min_biomass_kg: float = 2.0
    require_height: bool = True
    require_diameter: bool = True
    require_biomass: bool = True
    require_crown_diameter: bool = False
    # geolocation is unused for fitting, so it is not enforced by default
    require_location: bool = False

    def __post_init__(self):
        if self.min_diameter_cm < 0 or self.min_biomass_kg < 0:
            raise ValueError("filter thresholds must be >= 0")


def _rejection_reason(r: TreeRecord, rules: FilterRules) -> Optional[str]:
    # height and biomass are mandatory on TreeRecord, so their require flags always hold
    if rules.require_diameter and r.diameter_cm is None:
        return "missing_diameter"
    if rules.require_crown_diameter and r.crown_diameter_m is None:
        return "missing_crown_diameter"
    if rules.require_location and not r.has_location:
        return "missing_location"
    if r.diameter_cm is not None and r.diameter_cm < rules.min_diameter_cm:
        return "diameter_below_threshold"
    if r.biomass_kg < rules.min_biomass_kg:
        return "biomass_below_threshold"
    return None


def filter_with_reasons(d: Dataset, rules: FilterRules = FilterRules()):
    """Like :func:`filter_records` but also returns a Counter of rejection reasons."""
    kept = []
    reasons = Counter()
    for r in d.records:
        why = _rejection_reason(r, rules)
        if why is None:
            kept.append(r)
        else:
            reasons[why] += 1
    return Dataset(tuple(kept), d.provenance), reasons


def filter_records(d: Dataset, rules: FilterRules = FilterRules()) -> Dataset:
    return filter_with_reasons(d, rules)[0]


def split_train_test(d: Dataset, test_fraction: float = 0.1, seed: int = 0):
    """Seeded random partition into ``(train, test)``.

    The test set has ``round(test_fraction * n)`` records (halves round up).
    Both parts keep the records' original relative order.
    """
    n = len(d)
    if n == 0:
        raise EmptyDataset()
    if not 0.0 < test_fraction < 1.0:
        raise BadFraction(test_fraction)
    n_test = int(math.floor(test_fraction * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return (d.subset(train_idx.tolist(), f"{d.provenance}[train seed={seed}]"),
            d.subset(test_idx.tolist(), f"{d.provenance}[test seed={seed}]"))


@dataclass(frozen=True)
class TreeInputs:
    """Structural measurements of a tree whose biomass is unknown."""

    height_m: Optional[float] = None
    diameter_cm: Optional[float] = None
    crown_diameter_m: Optional[float] = None
    plot_id: Optional[str] = None


def parse_inputs(csv_text: str, schema: Optional[Schema] = None) -> list:
    """Parse prediction inputs; every cell is optional and biomass is ignored.

    Cells that are present but not numeric raise :class:`BadNumeric`.
    """
    schema = schema or Schema()
    if not csv_text.strip():
        raise EmptyInput("CSV text")
    reader = csv.reader(io.StringIO(csv_text))
    header = [h.strip() for h in next(reader)]
    index = {name: i for i, name in enumerate(header)}
    wanted = {"h_m": "height_m", "d_cm": "diameter_cm", "cd_m": "crown_diameter_m"}
    out = []
    for rowno, row in enumerate(reader, start=1):
        if not any(cell.strip() for cell in row):
            continue
        values = {}
        for canonical, attr in wanted.items():
            pos = index.get(schema.column(canonical))
            cell = row[pos] if pos is not None and pos < len(row) else ""
            try:
                values[attr] = _parse_float(cell)
            except ValueError:
                raise BadNumeric(rowno, schema.column(canonical), cell) from None
        pos = index.get(schema.column("plot_id"))
        values["plot_id"] = (row[pos].strip() or None) if pos is not None and pos < len(row) else None
        out.append(TreeInputs(**values))
    return out
