"""Versioned JSON container for fitted models.

Layout::

    {"format": "biomass-uq-model", "version": 1, "model_type": "gpr" | "loglinear" | "forest",
     "label": "...", "payload": {...}, "digest": "<sha256 of the canonical payload>"}

Floats are written with ``repr`` precision, so a reloaded model reproduces
predictions bit for bit on the same platform.  GP factorizations are not
stored; they are recomputed at load time from the stored training arrays
and the jitter that the fit actually used.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .allometry import LogLinearKind, LogLinearModel
from .errors import ModelFormatError
from .forest import ForestConfig, ForestModel, Tree
from .gpr import FitInfo, GprHyperparams, GprModel, TransformSpec

FORMAT = "biomass-uq-model"
VERSION = 1

__all__ = ["dumps_model", "loads_model", "save_model", "load_model", "load_labelled",
           "model_label", "default_label"]


def _canonical(payload):
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _digest(payload):
    return hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()


def _gpr_payload(m: GprModel):
    info = m.fit_info
    return {
        "transform": {"height": m.transform.height, "biomass": m.transform.biomass},
        "hyper": {"length_scale": m.hyper.length_scale, "mean_offset": m.hyper.mean_offset,
                  "noise_sigma": m.hyper.noise_sigma},
        "jitter": m.jitter,
        "fit_info": None if info is None else {
            "grid_loss": info.grid_loss, "loss": info.loss, "final_step": info.final_step,
            "iterations": info.iterations, "converged": info.converged},
        "train_x": m.train_x.tolist(),
        "train_y": m.train_y.tolist(),
    }


def _loglinear_payload(m: LogLinearModel):
    return {"kind": m.kind.value, "coef_a": m.coef_a, "coef_b": m.coef_b, "coef_c": m.coef_c,
            "residual_sigma": m.residual_sigma, "n_train": m.n_train}


def _forest_payload(m: ForestModel):
    c = m.config
    return {
        "config": {"n_trees": c.n_trees, "max_depth": c.max_depth, "min_leaf": c.min_leaf,
                   "seed": c.seed, "features": list(c.features), "bootstrap": c.bootstrap},
        "trees": [{"feature": t.feature.tolist(), "threshold": t.threshold.tolist(),
                   "left": t.left.tolist(), "right": t.right.tolist(), "value": t.value.tolist(),
                   "n_samples": None if t.n_samples is None else t.n_samples.tolist()}
                  for t in m.trees],
    }


def dumps_model(model, label=None) -> str:
    if isinstance(model, GprModel):
        kind, payload = "gpr", _gpr_payload(model)
    elif isinstance(model, LogLinearModel):
        kind, payload = "loglinear", _loglinear_payload(model)
    elif isinstance(model, ForestModel):
        kind, payload = "forest", _forest_payload(model)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    doc = {"format": FORMAT, "version": VERSION, "model_type": kind,
           "label": label or default_label(model), "payload": payload, "digest": _digest(payload)}
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def default_label(model):
    if isinstance(model, GprModel):
        return "GPR"
    if isinstance(model, ForestModel):
        return "RF"
    return {"lr_hcd": "LR", "lr2_h": "LR2", "lr3_hd": "LR3", "lr_d": "LR_D"}[model.kind.value]


def _load_payload(kind, p):
    if kind == "gpr":
        info = p["fit_info"]
        return GprModel.from_hyperparams(
            np.array(p["train_x"], dtype=float), np.array(p["train_y"], dtype=float),
            GprHyperparams(**p["hyper"]), TransformSpec(**p["transform"]), p["jitter"],
            None if info is None else FitInfo(**info))
    if kind == "loglinear":
        return LogLinearModel(LogLinearKind(p["kind"]), p["coef_a"], p["coef_b"], p["coef_c"],
                              p["residual_sigma"], p["n_train"])
    if kind == "forest":
        trees = tuple(
            Tree(np.array(t["feature"], dtype=int), np.array(t["threshold"], dtype=float),
                 np.array(t["left"], dtype=int), np.array(t["right"], dtype=int),
                 np.array(t["value"], dtype=float),
                 None if t["n_samples"] is None else np.array(t["n_samples"], dtype=int))
            for t in p["trees"])
        return ForestModel(trees, ForestConfig(**p["config"]))
    raise ModelFormatError(f"unknown model_type {kind!r}")


def _parse(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFormatError("not a biomass-uq model container")
    if doc.get("version") != VERSION:
        raise ModelFormatError(f"unsupported container version {doc.get('version')!r}")
    if _digest(doc["payload"]) != doc.get("digest"):
        raise ModelFormatError("payload digest mismatch; file is corrupt or was edited")
    return doc


def loads_model(text):
    doc = _parse(text)
    return _load_payload(doc["model_type"], doc["payload"])


def model_label(text) -> str:
    return _parse(text)["label"]


def save_model(model, path, label=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model, label))


def load_model(path):
    return load_labelled(path)[0]


def load_labelled(path):
    """Return ``(model, label)``."""
    with open(path, encoding="utf-8") as fh:
        doc = _parse(fh.read())
    return _load_payload(doc["model_type"], doc["payload"]), doc["label"]
