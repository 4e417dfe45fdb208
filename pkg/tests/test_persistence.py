import json

import numpy as np
import pytest

from biomass_uq.allometry import fit_loglinear
from biomass_uq.errors import ModelFormatError
from biomass_uq.forest import ForestConfig, fit_forest
from biomass_uq.gpr import fit_gpr
from biomass_uq.persistence import dumps_model, load_labelled, loads_model, model_label, save_model
from biomass_uq.synthetic import inventory

DATA = inventory(150, seed=5)
QUERY = list(inventory(40, seed=6))


def fitted():
    recs = list(DATA)
    return [
        fit_gpr([r.height_m for r in recs], [r.biomass_kg for r in recs]),
        fit_loglinear("lr3_hd", DATA),
        fit_loglinear("lr_hcd", DATA),
        fit_forest(DATA, ForestConfig(n_trees=8)),
    ]


@pytest.mark.parametrize("model", fitted(), ids=["gpr", "lr3", "lr", "rf"])
def test_round_trip_bit_identical(model, tmp_path):
    path = tmp_path / "m.json"
    save_model(model, path, label="mine")
    again, label = load_labelled(path)
    assert label == "mine"
    np.testing.assert_array_equal(again.predict_biomass(QUERY), model.predict_biomass(QUERY))
    assert dumps_model(again, "mine") == path.read_text()


def test_default_labels():
    labels = [model_label(dumps_model(m)) for m in fitted()]
    assert labels == ["GPR", "LR3", "LR", "RF"]


def test_tampering_detected():
    doc = json.loads(dumps_model(fit_loglinear("lr2_h", DATA)))
    doc["payload"]["coef_a"] += 1e-9
    with pytest.raises(ModelFormatError, match="digest"):
        loads_model(json.dumps(doc))


@pytest.mark.parametrize("text", ["not json", "{}", '{"format": "biomass-uq-model", "version": 99}'])
def test_bad_containers(text):
    with pytest.raises(ModelFormatError):
        loads_model(text)
