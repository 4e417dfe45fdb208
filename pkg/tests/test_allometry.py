import math

import numpy as np
import pytest

from biomass_uq.allometry import (
    LogLinearKind,
    LogLinearModel,
    design_matrix,
    fit_loglinear,
    fit_loglinear_arrays,
    predict_loglinear,
)
from biomass_uq.data_model import Dataset, TreeRecord
from biomass_uq.errors import MissingField, NonpositiveInput, RankDeficient

CONE_INTERCEPT = 4.8744313344835914  # ln(pi * 500 / 12), computed separately


def cone_pairs(n=50):
    # brute-force grid of (H, D) pairs, D in meters
    hs = [3.0 + 0.9 * i for i in range(10)]
    ds = [0.05 + 0.17 * j for j in range(5)]
    pairs = [(h, d) for h in hs for d in ds][:n]
    h = np.array([p[0] for p in pairs])
    d = np.array([p[1] for p in pairs])
    return h, d, math.pi / 12 * 500 * d ** 2 * h


def test_lr2_exact_fit():
    h = np.linspace(2, 40, 30)
    b = np.exp(2 * np.log(h) + 1)
    m = fit_loglinear_arrays("lr2_h", b, height=h)
    assert m.coef_a == pytest.approx(2, abs=1e-10)
    assert m.coef_b == pytest.approx(1, abs=1e-10)
    assert m.residual_sigma <= 1e-10


def test_cone_law_recovery():
    h, d, b = cone_pairs()
    m = fit_loglinear_arrays(LogLinearKind.LR3_HD, b, height=h, diameter=d)
    assert m.coef_a == pytest.approx(1, abs=1e-8)
    assert m.coef_b == pytest.approx(2, abs=1e-8)
    assert m.coef_c == pytest.approx(CONE_INTERCEPT, abs=1e-8)
    assert m.labelled() == {"a": m.coef_a, "b": m.coef_b, "c": m.coef_c}


def test_predict_examples():
    ident = LogLinearModel(LogLinearKind.LR2_H, 1.0, 0.0)
    assert predict_loglinear(ident, TreeRecord(height_m=7.0, biomass_kg=1.0)) == pytest.approx(7.0, rel=1e-15)
    cone = LogLinearModel(LogLinearKind.LR3_HD, 1.0, 2.0, CONE_INTERCEPT)
    out = predict_loglinear(cone, height=[20.0], diameter=[0.3])
    assert out[0] == pytest.approx(235.61944901923448, rel=1e-12)


def test_predict_reproduces_noiseless_training():
    h, d, b = cone_pairs()
    m = fit_loglinear_arrays("lr3_hd", b, height=h, diameter=d)
    np.testing.assert_allclose(predict_loglinear(m, height=h, diameter=d), b, rtol=1e-8)


def test_hcd_is_single_regressor():
    h = np.linspace(3, 30, 20)
    cd = np.linspace(1, 9, 20) ** 1.3
    x = design_matrix("lr_hcd", height=h, crown_diameter=cd)
    assert x.shape == (20, 2)
    np.testing.assert_allclose(x[:, 0], np.log(h * cd))
    m = fit_loglinear_arrays("lr_hcd", 3.0 * (h * cd) ** 1.5, height=h, crown_diameter=cd)
    assert (m.coef_a, m.coef_b) == pytest.approx((1.5, math.log(3.0)), abs=1e-10)


def test_residuals_orthogonal_to_design():
    rng = np.random.default_rng(0)
    h, d = rng.uniform(3, 40, 80), rng.uniform(5, 100, 80)
    b = np.exp(0.8 * np.log(h) + 1.9 * np.log(d) - 2.5 + rng.normal(0, 0.3, 80))
    m = fit_loglinear_arrays("lr3_hd", b, height=h, diameter=d)
    x = design_matrix("lr3_hd", height=h, diameter=d)
    r = np.log(b) - x @ m.coefficients
    for j in range(x.shape[1]):
        assert abs(r @ x[:, j]) <= 1e-8 * np.linalg.norm(r) * np.linalg.norm(x[:, j])


def test_noise_continuity():
    rng = np.random.default_rng(1)
    h, d = rng.uniform(3, 40, 60), rng.uniform(5, 100, 60)
    z = 0.8 * np.log(h) + 1.9 * np.log(d) - 2.5
    e = rng.normal(size=60)
    clean = fit_loglinear_arrays("lr3_hd", np.exp(z), height=h, diameter=d).coefficients
    gaps = [np.abs(fit_loglinear_arrays("lr3_hd", np.exp(z + amp * e), height=h, diameter=d).coefficients
                   - clean).max() for amp in (1e-2, 1e-4, 1e-6)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-5


def test_height_units_move_only_intercept():
    rng = np.random.default_rng(2)
    h = rng.uniform(3, 40, 50)
    b = np.exp(1.7 * np.log(h) + 0.4 + rng.normal(0, 0.2, 50))
    a = fit_loglinear_arrays("lr2_h", b, height=h)
    s = 3.28084
    c = fit_loglinear_arrays("lr2_h", b, height=s * h)
    assert c.coef_a == pytest.approx(a.coef_a, abs=1e-10)
    assert c.coef_b == pytest.approx(a.coef_b - a.coef_a * math.log(s), abs=1e-10)


def test_fit_from_dataset_and_missing_field():
    recs = tuple(TreeRecord(height_m=h, biomass_kg=2 * h ** 2, diameter_cm=h + 1.0) for h in (3.0, 5.0, 9.0))
    m = fit_loglinear("lr2", Dataset(recs))
    assert m.coef_a == pytest.approx(2.0, abs=1e-10)
    with pytest.raises(MissingField) as exc:
        fit_loglinear("lr_hcd", Dataset(recs))
    assert exc.value.field == "crown_diameter_m"
    with pytest.raises(MissingField):
        predict_loglinear(m.__class__(LogLinearKind.LR_D, 1, 0), TreeRecord(height_m=3, biomass_kg=3))


def test_rank_deficient():
    with pytest.raises(RankDeficient):
        fit_loglinear_arrays("lr2_h", [5.0, 6.0, 7.0], height=[10.0, 10.0, 10.0])
    h = np.array([2.0, 4.0, 8.0, 16.0])
    with pytest.raises(RankDeficient):
        fit_loglinear_arrays("lr3_hd", h, height=h, diameter=h ** 2)
    with pytest.raises(RankDeficient):
        fit_loglinear_arrays("lr_d", [3.0], diameter=[4.0])


def test_nonpositive_rejected():
    with pytest.raises(NonpositiveInput):
        fit_loglinear_arrays("lr2_h", [1.0, 2.0, 3.0], height=[1.0, 0.0, 2.0])
    m = LogLinearModel(LogLinearKind.LR2_H, 1.0, 0.0)
    with pytest.raises(NonpositiveInput):
        predict_loglinear(m, height=[-1.0])


def test_kind_parse():
    assert LogLinearKind.parse("LR3") is LogLinearKind.LR3_HD
    assert LogLinearKind.parse("lr_d") is LogLinearKind.LR_D
