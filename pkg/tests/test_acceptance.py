"""Acceptance checks, one class per criterion.

Criteria 1-6 use only synthetic data and always run.  Criteria 7-10 need
the published field datasets, located through environment variables:

    BIOMASS_UQ_TREE_CSV        tree-level H / D / CD / AGB table
    BIOMASS_UQ_TREE_SCHEMA     optional JSON column mapping for it
    BIOMASS_UQ_STAND_CSV       stand-level validation trees with plot ids
    BIOMASS_UQ_STAND_SCHEMA    optional JSON column mapping for it

They are skipped when those files are absent.  A synthetic smoke run of the
same code path runs regardless, without asserting the published bands.
"""

import json
import math
import os

import numpy as np
import pytest

from biomass_uq.allometry import LogLinearKind, LogLinearModel, fit_loglinear_arrays
from biomass_uq.data_model import (
    Dataset,
    FilterRules,
    Schema,
    TreeRecord,
    filter_records,
    parse_inputs,
    read_dataset,
    split_train_test,
)
from biomass_uq.evaluation import bias, evaluate, r_squared, relative_rmse, rmse, stand_relative_error, stand_report
from biomass_uq.gpr import (
    GprHyperparams,
    GprModel,
    SearchConfig,
    TransformSpec,
    fit_gpr,
    nll,
    nll_eigen,
    nll_grad,
    optimal_mean_offset,
    predict_gpr,
)
from biomass_uq.models import FitOptions, fit_model
from biomass_uq.synthetic import inventory
from biomass_uq.uncertainty import fitting_uncertainty, model_uncertainty, pocket_geometric_means

RAW = TransformSpec.raw()
CONE_INTERCEPT = math.log(math.pi * 500 / 12)


# ---------------------------------------------------------------------------
# Property suite
# ---------------------------------------------------------------------------

@pytest.mark.acceptance(1, "GP conditioning oracle")
class TestConditioningOracle:
    def test_fifty_two_point_instances(self):
        rng = np.random.default_rng(2024)
        for _ in range(50):
            x = rng.uniform(-3, 3, 2)
            y = rng.normal(0, 2, 2)
            l, b0, sigma = rng.uniform(0.2, 4), rng.normal(), rng.uniform(0.01, 1.5)
            q = rng.uniform(-5, 5)
            m = GprModel.from_hyperparams(x, y, GprHyperparams(l, b0, sigma), RAW, 0.0)
            p = predict_gpr(m, [q])

            s2 = sigma * sigma
            k = math.exp(-(x[0] - x[1]) ** 2 / (2 * l * l))
            a = 1 + s2
            det = a * a - k * k
            k0, k1 = (math.exp(-(q - xi) ** 2 / (2 * l * l)) for xi in x)
            w0, w1 = (k0 * a - k1 * k) / det, (k1 * a - k0 * k) / det
            mu = b0 + w0 * (y[0] - b0) + w1 * (y[1] - b0)
            var = 1 - (w0 * k0 + w1 * k1)
            assert abs(p.latent_mean[0] - mu) <= 1e-10
            assert abs(p.variance[0] - var) <= 1e-10


@pytest.mark.acceptance(2, "GP interpolation")
class TestInterpolation:
    def test_twenty_points_noise_free(self):
        rng = np.random.default_rng(5)
        x = np.sort(rng.uniform(0, 20, 20))
        x += np.arange(20) * 0.3  # keep points apart so K stays well conditioned
        y = np.cos(x / 2.5) + 0.1 * x
        m = GprModel.from_hyperparams(x, y, GprHyperparams(1.0, 0.4, 0.0), RAW, 1e-10)
        p = predict_gpr(m, x)
        assert np.max(np.abs(p.latent_mean - y)) <= 1e-6
        assert np.max(p.variance) <= 1e-6


@pytest.mark.acceptance(3, "nll correctness")
class TestLoss:
    def test_eigen_form_vs_dense_inverse(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            x, y = rng.uniform(-4, 4, 10), rng.normal(size=10)
            l, b0, sigma = rng.uniform(0.2, 3), rng.normal(), rng.uniform(0.05, 1)
            a = np.exp(-(x[:, None] - x[None, :]) ** 2 / (2 * l * l)) + sigma ** 2 * np.eye(10)
            r = y - b0
            dense = float(r @ np.linalg.inv(a) @ r) + float(np.log(np.linalg.det(a)))
            assert abs(nll_eigen(l, b0, x, y, sigma) - dense) <= 1e-8 * max(1.0, abs(dense))
            assert abs(nll(l, b0, x, y, sigma, jitter=0.0) - dense) <= 1e-8 * max(1.0, abs(dense))

    def test_gradient_and_stationarity(self):
        d = list(inventory(300, seed=8))
        h = np.array([t.height_m for t in d])
        b = np.array([t.biomass_kg for t in d])
        m = fit_gpr(h, b)
        x, y, s = m.train_x, m.train_y, m.hyper.noise_sigma
        l0 = m.hyper.length_scale
        f0 = m.fit_info.loss
        for sgn in (-1, 1):
            l = l0 * math.exp(sgn * m.fit_info.final_step)
            f = nll(l, optimal_mean_offset(l, x, y, s), x, y, s)
            assert f >= f0 - SearchConfig().rel_tol * abs(f0)
        step = 1e-5
        for l, b0 in [(l0, m.hyper.mean_offset), (0.5 * l0, m.hyper.mean_offset + 0.3)]:
            g_l, g_b = nll_grad(l, b0, x, y, s)
            fd_l = (nll(l + step, b0, x, y, s) - nll(l - step, b0, x, y, s)) / (2 * step)
            fd_b = (nll(l, b0 + step, x, y, s) - nll(l, b0 - step, x, y, s)) / (2 * step)
            assert abs(g_l - fd_l) <= 1e-4 * max(abs(fd_l), 1e-2)
            assert abs(g_b - fd_b) <= 1e-4 * max(abs(fd_b), 1e-2)


@pytest.mark.acceptance(4, "OLS cone-law recovery")
class TestConeLaw:
    def test_noiseless_recovery(self):
        h = np.repeat(np.linspace(4, 40, 10), 5)
        d = np.tile(np.linspace(0.08, 0.9, 5), 10)
        b = math.pi / 12 * 500 * d ** 2 * h
        m = fit_loglinear_arrays("lr3_hd", b, height=h, diameter=d)
        assert abs(m.coef_a - 1) <= 1e-8
        assert abs(m.coef_b - 2) <= 1e-8
        assert abs(m.coef_c - CONE_INTERCEPT) <= 1e-8


@pytest.mark.acceptance(5, "metric identities")
class TestMetricIdentities:
    y = np.random.default_rng(3).uniform(2, 3000, 200)

    def test_perfect_predictions(self):
        assert r_squared(self.y, self.y)[0] == 1.0
        assert rmse(self.y, self.y) == 0.0
        assert bias(self.y, self.y) == 0.0

    def test_mean_predictor(self):
        r2, _ = r_squared(self.y, np.full_like(self.y, self.y.mean()), exclude_outliers=False)
        assert abs(r2) <= 1e-12

    def test_stand_self_comparison(self):
        lr3 = LogLinearModel(LogLinearKind.LR3_HD, 0.9, 1.8, -2.0)
        plots = {p: list(v) for p, v in inventory(120, seed=2, plots=4).by_plot().items()}
        assert stand_relative_error(plots["P00"], lr3, lr3) == 0.0
        assert relative_rmse(plots, lr3, lr3) == 0.0

    @pytest.mark.parametrize("s", [0.5, 2.0, 10.0])
    def test_bias_scale_invariance(self, s):
        yhat = self.y * np.random.default_rng(4).lognormal(0.05, 0.4, self.y.size)
        assert abs(bias(s * self.y, s * yhat) - bias(self.y, yhat)) <= 1e-12


@pytest.mark.acceptance(6, "uncertainty identities")
class TestUncertaintyIdentities:
    def test_model_uncertainty_zero_on_bucket_constant(self):
        h = np.linspace(2, 40, 100)
        z = np.repeat(np.linspace(1, 7, 10), 10)
        d = Dataset(tuple(TreeRecord(height_m=float(a), biomass_kg=float(np.exp(b))) for a, b in zip(h, z)))
        assert model_uncertainty(d, "h", 10).overall <= 1e-14

    def test_fitting_uncertainty_zero_for_geometric_mean(self):
        d = inventory(800, seed=10)
        assert fitting_uncertainty(d, pocket_geometric_means(d)).overall <= 1e-12

    def test_permutation_invariance(self):
        d = inventory(500, seed=12)
        perm = np.random.default_rng(0).permutation(len(d))
        shuffled = Dataset(tuple(d.records[i] for i in perm))
        for key in ("h", "d", "cd", "h_cd"):
            assert model_uncertainty(d, key).overall == model_uncertainty(shuffled, key).overall
        pred = np.array([r.biomass_kg for r in d]) ** 0.97
        a = fitting_uncertainty(d, pred).overall
        b = fitting_uncertainty(shuffled, pred[perm]).overall
        assert abs(a - b) <= 1e-12


# ---------------------------------------------------------------------------
# Dataset suite
# ---------------------------------------------------------------------------

LABELS = {"lr_hcd": "LR", "lr2_h": "LR2", "lr3_hd": "LR3", "rf": "RF", "gpr": "GPR"}
PUBLISHED_MODEL_UNCERTAINTY = {"h": 0.1825, "d": 0.1413, "cd": 0.2981, "h_cd": 0.2057}


def _schema(env):
    path = os.environ.get(env)
    if not path:
        return Schema()
    with open(path, encoding="utf-8") as fh:
        return Schema.from_mapping(json.load(fh))


def _data_path(env):
    path = os.environ.get(env)
    if not path or not os.path.exists(path):
        pytest.skip(f"{env} not set or file missing; dataset suite skipped")
    return path


def run_protocol(dataset, seed=0):
    """Filter, 9:1 split, fit the five models, evaluate on the held-out tenth."""
    data = filter_records(dataset, FilterRules(require_crown_diameter=True))
    train, test = split_train_test(data, 0.1, seed)
    models = {LABELS[k]: fit_model(k, train, FitOptions()) for k in LABELS}
    y = test.column("biomass_kg")
    reports = {lab: evaluate(y, m.predict_biomass(list(test))) for lab, m in models.items()}
    fitting = {lab: fitting_uncertainty(data, m.predict_biomass(list(data))).overall
               for lab, m in models.items()}
    model_u = {k: model_uncertainty(data, k).overall for k in PUBLISHED_MODEL_UNCERTAINTY}
    return {"data": data, "models": models, "reports": reports, "fitting": fitting, "model_u": model_u}


def stand_results(models, trees):
    plots = {}
    for t in trees:
        plots.setdefault(t.plot_id, []).append(t)
    return {lab: stand_report(plots, models[lab], models["LR3"]) for lab in ("LR", "RF", "GPR")}


@pytest.fixture(scope="module")
def field_trees():
    path = _data_path("BIOMASS_UQ_TREE_CSV")
    return run_protocol(read_dataset(path, _schema("BIOMASS_UQ_TREE_SCHEMA")))


@pytest.mark.dataset
@pytest.mark.acceptance(7, "tree-level metrics neighborhood")
def test_tree_level_metrics(field_trees):
    rep = field_trees["reports"]
    lr3 = rep["LR3"]
    assert 0.90 <= lr3.r2 <= 0.99
    assert 300 <= lr3.rmse_kg <= 700
    assert abs(lr3.bias) <= 0.15
    r2 = {k: v.r2 for k, v in rep.items()}
    # "GPR ~ RF": within 0.05 of each other, both between LR3 and LR
    assert r2["LR3"] > max(r2["GPR"], r2["RF"])
    assert abs(r2["GPR"] - r2["RF"]) <= 0.05
    assert min(r2["GPR"], r2["RF"]) > r2["LR"] > r2["LR2"]


@pytest.mark.dataset
@pytest.mark.acceptance(8, "fitting uncertainty neighborhood")
def test_fitting_uncertainty_ordering(field_trees):
    fu = field_trees["fitting"]
    assert min(fu, key=fu.get) == "GPR"
    assert fu["GPR"] <= 0.065
    assert max(fu, key=fu.get) == "LR2"


@pytest.mark.dataset
@pytest.mark.acceptance(9, "model uncertainty neighborhood")
def test_model_uncertainty_ordering(field_trees):
    mu = field_trees["model_u"]
    assert mu["d"] < mu["h"] < mu["h_cd"] < mu["cd"]
    for k, ref in PUBLISHED_MODEL_UNCERTAINTY.items():
        assert abs(mu[k] - ref) <= 0.05


@pytest.mark.dataset
@pytest.mark.acceptance(10, "stand-level neighborhood")
def test_stand_level(field_trees):
    path = _data_path("BIOMASS_UQ_STAND_CSV")
    with open(path, encoding="utf-8") as fh:
        trees = parse_inputs(fh.read(), _schema("BIOMASS_UQ_STAND_SCHEMA"))
    res = stand_results(field_trees["models"], trees)
    re = {k: abs(v.overall_re) for k, v in res.items()}
    assert re["GPR"] < re["LR"] < re["RF"]
    assert res["GPR"].pct_rmse <= 0.30


def test_protocol_smoke_on_synthetic():
    out = run_protocol(inventory(900, seed=21, plots=9))
    assert set(out["reports"]) == set(LABELS.values())
    for rep in out["reports"].values():
        assert rep.r2 <= 1 and rep.rmse_kg >= 0 and rep.n_total == 90
    assert all(v >= 0 for v in out["fitting"].values())
    trees = list(inventory(200, seed=22, plots=5))
    res = stand_results(out["models"], trees)
    assert all(np.isfinite(r.pct_rmse) for r in res.values())
