import math

import numpy as np
import pytest

from biomass_uq.data_model import Dataset, TreeRecord
from biomass_uq.errors import EmptyDataset, InputError, MissingField, NonpositiveInput
from biomass_uq.forest import (
    ForestConfig,
    ForestModel,
    Tree,
    fit_forest,
    fit_forest_arrays,
    predict_forest,
)


def noisy(n=120, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 4, n)
    return x, 1.5 * x + rng.normal(0, 0.4, n)


def test_constant_targets():
    x, _ = noisy()
    m = fit_forest_arrays(x, np.full(x.size, 3.3), ForestConfig(n_trees=5))
    for t in m.trees:
        assert t.n_nodes == 1
        np.testing.assert_allclose(t.value, 3.3, rtol=1e-15)


def test_depth_one_split():
    m = fit_forest_arrays([1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 10.0, 10.0],
                          ForestConfig(n_trees=1, max_depth=1, min_leaf=1, bootstrap=False))
    t = m.trees[0]
    assert t.feature[0] == 0 and t.threshold[0] == 2.5
    assert t.value[t.left[0]] == 0.0 and t.value[t.right[0]] == 10.0


def test_seed_determinism():
    x, z = noisy()
    grid = np.linspace(-0.5, 4.5, 101)[:, None]
    a = fit_forest_arrays(x, z, ForestConfig(n_trees=20, seed=4)).predict_log(grid)
    b = fit_forest_arrays(x, z, ForestConfig(n_trees=20, seed=4)).predict_log(grid)
    c = fit_forest_arrays(x, z, ForestConfig(n_trees=20, seed=5)).predict_log(grid)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_stump_is_global_mean():
    x, z = noisy(20)
    m = fit_forest_arrays(x, z, ForestConfig(n_trees=1, min_leaf=11, bootstrap=False))
    assert m.trees[0].n_nodes == 1
    out = predict_forest(m, h=[1.0, 50.0])
    np.testing.assert_allclose(out, math.exp(z.mean()), rtol=1e-14)


def test_identical_trees_average_to_one():
    x, z = noisy()
    one = fit_forest_arrays(x, z, ForestConfig(n_trees=1, bootstrap=False)).trees[0]
    many = ForestModel((one,) * 7, ForestConfig(n_trees=7))
    q = np.exp(np.linspace(0, 4, 33))
    np.testing.assert_allclose(predict_forest(many, h=q), np.exp(one.predict_log(np.log(q)[:, None])),
                               rtol=1e-14)


def test_hand_built_leaves():
    m = ForestModel((Tree.leaf(1.0), Tree.leaf(3.0)), ForestConfig(n_trees=2))
    assert predict_forest(m, h=[12.0])[0] == pytest.approx(math.exp(2.0), rel=1e-15)


def test_predictions_within_training_range():
    x, z = noisy(seed=3)
    m = fit_forest_arrays(x, z, ForestConfig(n_trees=30, min_leaf=1))
    p = m.predict_log(np.linspace(-10, 10, 500)[:, None])
    assert p.min() >= z.min() - 1e-12 and p.max() <= z.max() + 1e-12


def test_leaf_size_and_depth_invariants():
    x, z = noisy(200, seed=6)
    cfg = ForestConfig(n_trees=10, max_depth=4, min_leaf=7)
    for t in fit_forest_arrays(x, z, cfg).trees:
        assert t.depth() <= 4
        assert np.all(t.n_samples[t.feature == -1] >= 7)


def test_record_order_irrelevant():
    rng = np.random.default_rng(9)
    recs = [TreeRecord(height_m=float(h), biomass_kg=float(b), diameter_cm=10.0)
            for h, b in zip(rng.uniform(2, 40, 80), rng.uniform(3, 900, 80))]
    cfg = ForestConfig(n_trees=15, seed=2)
    a = fit_forest(Dataset(tuple(recs)), cfg)
    shuffled = [recs[i] for i in rng.permutation(80)]
    b = fit_forest(Dataset(tuple(shuffled)), cfg)
    q = np.linspace(1, 45, 60)
    np.testing.assert_array_equal(predict_forest(a, h=q), predict_forest(b, h=q))


@pytest.mark.slow
def test_large_ensemble_beats_single_tree():
    wins = 0
    trials = 10
    for s in range(trials):
        rng = np.random.default_rng(1000 + s)
        x = np.sort(rng.uniform(0, 3, 60))
        z = np.exp(x) + x  # noiseless, monotone
        big = fit_forest_arrays(x, z, ForestConfig(n_trees=500, seed=s))
        single = fit_forest_arrays(x, z, ForestConfig(n_trees=1, seed=s))
        q = x[:, None]
        wins += np.mean((big.predict_log(q) - z) ** 2) <= np.mean((single.predict_log(q) - z) ** 2)
    assert wins >= 0.9 * trials


def test_multi_feature_records():
    recs = tuple(TreeRecord(height_m=float(h), biomass_kg=float(h * cd), crown_diameter_m=float(cd))
                 for h, cd in zip(np.linspace(3, 30, 40), np.tile([1.0, 4.0], 20)))
    m = fit_forest(Dataset(recs), ForestConfig(n_trees=5, features=("h", "cd"), min_leaf=2))
    assert predict_forest(m, recs).shape == (40,)
    with pytest.raises(MissingField):
        fit_forest(Dataset(recs), ForestConfig(features=("d",)))


def test_errors():
    with pytest.raises(EmptyDataset):
        fit_forest(Dataset())
    with pytest.raises(InputError):
        ForestConfig(n_trees=0)
    with pytest.raises(InputError):
        ForestConfig(features=("x",))
    m = ForestModel((Tree.leaf(1.0),), ForestConfig(n_trees=1))
    with pytest.raises(NonpositiveInput):
        predict_forest(m, h=[0.0])
