import json

import numpy as np
import pytest

from ctradiomics.errors import UnsupportedModel, UnsupportedShapeFeature
from ctradiomics.explain import (
    feature_map,
    linear_shap,
    linear_shap_values,
    read_pgm,
    shap_summary,
    tree_expected_value,
    tree_shap,
    tree_shap_single,
)
from ctradiomics.features.firstorder import first_order
from ctradiomics.features.table import FeatureTable
from ctradiomics.imaging import RoiMask, Volume3D
from ctradiomics.models import ModelSpec, Tree, train

from . import oracles


def table(X, y):
    X = np.asarray(X, dtype=float)
    return FeatureTable([f"r{i:03d}" for i in range(len(X))], [f"k{j}" for j in range(X.shape[1])],
                        X, np.asarray(y))


def leaf(v, cover=1.0):
    return Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]),
                np.array([v]), np.array([cover]))


def stump():
    # split feature 1 at 0, leaves 0 / 1, cover 50 / 50
    return Tree(np.array([1, -1, -1]), np.array([0.0, 0, 0]), np.array([1, -1, -1]),
                np.array([2, -1, -1]), np.array([0.0, 0.0, 1.0]), np.array([100.0, 50, 50]))


# ---------------------------------------------------------------- tree SHAP


def test_constant_tree():
    t = leaf(0.7, 10)
    assert np.all(tree_shap_single(t, np.zeros(3), 3) == 0) and tree_expected_value(t) == 0.7


def test_stump_hand_case():
    t = stump()
    phi = tree_shap_single(t, np.array([0.0, 1.0, 0.0]), 3)
    assert tree_expected_value(t) == 0.5
    assert np.allclose(phi, [0, 0.5, 0], atol=1e-15)


@pytest.mark.parametrize("seed", range(40))
def test_tree_shap_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, 5))
    d = oracles.random_tree_dict(rng, p, 3)
    t = Tree.from_json(d)
    x = rng.normal(size=p)
    phi = tree_shap_single(t, x, p)
    assert np.allclose(phi, oracles.brute_shapley(d, x, p), atol=1e-9, rtol=0)
    assert abs(tree_expected_value(t) + phi.sum() - t.predict(x[None])[0]) <= 1e-9


def test_tree_shap_repeated_feature_on_path():
    d = {"feature": [0, 0, -1, -1, -1], "threshold": [0.0, -1.0, 0, 0, 0],
         "left": [1, 3, -1, -1, -1], "right": [2, 4, -1, -1, -1],
         "value": [0, 0, 0.9, 0.1, 0.4], "cover": [10.0, 6, 4, 2, 4]}
    x = np.array([-0.5, 3.0])
    phi = tree_shap_single(Tree.from_json(d), x, 2)
    assert np.allclose(phi, oracles.brute_shapley(d, x, 2), atol=1e-12)


def test_symmetric_tree_symmetric_phi():
    # AND(x0 > 0, x1 > 0) with uniform covers: both features play identical roles
    d = {"feature": [0, -1, 1, -1, -1], "threshold": [0.0, 0, 0.0, 0, 0],
         "left": [1, -1, 3, -1, -1], "right": [2, -1, 4, -1, -1],
         "value": [0, 0.0, 0, 0.0, 1.0], "cover": [4.0, 2, 2, 1, 1]}
    phi = tree_shap_single(Tree.from_json(d), np.array([1.0, 1.0]), 2)
    assert phi[0] == pytest.approx(phi[1], abs=1e-15)
    assert phi[0] == pytest.approx(0.375, abs=1e-15)


def test_forest_local_accuracy_and_dummy():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 5))
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    X[:, 4] = 1.0  # constant column: never split on
    m = train(ModelSpec("random_forest", {"seed": 2, "n_trees": 20}), table(X, y))
    for x in rng.normal(size=(20, 5)):
        sv = tree_shap(m, x)
        assert abs(sv.total - m.scores(x)[0]) <= 1e-9
        assert sv.phi[4] == 0.0


def test_decision_tree_local_accuracy():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 3))
    y = (X[:, 2] > 0.3).astype(int) ^ (X[:, 0] > 0).astype(int)
    m = train(ModelSpec("decision_tree"), table(X, y))
    for x in X:
        assert abs(tree_shap(m, x).total - m.scores(x)[0]) <= 1e-9


def test_tree_shap_rejects_linear():
    m = train(ModelSpec("logreg"), table([[0.0], [1.0]], [0, 1]))
    with pytest.raises(UnsupportedModel):
        tree_shap(m, [0.5])


# -------------------------------------------------------------- linear SHAP


def test_linear_hand_case():
    base, phi = linear_shap_values([2.0, 0.0], 0.0, [1.0, 5.0], [0.0, 0.0])
    assert phi.tolist() == [2.0, 0.0] and base == 0.0
    _, phi = linear_shap_values([2.0, 0.0], 0.0, [0.0, 0.0], [0.0, 0.0])
    assert np.all(phi == 0)
    _, phi2 = linear_shap_values([4.0, 0.0], 0.0, [1.0, 5.0], [0.0, 0.0])
    assert phi2.tolist() == [4.0, 0.0]


def test_linear_local_accuracy_on_margin():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 4))
    y = (X[:, 0] > 0).astype(int)
    for kind in ("logreg", "linear_svm"):
        m = train(ModelSpec(kind, {"seed": 0} if kind == "linear_svm" else {}), table(X, y))
        for x in X[:10]:
            sv = linear_shap(m, x)
            margin = m.margin_matrix(m.standardise(x[None]))[0]
            assert sv.scale == "margin" and abs(sv.total - margin) <= 1e-12


def test_linear_shap_rejects_trees():
    m = train(ModelSpec("decision_tree"), table([[0.0], [1.0]], [0, 1]))
    with pytest.raises(UnsupportedModel):
        linear_shap(m, [0.5])


# ------------------------------------------------------------------ summary


def test_summary_constant_model_canonical_order():
    m = train(ModelSpec("random_forest", {"seed": 0, "n_trees": 2}),
              table(np.zeros((4, 3)) + [[0, 0, 0]], [0, 1, 0, 1]))
    s = shap_summary(m, np.zeros((3, 3)))
    assert np.all(s.mean_abs == 0) and s.ranking == ["k0", "k1", "k2"]


def test_summary_stump_and_permutation_invariance(tmp_path):
    X = np.array([[0.0, -1, 0], [0, 1, 0], [1, -1, 1], [1, 1, 1]])
    m = train(ModelSpec("decision_tree"), table(X, [0, 1, 0, 1]))
    s = shap_summary(m, X, ids=list("abcd"))
    assert s.ranking[0] == "k1" and s.mean_abs[1] > 0
    assert s.mean_abs[0] == 0 and s.mean_abs[2] == 0
    perm = [3, 1, 0, 2]
    assert shap_summary(m, X[perm]).ranking == s.ranking
    scores = m.scores(X)
    totals = s.base_value + s.phi.sum(axis=1)
    assert abs(totals.mean() - scores.mean()) <= 1e-12
    files = s.write(tmp_path)
    assert (tmp_path / "shap_values.csv").read_text().count("\n") == 1 + 4 * 3
    assert all(f.exists() for f in files)


# ------------------------------------------------------------- feature maps


def test_feature_map_constant_roi():
    vol = Volume3D(np.full((6, 6, 3), 40.0))
    mask = np.zeros((6, 6, 3), bool)
    mask[1:5, 1:5, :] = True
    fm = feature_map(vol, RoiMask(mask), "original_firstorder_Mean", 1)
    assert fm.degenerate and np.all(fm.image[mask] == 128) and np.all(fm.image[~mask] == 0)


def test_feature_map_two_textures():
    rng = np.random.default_rng(7)
    data = np.full((16, 8, 4), 100.0)
    data[8:] += rng.normal(0, 40, size=(8, 8, 4))
    data[:8] += rng.normal(0, 1, size=(8, 8, 4))
    fm = feature_map(Volume3D(data), RoiMask(np.ones_like(data, bool)),
                     "original_firstorder_Range", 1)
    assert fm.values[10:].mean() > fm.values[:6].mean()


def test_feature_map_locality():
    data = np.zeros((12, 12, 12))
    data[2:10, 2:10, 2:10] = 50.0
    mask = data > 0
    fm = feature_map(Volume3D(data), RoiMask(mask), "original_firstorder_Mean", 2)
    glob = first_order(data, mask)["Mean"]
    assert fm.values[5, 5, 5] == glob == 50.0


def test_feature_map_translation_invariant():
    rng = np.random.default_rng(9)
    data = rng.normal(100, 20, size=(7, 7, 4))
    mask = np.zeros(data.shape, bool)
    mask[2:5, 1:6, 1:3] = True
    a = feature_map(Volume3D(data), RoiMask(mask), "original_glcm_Contrast", 1)
    shifted = np.zeros((10, 9, 6))
    shifted[2:9, 1:8, 1:5] = data
    smask = np.zeros(shifted.shape, bool)
    smask[2:9, 1:8, 1:5] = mask
    b = feature_map(Volume3D(shifted), RoiMask(smask), "original_glcm_Contrast", 1)
    assert np.array_equal(a.values[mask], b.values[smask])


def test_feature_map_isolated_voxel_and_shape_rejected():
    data = np.arange(27.0).reshape(3, 3, 3)
    mask = np.zeros((3, 3, 3), bool)
    mask[1, 1, 1] = True
    fm = feature_map(Volume3D(data), RoiMask(mask), "original_ngtdm_Coarseness", 1)
    assert np.isfinite(fm.values[1, 1, 1])
    with pytest.raises(UnsupportedShapeFeature):
        feature_map(Volume3D(data), RoiMask(mask), "original_shape_Sphericity")


def test_feature_map_pgm_output(tmp_path):
    rng = np.random.default_rng(1)
    data = rng.normal(size=(5, 4, 3))
    mask = np.ones(data.shape, bool)
    mask[:, :, 2] = False
    fm = feature_map(Volume3D(data), RoiMask(mask), "original_firstorder_Variance", 1)
    files = fm.write(tmp_path)
    side = json.loads((tmp_path / "original_firstorder_Variance.json").read_text())
    assert side["slices"] == [0, 1] and len(files) == 3
    img = read_pgm(files[0])
    assert img.shape == (4, 5) and np.array_equal(img, fm.image[:, :, 0].T)
    assert img.max() == 255 or fm.image.max() == 255
