import numpy as np
import pytest

from labelreach import DataError
from labelreach.prep import PixelDataset
from labelreach.models import LogRegConfig, fit_logreg, logreg_loss_and_grad
from labelreach.models.logreg import LogRegModel, _loss_only

from conftest import accuracy


def separable_1d(n_per_class=50):
    x = np.concatenate([np.full(n_per_class, -1.0), np.full(n_per_class, 1.0)])[:, None]
    y = np.concatenate([np.zeros(n_per_class, dtype=np.int64), np.ones(n_per_class, dtype=np.int64)])
    return PixelDataset(features=x, targets=y)


def test_zero_weights_balanced_loss_is_ln2():
    ds = separable_1d()
    model = LogRegModel(weights=np.zeros((2, 1)), bias=np.zeros(2))
    loss, _ = logreg_loss_and_grad(model, ds, l2=0.0)
    assert loss == pytest.approx(np.log(2), abs=1e-12)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    for trial in range(5):
        d, c = 4, 3
        x = rng.normal(size=(5, d))
        y = rng.integers(0, c, size=5)
        if np.unique(y).size < 2:
            continue
        ds = PixelDataset(features=x, targets=y)
        model = LogRegModel(weights=rng.normal(size=(c, d)), bias=rng.normal(size=c))
        _, (gw, gb) = logreg_loss_and_grad(model, ds, l2=0.01)
        h = 1e-5
        for arr, grad in ((model.weights, gw), (model.bias, gb)):
            num = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            while not it.finished:
                i = it.multi_index
                orig = arr[i]
                arr[i] = orig + h
                up = _loss_only(model.weights, model.bias, x, y, 0.01)
                arr[i] = orig - h
                dn = _loss_only(model.weights, model.bias, x, y, 0.01)
                arr[i] = orig
                num[i] = (up - dn) / (2 * h)
                it.iternext()
            rel = np.abs(grad - num) / np.maximum(np.abs(num), 1e-10)
            assert rel.max() < 1e-4


def test_confident_correct_model_loss_vanishes():
    x = np.array([[1.0]])
    y = np.array([1])
    ds = PixelDataset(features=x, targets=y)
    losses = []
    for margin in (1.0, 10.0, 100.0):
        model = LogRegModel(weights=np.array([[-margin], [margin]]), bias=np.zeros(2))
        loss, _ = logreg_loss_and_grad(model, ds, l2=0.0)
        losses.append(loss)
    assert losses[0] > losses[1] > losses[2]
    assert losses[2] < 1e-12


def test_separable_reaches_full_accuracy():
    ds = separable_1d()
    model = fit_logreg(ds, LogRegConfig())
    assert accuracy(model, ds) == 1.0


def test_zero_iterations_gives_uniform():
    ds = separable_1d()
    model = fit_logreg(ds, LogRegConfig(max_iters=0))
    p = model.predict_proba(np.array([[0.3], [-2.0]]))
    assert np.allclose(p, 0.5)


def test_history_non_increasing(train_ds):
    model = fit_logreg(train_ds, LogRegConfig(max_iters=60))
    h = model.training_history
    assert len(h) >= 2
    assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))


def test_single_class_rejected():
    ds = PixelDataset(features=np.zeros((4, 2)), targets=np.zeros(4, dtype=np.int64))
    with pytest.raises(DataError, match="single class"):
        fit_logreg(ds)


def test_dimension_mismatch_rejected():
    ds = separable_1d()
    model = LogRegModel(weights=np.zeros((2, 3)), bias=np.zeros(2))
    with pytest.raises(DataError, match="feature dim"):
        logreg_loss_and_grad(model, ds, 0.0)


def test_simplex_property(train_ds, val_ds):
    model = fit_logreg(train_ds, LogRegConfig(max_iters=40))
    p = model.predict_proba(val_ds.features[:256])
    assert (p >= 0).all()
    assert np.abs(p.sum(axis=1) - 1.0).max() <= 1e-6


def test_row_shuffle_changes_little(train_ds):
    rng = np.random.default_rng(0)
    perm = rng.permutation(len(train_ds))
    shuffled = PixelDataset(
        features=train_ds.features[perm],
        targets=train_ds.targets[perm],
        provenance=train_ds.provenance[perm],
    )
    a = fit_logreg(train_ds, LogRegConfig(max_iters=30))
    b = fit_logreg(shuffled, LogRegConfig(max_iters=30))
    assert np.abs(a.weights - b.weights).max() < 1e-9
