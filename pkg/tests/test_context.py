import numpy as np
import pytest

from labelreach import DataError, EmbeddingRaster, LabelRaster, NODATA
from labelreach import prep
from labelreach.prep import PixelDataset, SplitKind
from labelreach.models import ContextConfig, LogRegConfig, fit_context, fit_logreg, augment_tile
from labelreach.models.context import _featurize, context_features

from conftest import accuracy


class _ForcedRng:
    """Stand-in rng returning scripted uniform draws."""

    def __init__(self, draws):
        self.draws = list(draws)

    def random(self):
        return self.draws.pop(0)


class TestAugment:
    def tiles(self):
        emb = np.arange(8, dtype=np.float64).reshape(2, 2, 2)
        lab = np.array([[1, 2], [3, 4]], dtype=np.uint16)
        return emb, lab

    def test_identity_when_rng_forces_noops(self):
        emb, lab = self.tiles()
        e, l = augment_tile(emb, lab, _ForcedRng([0.9, 0.9, 0.9, 0.9]))
        assert np.array_equal(e, emb)
        assert np.array_equal(l, lab)

    def test_hflip_is_involution(self):
        emb, lab = self.tiles()
        e1, l1 = augment_tile(emb, lab, _ForcedRng([0.1, 0.9, 0.9, 0.9]))
        e2, l2 = augment_tile(e1, l1, _ForcedRng([0.1, 0.9, 0.9, 0.9]))
        assert np.array_equal(e2, emb)
        assert np.array_equal(l2, lab)

    def test_transpose_by_hand(self):
        emb, lab = self.tiles()
        _, l = augment_tile(emb, lab, _ForcedRng([0.9, 0.9, 0.9, 0.1]))
        assert l.tolist() == [[1, 3], [2, 4]]

    def test_same_transform_on_both(self):
        emb, lab = self.tiles()
        e, l = augment_tile(emb, lab, _ForcedRng([0.1, 0.1, 0.9, 0.9]))
        # (h-flip then v-flip) == 180 degree rotation for both tiles
        assert np.array_equal(l, lab[::-1, ::-1])
        assert np.array_equal(e, emb[:, ::-1, ::-1])

    def test_non_square_rotation_errors(self):
        emb = np.zeros((1, 2, 3))
        lab = np.zeros((2, 3), dtype=np.uint16)
        with pytest.raises(DataError, match="square"):
            augment_tile(emb, lab, _ForcedRng([0.9, 0.9, 0.1, 0.9]))

    def test_non_square_flip_is_fine(self):
        emb = np.zeros((1, 2, 3))
        lab = np.zeros((2, 3), dtype=np.uint16)
        augment_tile(emb, lab, _ForcedRng([0.1, 0.1, 0.9, 0.9]))

    def test_pixel_model_geometric_invariance(self, default_world, train_ds):
        model = fit_logreg(train_ds, LogRegConfig(max_iters=30))
        tile = default_world.embeddings.values[:, :64, :64].astype(np.float64)
        lab = default_world.labels.ids[:64, :64]
        aug_e, _ = augment_tile(tile, lab, _ForcedRng([0.1, 0.9, 0.1, 0.9]))
        p_orig = model.predict_proba(tile.reshape(8, -1).T).reshape(64, 64, 5)
        p_aug = model.predict_proba(aug_e.reshape(8, -1).T).reshape(64, 64, 5)
        # prediction of the augmented tile == augmentation of the prediction
        expected = np.rot90(p_orig[:, ::-1, :], axes=(0, 1))
        assert np.array_equal(p_aug, expected)


class TestContextFeatures:
    def test_window_one_duplicates_bands(self):
        rng = np.random.default_rng(0)
        tile = rng.normal(size=(3, 4, 4))
        feats = context_features(tile, window=1)
        assert feats.shape == (6, 4, 4)
        assert np.array_equal(feats[:3], tile)
        assert np.array_equal(feats[3:], tile)

    def test_small_tile_mean_is_global_mean(self):
        tile = np.arange(4, dtype=np.float64).reshape(1, 2, 2)
        feats = context_features(tile, window=3)
        assert np.allclose(feats[1], tile[0].mean())


class TestFitContext:
    def test_window_one_equals_logreg_on_same_pixels(self, default_world):
        grid = prep.make_tile_grid(128, 128, 64)
        split = prep.assign_splits(grid, (1.0, 0.0), 0)  # no val: runs all epochs
        epochs = 25
        ctx = fit_context(
            default_world.embeddings,
            default_world.labels,
            split,
            ContextConfig(window=1, augment=False, epochs=epochs, patience=epochs + 1),
        )
        x, y = _featurize(default_world.embeddings, default_world.labels, split, SplitKind.TRAIN, 1, None)
        ref = fit_logreg(
            PixelDataset(features=x, targets=y), LogRegConfig(max_iters=epochs, tol=0.0)
        )
        assert np.abs(ctx.core.weights - ref.weights).max() <= 1e-9
        assert np.abs(ctx.core.bias - ref.bias).max() <= 1e-9

    def test_constant_raster_predicts_priors(self):
        emb = EmbeddingRaster(np.zeros((2, 32, 32), dtype=np.float32))
        ids = np.zeros((32, 32), dtype=np.uint16)
        ids[:, 16:] = 1  # balanced two classes
        labels = LabelRaster(ids)
        grid = prep.make_tile_grid(32, 32, 16)
        split = prep.assign_splits(grid, (1.0, 0.0), 0)
        model = fit_context(emb, labels, split, ContextConfig(augment=False, epochs=80))
        p = model.predict_tile_proba(np.zeros((2, 16, 16)))
        assert np.allclose(p, 0.5, atol=1e-3)

    def test_context_at_least_as_good_as_logreg(self, noisy_world, noisy_split):
        # pinned paired run on the noisy world: smoothing can only help
        ds = prep.extract_pixels(noisy_world.embeddings, noisy_world.labels, noisy_split, SplitKind.TRAIN)
        dv = prep.extract_pixels(noisy_world.embeddings, noisy_world.labels, noisy_split, SplitKind.VAL)
        plain = fit_logreg(ds)
        acc_plain = accuracy(plain, dv)

        ctx = fit_context(noisy_world.embeddings, noisy_world.labels, noisy_split, ContextConfig(epochs=200))
        xv, yv = _featurize(noisy_world.embeddings, noisy_world.labels, noisy_split, SplitKind.VAL, 3, None)
        pred = np.argmax(ctx.core.predict_proba(xv), axis=1)
        acc_ctx = float((pred == yv).mean())
        assert acc_ctx >= acc_plain

    def test_early_stopping_caps_epochs(self, default_world, default_split):
        model = fit_context(
            default_world.embeddings,
            default_world.labels,
            default_split,
            ContextConfig(augment=False, epochs=50, patience=3),
        )
        assert len(model.training_history) <= 50
        assert len(model.validation_history) == len(model.training_history)

    def test_no_train_tiles_errors(self, default_world):
        grid = prep.make_tile_grid(128, 128, 64)
        split = prep.assign_splits(grid, (0.0, 1.0), 0)
        with pytest.raises(DataError, match="train"):
            fit_context(default_world.embeddings, default_world.labels, split, ContextConfig())

    def test_tile_band_mismatch_rejected(self, default_world, default_split):
        model = fit_context(
            default_world.embeddings,
            default_world.labels,
            default_split,
            ContextConfig(augment=False, epochs=3),
        )
        with pytest.raises(DataError, match="bands"):
            model.predict_tile_proba(np.zeros((3, 8, 8)))
