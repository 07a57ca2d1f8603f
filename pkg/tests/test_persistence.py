import numpy as np
import pytest

from conftest import make_blob_gallery, small_config
from deepelm import (
    DataError,
    load_model,
    load_models,
    normalize_gallery,
    save_model,
    save_models,
    train_all,
    train_delm,
)
from deepelm.autoencoder import LayerSpec


def models_equal(a, b):
    assert a.dims == b.dims
    assert a.activation == b.activation
    for Wa, Wb in zip(a.weights, b.weights):
        assert Wa.tobytes() == Wb.tobytes()
    if a.feature_stats is None:
        assert b.feature_stats is None
    else:
        assert b.feature_stats is not None
        assert a.feature_stats.lo.tobytes() == b.feature_stats.lo.tobytes()
        assert a.feature_stats.hi.tobytes() == b.feature_stats.hi.tobytes()
        assert a.feature_stats.epsilon == b.feature_stats.epsilon
        assert a.feature_stats.per_dimension == b.feature_stats.per_dimension


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    gallery = make_blob_gallery(classes=3, sets_per_class=2, samples_per_set=6,
                                dim=9, seed=31)
    norm, stats = normalize_gallery(gallery)
    models = train_all(norm, small_config(seed=31, widths=(4, 4)), feature_stats=stats)
    path = tmp_path_factory.mktemp("models") / "bundle.delm"
    save_models(path, models)
    return models, path


class TestModelContainer:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        X = 0.5 + 0.3 * (rng.random(size=(7, 20)) - 0.5)
        model = train_delm(X, [LayerSpec(4, 1e6, seed=1)], final_C=1e12)
        path = tmp_path / "m.delm"
        save_model(path, model)
        models_equal(model, load_model(path))

    def test_round_trip_with_stats(self, tmp_path):
        from deepelm import compute_stats, apply_stats

        rng = np.random.default_rng(2)
        raw = rng.normal(size=(5, 15)) * 4
        stats = compute_stats(raw)
        X = apply_stats(raw, stats)
        model = train_delm(X, [LayerSpec(3, 1e6, seed=2)], final_C=1e12,
                           feature_stats=stats)
        path = tmp_path / "m.delm"
        save_model(path, model)
        models_equal(model, load_model(path))

    def test_resave_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(3)
        X = 0.5 + 0.2 * (rng.random(size=(6, 12)) - 0.5)
        model = train_delm(X, [LayerSpec(3, 1e6, seed=3)], final_C=1e10)
        a, b = tmp_path / "a.delm", tmp_path / "b.delm"
        save_model(a, model)
        save_model(b, load_model(a))
        assert a.read_bytes() == b.read_bytes()

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_model(tmp_path / "nope.delm")


class TestBundleContainer:
    def test_round_trip(self, bundle):
        models, path = bundle
        back = load_models(path)
        assert back.class_labels == models.class_labels
        assert back.config == models.config
        models_equal(models.global_model, back.global_model)
        for lab in models.class_labels:
            models_equal(models.per_class[lab], back.per_class[lab])

    def test_truncation_detected(self, bundle, tmp_path):
        _, path = bundle
        clipped = tmp_path / "clipped.delm"
        raw = path.read_bytes()
        clipped.write_bytes(raw[: len(raw) - 37])
        with pytest.raises(DataError, match="checksum|truncated"):
            load_models(clipped)

    def test_bitflip_detected(self, bundle, tmp_path):
        _, path = bundle
        bad = tmp_path / "bad.delm"
        raw = bytearray(path.read_bytes())
        raw[len(raw) // 2] ^= 0x1
        bad.write_bytes(bytes(raw))
        with pytest.raises(DataError, match="checksum"):
            load_models(bad)

    def test_future_version_rejected(self, bundle, tmp_path):
        import struct

        from deepelm.fileio import seal, unseal

        _, path = bundle
        payload = bytearray(unseal(path.read_bytes(), str(path)))
        payload[4:8] = struct.pack("<I", 42)
        bad = tmp_path / "future.delm"
        bad.write_bytes(seal(bytes(payload)))
        with pytest.raises(DataError, match="unsupported bundle format version 42"):
            load_models(bad)

    def test_wrong_magic_rejected(self, bundle, tmp_path):
        from deepelm.fileio import seal, unseal

        _, path = bundle
        payload = bytearray(unseal(path.read_bytes(), str(path)))
        payload[0:4] = b"WHAT"
        bad = tmp_path / "magic.delm"
        bad.write_bytes(seal(bytes(payload)))
        with pytest.raises(DataError, match="magic"):
            load_models(bad)
