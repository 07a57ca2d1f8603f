import numpy as np
import pytest

from deepelm import SynthParams, TrainConfig, normalize_gallery, synth_generate, train_all


def make_blob_gallery(classes=3, sets_per_class=2, samples_per_set=12, dim=12,
                      sigma=0.02, seed=0):
    return synth_generate(
        SynthParams(
            classes=classes,
            sets_per_class=sets_per_class,
            samples_per_set=samples_per_set,
            feature_dim=dim,
            manifold="blob",
            noise_sigma=sigma,
            seed=seed,
        )
    )


def small_config(seed=0, widths=(8, 8)):
    h = len(widths)
    return TrainConfig(
        hidden_layers=h,
        layer_widths=widths,
        layer_C=tuple([1e6] * h + [1e18]),
        seed=seed,
    )


@pytest.fixture(scope="session")
def trained_blob():
    """A small separable gallery with trained models, shared read-only."""
    gallery = make_blob_gallery(classes=3, sets_per_class=3, samples_per_set=10,
                                dim=12, sigma=0.02, seed=4)
    norm, stats = normalize_gallery(gallery)
    models = train_all(norm, small_config(seed=4), feature_stats=stats)
    return gallery, models
