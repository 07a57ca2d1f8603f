"""Image-set classification with per-class deep reconstruction models.

Training learns one global auto-encoder over the whole gallery, then one
model per class that keeps the global weights as its fixed feature
mappings and re-solves every layer's output weights on that class's
samples alone. A probe sample is assigned to the class whose model
reconstructs it with the smallest squared error; a probe set takes the
majority vote of its samples' labels.

Tie rules (both deterministic): a per-sample error tie goes to the label
that sorts first; a vote tie goes to the tied label with the smallest
summed reconstruction error over its voting samples, then to sort order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autoencoder import DELMModel, LayerSpec, reconstruction_error, train_delm
from .datasets import Gallery, ImageSet, concat_features
from .elm import SIGMOID
from .errors import ConfigError, DataError
from .normalize import NormalizationStats, apply_stats


@dataclass(frozen=True)
class TrainConfig:
    """Architecture and solver settings shared by every model of a run.

    layer_C has one entry per hidden layer plus one for the final decode
    layer; entries for same-width (Procrustes) layers are ignored.
    """

    hidden_layers: int = 2
    layer_widths: tuple[int, ...] = (20, 20)
    layer_C: tuple[float, ...] = (1e6, 1e6, 1e18)
    seed: int = 0
    activation: str = SIGMOID

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(self.layer_widths))
        object.__setattr__(self, "layer_C", tuple(self.layer_C))
        if self.hidden_layers < 1:
            raise ConfigError(f"hidden_layers must be >= 1, got {self.hidden_layers}")
        if len(self.layer_widths) != self.hidden_layers:
            raise ConfigError(
                f"expected {self.hidden_layers} layer widths, got {len(self.layer_widths)}"
            )
        if len(self.layer_C) != self.hidden_layers + 1:
            raise ConfigError(
                f"expected {self.hidden_layers + 1} C values (one per hidden layer "
                f"plus the final layer), got {len(self.layer_C)}"
            )
        if any(w < 1 for w in self.layer_widths):
            raise ConfigError(f"layer widths must be >= 1, got {self.layer_widths}")
        if any(not (np.isfinite(C) and C > 0) for C in self.layer_C):
            raise ConfigError(f"C values must be positive and finite, got {self.layer_C}")
        if self.activation != SIGMOID:
            raise ConfigError(f"unsupported activation {self.activation!r}")

    def layer_specs(self) -> list[LayerSpec]:
        return [
            LayerSpec(width=w, C=self.layer_C[i], seed=self.seed + i)
            for i, w in enumerate(self.layer_widths)
        ]

    @property
    def final_C(self) -> float:
        return self.layer_C[-1]


@dataclass(eq=False)
class ClassModels:
    """Global model plus one reconstruction model per gallery class."""

    global_model: DELMModel
    per_class: dict[str, DELMModel]
    config: TrainConfig

    def __post_init__(self):
        if not self.per_class:
            raise ValueError("per_class models missing")

    @property
    def class_labels(self) -> tuple[str, ...]:
        return tuple(sorted(self.per_class))

    @property
    def feature_dim(self) -> int:
        return self.global_model.input_dim

    @property
    def feature_stats(self) -> NormalizationStats | None:
        return self.global_model.feature_stats


@dataclass(eq=False)
class SetPrediction:
    """Outcome of classifying one probe set.

    per_sample_errors is (s_t, c) with one column per class label in sorted
    order; per_sample_labels[i] is the argmin of row i and set_label is the
    vote winner.
    """

    set_label: str
    per_sample_labels: tuple[str, ...]
    per_sample_errors: np.ndarray
    vote_counts: dict[str, int]


def train_global(
    gallery: Gallery,
    config: TrainConfig,
    feature_stats: NormalizationStats | None = None,
) -> DELMModel:
    """Train the unsupervised global model on all gallery columns.

    Columns are concatenated in canonical (set_id, sample index) order so
    set iteration order cannot perturb the result. The gallery must already
    be normalized into [0, 1]; pass the stats used so they travel with the
    model.
    """
    X = concat_features(gallery.sets)
    return train_delm(
        X,
        config.layer_specs(),
        final_C=config.final_C,
        feature_stats=feature_stats,
    )


def train_class_specific(
    global_model: DELMModel, class_set: ImageSet, config: TrainConfig
) -> DELMModel:
    """Refit every layer's output weights on one class, keeping the global
    layer weights as the fixed feature mappings."""
    return train_delm(
        class_set.features,
        config.layer_specs(),
        final_C=config.final_C,
        init=global_model,
    )


def train_all(
    gallery: Gallery,
    config: TrainConfig,
    feature_stats: NormalizationStats | None = None,
) -> ClassModels:
    """Train the global model, then one independent model per class."""
    labels = gallery.classes
    if len(labels) < 2:
        raise DataError(
            f"classification needs at least 2 classes, gallery has {len(labels)}"
        )
    global_model = train_global(gallery, config, feature_stats=feature_stats)
    per_class = {}
    for label in labels:
        members = [s for s in gallery.sets if s.label == label]
        merged = ImageSet(concat_features(members), label, set_id=label)
        per_class[label] = train_class_specific(global_model, merged, config)
    return ClassModels(global_model=global_model, per_class=per_class, config=config)


def _probe_matrix(models: ClassModels, X: np.ndarray) -> np.ndarray:
    """Map raw probe features into the training range of the models."""
    stats = models.feature_stats
    return X if stats is None else apply_stats(X, stats)


def classify_sample(x: np.ndarray, models: ClassModels) -> tuple[str, np.ndarray]:
    """Label one raw feature vector by minimum reconstruction error.

    Returns (label, errors) with one error per class in sorted label order;
    ties go to the first label in that order.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != models.feature_dim:
        raise ValueError(
            f"probe of shape {x.shape} incompatible with model dimension {models.feature_dim}"
        )
    labels = models.class_labels
    xn = _probe_matrix(models, x)
    errors = np.array(
        [reconstruction_error(models.per_class[lab], xn) for lab in labels]
    )
    return labels[int(np.argmin(errors))], errors


def classify_set(probe: ImageSet, models: ClassModels) -> SetPrediction:
    """Label a probe set by majority vote over its per-sample labels."""
    X = probe.features
    if X.shape[0] != models.feature_dim:
        raise ValueError(
            f"probe set '{probe.set_id}' has dimension {X.shape[0]}, "
            f"models expect {models.feature_dim}"
        )
    labels = models.class_labels
    Xn = _probe_matrix(models, X)
    errors = np.column_stack(
        [reconstruction_error(models.per_class[lab], Xn) for lab in labels]
    )
    winner_idx = errors.argmin(axis=1)
    per_sample_labels = tuple(labels[i] for i in winner_idx)
    counts = {lab: int(np.sum(winner_idx == j)) for j, lab in enumerate(labels)}
    top = max(counts.values())
    tied = [j for j, lab in enumerate(labels) if counts[lab] == top]
    if len(tied) > 1:
        # Break vote ties by the evidence: smallest total error over the
        # samples that voted for the label, then sort order.
        tied.sort(key=lambda j: (errors[winner_idx == j, j].sum(), j))
    return SetPrediction(
        set_label=labels[tied[0]],
        per_sample_labels=per_sample_labels,
        per_sample_errors=errors,
        vote_counts=counts,
    )
