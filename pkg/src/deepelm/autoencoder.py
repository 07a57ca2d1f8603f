"""Deep ELM auto-encoders: layer-wise training and reconstruction.

A deep model is an ordered stack of h+1 weight matrices whose dimensions
close back on the input space. Each of the h hidden layers is trained as
an ELM auto-encoder on the current representation (targets equal inputs)
and the learned output weights become that layer's forward weights. When a
layer's width equals its input dimension the data stays in the same space,
so the output weights come from the orthogonal Procrustes solution instead
of ridge regression. The final matrix decodes the last hidden
representation back to input space; it is fitted against logit-transformed
inputs so that the sigmoid applied after it reproduces the data.

Reconstruction applies the activation after every layer, including the
last, so outputs always land in (0, 1)^d. Training data must therefore be
normalized into [0, 1] first (see deepelm.normalize).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logit

from .elm import (
    SIGMOID,
    HiddenLayerParams,
    activate,
    hidden_response,
    random_orthonormal_mapping,
    solve_orthogonal_procrustes,
    solve_ridge,
)
from .normalize import DEFAULT_EPSILON, NormalizationStats


@dataclass(frozen=True)
class LayerSpec:
    """Width, ridge tradeoff and seed for one auto-encoder layer."""

    width: int
    C: float
    seed: int = 0

    def __post_init__(self):
        if self.width < 1:
            raise ValueError(f"layer width must be >= 1, got {self.width}")
        if not (np.isfinite(self.C) and self.C > 0):
            raise ValueError(f"layer C must be positive and finite, got {self.C}")


@dataclass(eq=False)
class DELMModel:
    """Trained deep ELM auto-encoder.

    weights[i] maps dims[i]-dimensional column vectors to dims[i+1], and
    dims[0] == dims[-1] == the feature dimension. feature_stats records the
    normalization applied to the training data so probes can be mapped into
    the same range; it may be None for data trained in [0, 1] directly.
    """

    weights: list[np.ndarray]
    dims: tuple[int, ...]
    activation: str = SIGMOID
    feature_stats: NormalizationStats | None = None

    def __post_init__(self):
        self.dims = tuple(int(v) for v in self.dims)
        # canonical C layout keeps reconstruction bitwise stable across a
        # save/load round trip (BLAS rounding depends on memory order)
        self.weights = [np.ascontiguousarray(W, dtype=float) for W in self.weights]
        if len(self.weights) != len(self.dims) - 1 or not self.weights:
            raise ValueError(
                f"{len(self.weights)} weight matrices inconsistent with dims {self.dims}"
            )
        if self.dims[0] != self.dims[-1]:
            raise ValueError(f"model must close on its input space, dims {self.dims}")
        for i, W in enumerate(self.weights):
            expect = (self.dims[i + 1], self.dims[i])
            if W.shape != expect:
                raise ValueError(f"weights[{i}] has shape {W.shape}, expected {expect}")
            if not np.isfinite(W).all():
                raise ValueError(f"weights[{i}] contains non-finite entries")

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def hidden_depth(self) -> int:
        return len(self.weights) - 1


def train_ae_layer(
    X_in: np.ndarray, spec: LayerSpec, init: HiddenLayerParams | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Train one auto-encoder layer on the (d_in, s) representation X_in.

    The pre-solve feature mapping is random orthonormal, or `init` when
    given (fixed weights, no bias). The output weights that project the
    mapped responses back onto X_in are solved in closed form and reused,
    in column-operator form, as the layer's forward weights W of shape
    (spec.width, d_in). Returns (W, g(W @ X_in)).
    """
    X_in = np.asarray(X_in, dtype=float)
    if X_in.ndim != 2:
        raise ValueError(f"expected (d, s) input, got shape {X_in.shape}")
    d_in = X_in.shape[0]
    if init is None:
        mapping = random_orthonormal_mapping(d_in, spec.width, spec.seed)
    else:
        if init.W.shape != (spec.width, d_in):
            raise ValueError(
                f"init mapping shape {init.W.shape} does not match layer ({spec.width}, {d_in})"
            )
        mapping = init
    H = hidden_response(mapping, X_in)
    design, targets = H.T, X_in.T
    if spec.width == d_in:
        # Same-dimension layer: the data stays in one space, so impose
        # orthogonality on the solved weights.
        W = solve_orthogonal_procrustes(design, targets).B
    else:
        W = solve_ridge(design, targets, spec.C)
    return W, activate(mapping.activation, W @ X_in)


def train_delm(
    X: np.ndarray,
    specs: list[LayerSpec],
    final_C: float,
    init: DELMModel | None = None,
    feature_stats: NormalizationStats | None = None,
) -> DELMModel:
    """Train a deep auto-encoder with one layer per spec plus a decode layer.

    X is (d, s) with entries in [0, 1]. Layers are trained sequentially,
    each on the forward representation of the previous one. When `init` is
    given, its layer weights replace the random mappings (with zero bias)
    and every layer's output weights are re-solved on X; architecture and
    feature stats are inherited from it. The final weight matrix is a ridge
    fit of logit-clamped X from the last hidden representation, so the
    closing sigmoid reproduces the inputs. specs may be empty, giving the
    degenerate single-matrix model.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.size == 0:
        raise ValueError(f"expected a non-empty (d, s) matrix, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("training features contain non-finite entries")
    if X.min() < 0.0 or X.max() > 1.0:
        raise ValueError(
            "training features must lie in [0, 1]; normalize them first "
            "(see deepelm.normalize.normalize_features)"
        )
    if not (np.isfinite(final_C) and final_C > 0):
        raise ValueError(f"final_C must be positive and finite, got {final_C}")
    d = X.shape[0]
    widths = [spec.width for spec in specs]
    if init is not None:
        if init.dims != tuple([d, *widths, d]):
            raise ValueError(
                f"init model dims {init.dims} do not match requested {[d, *widths, d]}"
            )
        if feature_stats is None:
            feature_stats = init.feature_stats

    weights: list[np.ndarray] = []
    H = X
    for i, spec in enumerate(specs):
        layer_init = None
        if init is not None:
            layer_init = HiddenLayerParams(
                W=init.weights[i],
                b=np.zeros(spec.width),
                activation=init.activation,
            )
        W, H = train_ae_layer(H, spec, init=layer_init)
        weights.append(W)

    # Decode layer: fit the logit of the inputs from the last representation
    # so that the outer sigmoid lands back on X.
    eps = feature_stats.epsilon if feature_stats is not None else DEFAULT_EPSILON
    targets = logit(np.clip(X, eps, 1.0 - eps))
    B_final = solve_ridge(H.T, targets.T, final_C)
    weights.append(B_final.T)

    return DELMModel(
        weights=weights,
        dims=tuple([d, *widths, d]),
        activation=SIGMOID,
        feature_stats=feature_stats,
    )


def reconstruct(model: DELMModel, x: np.ndarray) -> np.ndarray:
    """Pass x through the full stack: g(W_last ... g(W_1 x)).

    Accepts a (d,) vector or a (d, s) matrix; the output matches the input
    shape with every entry in (0, 1).
    """
    H = np.asarray(x, dtype=float)
    vec = H.ndim == 1
    if vec:
        H = H[:, None]
    if H.ndim != 2 or H.shape[0] != model.input_dim:
        raise ValueError(
            f"input of shape {np.shape(x)} incompatible with model dimension {model.input_dim}"
        )
    for W in model.weights:
        H = activate(model.activation, W @ H)
    return H[:, 0] if vec else H


def reconstruction_error(model: DELMModel, x: np.ndarray):
    """Squared Euclidean distance between x and its reconstruction.

    Returns a scalar for a (d,) vector or a (s,) array for a (d, s) matrix.
    """
    x = np.asarray(x, dtype=float)
    diff = x - reconstruct(model, x)
    if diff.ndim == 1:
        return float(np.dot(diff, diff))
    return np.einsum("ij,ij->j", diff, diff)
