"""Single-hidden-layer extreme learning machine primitives.

An ELM fixes a random hidden-layer mapping and learns only the output
weights, in closed form. This module provides the activation, the random
orthonormal feature mapping, the two ridge-regression closed forms (primal
for more samples than hidden units, dual otherwise), the orthogonal
Procrustes solver used when input and layer widths coincide, and the
two-stage ELM fit built from them.

Conventions: feature matrices are (d, s) with one sample per column.
Solver design matrices are (samples, features) with one sample per row, so
the fitted weights satisfy ``psi(x_j) @ B ~= t_j`` row-wise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy.special import expit

from .errors import NumericError

SIGMOID = "sigmoid"

_ACTIVATIONS = {SIGMOID: expit}


def activate(kind: str, u):
    """Apply the activation named by kind elementwise to a scalar or array.

    The sigmoid saturates gracefully for large |u| instead of overflowing.
    """
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    return fn(u)


@dataclass(frozen=True, eq=False)
class HiddenLayerParams:
    """Fixed feature mapping of one hidden layer.

    W has shape (n_h, d) with the weight vector of hidden unit i as row i;
    b has shape (n_h,). When n_h <= d the rows of W are orthonormal; when
    n_h > d only the first d rows are orthonormal and the remainder are
    unit norm.
    """

    W: np.ndarray
    b: np.ndarray
    activation: str = SIGMOID

    def __post_init__(self):
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValueError(
                f"inconsistent mapping shapes W={self.W.shape}, b={self.b.shape}"
            )

    @property
    def n_hidden(self) -> int:
        return self.W.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]


def random_orthonormal_mapping(d: int, n_h: int, seed) -> HiddenLayerParams:
    """Draw the hidden mapping for input dimension d with n_h units.

    Entries are sampled iid uniform on [-1, 1]; weight rows are then
    orthonormalized by QR so the mapping projects onto a random subspace.
    Biases stay as sampled. The weights and bias of unit i are drawn
    together, so for a fixed seed a smaller mapping agrees with the prefix
    of a larger one (exactly for the raw draws, to rounding after
    orthonormalization). Deterministic for a fixed (d, n_h, seed).
    """
    if d < 1 or n_h < 1:
        raise ValueError(f"d and n_h must be >= 1, got d={d}, n_h={n_h}")
    rng = np.random.default_rng(seed)
    draw = rng.uniform(-1.0, 1.0, size=(n_h, d + 1))
    raw, b = draw[:, :d], np.ascontiguousarray(draw[:, d])
    k = min(n_h, d)
    Q, _ = np.linalg.qr(raw[:k].T)
    W = np.empty((n_h, d))
    W[:k] = Q.T
    if n_h > d:
        # No room for more orthonormal rows; keep the extras at unit norm.
        extra = raw[d:]
        W[d:] = extra / np.linalg.norm(extra, axis=1, keepdims=True)
    return HiddenLayerParams(W=W, b=b)


def hidden_response(params: HiddenLayerParams, X: np.ndarray) -> np.ndarray:
    """Hidden-layer response H with H[i, j] = g(w_i . x_j + b_i).

    X is (d, s); the result is (n_h, s).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != params.input_dim:
        raise ValueError(
            f"feature matrix of shape {X.shape} incompatible with mapping "
            f"expecting input dimension {params.input_dim}"
        )
    return activate(params.activation, params.W @ X + params.b[:, None])


def _checked_ridge_inputs(H, T, C) -> tuple[np.ndarray, np.ndarray]:
    H = np.asarray(H, dtype=float)
    T = np.asarray(T, dtype=float)
    if H.ndim != 2 or T.ndim != 2:
        raise ValueError(f"expected 2-d H and T, got {H.shape} and {T.shape}")
    if H.shape[0] != T.shape[0]:
        raise ValueError(
            f"H has {H.shape[0]} sample rows but T has {T.shape[0]}"
        )
    if not (np.isscalar(C) and np.isfinite(C) and C > 0):
        raise ValueError(f"tradeoff C must be a positive finite scalar, got {C!r}")
    if not np.isfinite(H).all() or not np.isfinite(T).all():
        raise ValueError("ridge solve rejects non-finite inputs")
    return H, T


def _solve_spd(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve A x = rhs for symmetric positive definite A.

    Cholesky first; a pivoted LU factorization covers the case where
    rounding pushes a barely-definite matrix past Cholesky.
    """
    try:
        c, low = scipy.linalg.cho_factor(A, check_finite=False)
        return scipy.linalg.cho_solve((c, low), rhs, check_finite=False)
    except np.linalg.LinAlgError:
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
        return scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)


def _checked_result(B: np.ndarray) -> np.ndarray:
    if not np.isfinite(B).all():
        raise NumericError("ridge solve produced non-finite output weights")
    return B


def solve_ridge_overdetermined(H: np.ndarray, T: np.ndarray, C: float) -> np.ndarray:
    """Output weights solving (HtH + I/C) B = HtT.

    Intended for N >= n_h. The regularized Gram matrix is solved directly;
    it is never inverted explicitly.
    """
    H, T = _checked_ridge_inputs(H, T, C)
    gram = H.T @ H
    gram[np.diag_indices_from(gram)] += 1.0 / C
    return _checked_result(_solve_spd(gram, H.T @ T))


def solve_ridge_underdetermined(H: np.ndarray, T: np.ndarray, C: float) -> np.ndarray:
    """Output weights B = Ht (HHt + I/C)^-1 T for the N < n_h regime.

    Solving the small N x N system and left-multiplying by Ht keeps B in
    the row space of H (the minimum-norm family).
    """
    H, T = _checked_ridge_inputs(H, T, C)
    gram = H @ H.T
    gram[np.diag_indices_from(gram)] += 1.0 / C
    return _checked_result(H.T @ _solve_spd(gram, T))


def solve_ridge(H: np.ndarray, T: np.ndarray, C: float) -> np.ndarray:
    """Ridge output weights, dispatching on the sample/feature ratio."""
    H = np.asarray(H, dtype=float)
    if H.ndim == 2 and H.shape[0] >= H.shape[1]:
        return solve_ridge_overdetermined(H, T, C)
    return solve_ridge_underdetermined(H, T, C)


class ProcrustesResult(NamedTuple):
    """Orthogonal output weights plus rank diagnostics.

    degenerate is True when the smallest singular value of HtT falls below
    1e-12, in which case the optimum is well-defined but not unique.
    """

    B: np.ndarray
    min_singular_value: float
    degenerate: bool


def solve_orthogonal_procrustes(H: np.ndarray, T: np.ndarray) -> ProcrustesResult:
    """Orthogonal B minimizing ||H B - T||_F.

    Computed from the SVD of M = HtT as B = U Vt; requires H and T to have
    the same column count so B is square.
    """
    H = np.asarray(H, dtype=float)
    T = np.asarray(T, dtype=float)
    if H.ndim != 2 or T.ndim != 2 or H.shape[0] != T.shape[0]:
        raise ValueError(f"incompatible sample rows: H {H.shape}, T {T.shape}")
    if H.shape[1] != T.shape[1]:
        raise ValueError(
            f"orthogonal solve needs equal column counts, got {H.shape[1]} and {T.shape[1]}"
        )
    if not np.isfinite(H).all() or not np.isfinite(T).all():
        raise ValueError("orthogonal solve rejects non-finite inputs")
    U, s, Vt = np.linalg.svd(H.T @ T)
    smin = float(s[-1]) if s.size else 0.0
    return ProcrustesResult(B=U @ Vt, min_singular_value=smin, degenerate=smin < 1e-12)


def train_elm(
    X: np.ndarray, T: np.ndarray, n_h: int, C: float, seed
) -> tuple[HiddenLayerParams, np.ndarray]:
    """Two-stage ELM fit: random feature mapping, then a linear solve.

    X is (d, s) and T is (q, s), one sample per column in both. Returns the
    mapping and the (n_h, q) output weights.
    """
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    if T.ndim == 1:
        T = T[None, :]
    if X.ndim != 2 or X.shape[1] != T.shape[1]:
        raise ValueError(
            f"X and T must share a sample count, got {X.shape} and {T.shape}"
        )
    params = random_orthonormal_mapping(X.shape[0], n_h, seed)
    design = hidden_response(params, X).T
    return params, solve_ridge(design, T.T, C)


def elm_predict(
    params: HiddenLayerParams, B: np.ndarray, X: np.ndarray
) -> np.ndarray:
    """Feed-forward predictions, one row per sample: row j = psi(x_j) @ B."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != params.n_hidden:
        raise ValueError(
            f"output weights of shape {B.shape} incompatible with {params.n_hidden} hidden units"
        )
    return hidden_response(params, X).T @ B
