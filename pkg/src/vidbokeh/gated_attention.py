"""Small numeric reference for blur-conditioned token attention.

Query tokens are shifted by an embedding of the blur strength K, then
attend over projected visual tokens (a global summary token followed by
one token per scene layer).  A boolean mask chooses which layer tokens
are admissible; the global token always is.  The attended update enters
through a tanh gate so a zero gate leaves the queries untouched.

Everything is plain numpy at float64: this module exists to pin down
the arithmetic (shapes, masking, gating) at desk scale, not to train.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .core_model import DataError


@dataclass(frozen=True)
class LinearMap:
    """Dense affine map x -> x @ weight + bias."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[1]:
            raise DataError("linear map needs weight (in, out) and bias (out,)")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise DataError("linear map parameters must be finite")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.weight + self.bias


@dataclass(frozen=True)
class GateParams:
    """Gate scalar, the two projection maps, and the embedding width."""

    gamma: float
    phi_m: LinearMap
    phi_a: LinearMap
    n_freq: int = 8

    def __post_init__(self):
        if not np.isfinite(self.gamma):
            raise DataError("gamma must be finite")
        if self.n_freq < 1:
            raise DataError("n_freq must be >= 1")
        if self.phi_m.in_dim != 2 * self.n_freq + 1:
            raise DataError(
                f"phi_m expects input dim {2 * self.n_freq + 1}, got {self.phi_m.in_dim}"
            )
        if self.phi_m.out_dim != self.phi_a.out_dim:
            raise DataError("phi_m and phi_a must project to the same dimension")


@dataclass(frozen=True)
class AttentionMask:
    """Admissibility of [global token, layer tokens]; index 0 is global."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=bool)
        if v.ndim != 1 or v.shape[0] < 1:
            raise DataError("mask must be a non-empty boolean vector")
        if not v[0]:
            raise DataError("the global token must always be admissible")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def fourier_embed(K: float, n_freq: int) -> np.ndarray:
    """Sin/cos features of K at octave frequencies plus the raw value.

    Layout: [sin(pi K), cos(pi K), sin(2 pi K), cos(2 pi K), ..., K],
    with n_freq sin/cos pairs, so the output has 2 * n_freq + 1 entries.
    """
    if n_freq < 1:
        raise DataError("n_freq must be >= 1")
    K = float(K)
    out = np.empty(2 * n_freq + 1, dtype=np.float64)
    for k in range(n_freq):
        angle = (2.0**k) * np.pi * K
        out[2 * k] = np.sin(angle)
        out[2 * k + 1] = np.cos(angle)
    out[-1] = K
    return out


def layer_token_mask(mask, layer_index: int, grid_shape, threshold: float = 0.5) -> AttentionMask:
    """Admissibility vector for the tokens of one scene layer.

    The layer's boolean raster is bilinearly resized to the visual token
    grid (grid_shape = (rows, cols)); a token is admissible when at
    least ``threshold`` of its footprint lies inside the layer.  The
    global token is prepended, always admissible, so the result has
    1 + rows * cols entries and pairs with a V_A of the same height.
    """
    layers = mask.layers if hasattr(mask, "layers") else np.asarray(mask)
    if not 0 <= layer_index < layers.shape[0]:
        raise DataError(f"layer index {layer_index} outside [0, {layers.shape[0]})")
    rows, cols = grid_shape
    if rows < 1 or cols < 1:
        raise DataError("token grid must be at least 1x1")
    raster = layers[layer_index].astype(np.float32)
    coverage = cv2.resize(raster, (cols, rows), interpolation=cv2.INTER_LINEAR)
    tokens = coverage.reshape(-1) >= threshold
    return AttentionMask(np.concatenate([[True], tokens]))


def _check_tokens(name: str, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] < 1:
        raise DataError(f"{name} must be a non-empty (tokens, features) matrix")
    if not np.all(np.isfinite(t)):
        raise DataError(f"{name} contains non-finite values")
    return t


def _tokens_and_weights(
    Q: np.ndarray,
    V_A: np.ndarray,
    K: float,
    mask: AttentionMask,
    params: GateParams,
):
    """Validate inputs, assemble the token sequence, run the masked softmax."""
    Q = _check_tokens("Q", Q)
    V_A = _check_tokens("V_A", V_A)
    if Q.shape[1] != params.phi_m.out_dim:
        raise DataError(f"Q feature dim {Q.shape[1]} != projection dim {params.phi_m.out_dim}")
    if V_A.shape[1] != params.phi_a.in_dim:
        raise DataError(f"V_A feature dim {V_A.shape[1]} != phi_a input {params.phi_a.in_dim}")
    if mask.values.shape[0] != V_A.shape[0]:
        raise DataError(
            f"mask length {mask.values.shape[0]} != visual token count {V_A.shape[0]}"
        )
    n_q, dim = Q.shape
    shifted = Q + params.phi_m(fourier_embed(K, params.n_freq))
    tokens = np.concatenate([shifted, params.phi_a(V_A)], axis=0)

    scores = tokens @ tokens.T / np.sqrt(dim)
    admissible = np.concatenate([np.zeros(n_q, dtype=bool), mask.values])
    scores[:, ~admissible] = -np.inf
    scores -= scores.max(axis=1, keepdims=True)
    weights = np.exp(scores)
    weights /= weights.sum(axis=1, keepdims=True)
    return Q, tokens, weights, n_q


def attention_weights(
    Q: np.ndarray,
    V_A: np.ndarray,
    K: float,
    mask: AttentionMask,
    params: GateParams,
) -> np.ndarray:
    """Softmax attention matrix, one row per token in [queries; visuals].

    Inadmissible keys (every query column, plus masked visual tokens)
    carry exactly zero weight; each row sums to 1.  Exposed so callers
    can inspect where the attended update comes from.
    """
    _, _, weights, _ = _tokens_and_weights(Q, V_A, K, mask, params)
    return weights


def mpi_attention(
    Q: np.ndarray,
    V_A: np.ndarray,
    K: float,
    mask: AttentionMask,
    params: GateParams,
) -> np.ndarray:
    """Gated cross-attention update of query tokens.

    The token sequence [Q + phi_m(embed(K)); phi_a(V_A)] self-attends
    with scaled dot products, but only the projected visual tokens are
    admissible keys, and of those only the ones the mask admits (the
    global token, row 0 of V_A, always is).  The first |Q| output rows
    are kept and added back through the tanh(gamma) gate:

        out = Q + tanh(gamma) * attended[:len(Q)]

    gamma = 0 returns Q exactly.
    """
    if params.gamma == 0.0:
        Q, _, _, _ = _tokens_and_weights(Q, V_A, K, mask, params)
        return Q.copy()
    Q, tokens, weights, n_q = _tokens_and_weights(Q, V_A, K, mask, params)
    attended = weights @ tokens
    return Q + np.tanh(params.gamma) * attended[:n_q]
