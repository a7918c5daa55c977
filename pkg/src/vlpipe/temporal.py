"""Temporal aggregation: collapse T frames of 256 patch tokens into one set.

Three structures, all mapping (T, 256, D) patch stacks to a (256, D)
aggregate:

  v1  elementwise mean over frames.
  v2  learned per-(patch, frame) importance scores from a shared linear
      layer, normalized with a softmax over frames, then a weighted sum.
      Zero-initialized parameters make v2 coincide with v1.
  v3  each patch index is treated as a T-step sequence, pushed through one
      pre-norm transformer encoder layer with sinusoidal positions; the
      output at the last position is added to the v1 mean.

Forward passes are pure; backward passes return exact derivatives of
<upstream, output> and are validated against central finite differences in
the test suite.  Parameters are immutable values: updates build new ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError
from .features import N_PATCHES, VideoFeatures
from .nn import (
    EncoderLayerParams,
    encoder_layer_backward,
    encoder_layer_forward,
    init_encoder_layer,
    sinusoidal_table,
    softmax,
)

VARIANTS = ("v1", "v2", "v3")


@dataclass
class AggregatedPatches:
    """The 256 time-aggregated patch vectors."""

    patches: np.ndarray

    def __post_init__(self):
        self.patches = np.asarray(self.patches, dtype=np.float64)
        if self.patches.ndim != 2 or self.patches.shape[0] != N_PATCHES:
            raise ValueError(f"expected {N_PATCHES} x D, got {self.patches.shape}")
        if not np.isfinite(self.patches).all():
            raise ValueError("aggregated patches must be finite")

    @property
    def dim(self) -> int:
        return self.patches.shape[1]


@dataclass
class TemporalParamsV1:
    """v1 has no parameters."""

    def to_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {}


@dataclass
class TemporalParamsV2:
    """Shared linear scoring layer: one weight vector and bias."""

    score_weights: np.ndarray
    score_bias: float

    def __post_init__(self):
        self.score_weights = np.asarray(self.score_weights, dtype=np.float64)
        if self.score_weights.ndim != 1:
            raise ValueError("score_weights must be a vector")

    @property
    def dim(self) -> int:
        return self.score_weights.shape[0]

    def to_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {
            prefix + "score_weights": self.score_weights,
            prefix + "score_bias": np.array([self.score_bias], dtype=np.float64),
        }

    @classmethod
    def from_arrays(cls, arrays, prefix: str = "") -> "TemporalParamsV2":
        return cls(
            score_weights=arrays[prefix + "score_weights"],
            score_bias=float(arrays[prefix + "score_bias"][0]),
        )


@dataclass
class TemporalParamsV3:
    """One encoder layer plus a fixed sinusoidal positional table (max_T x D).

    The positional table is a non-trainable buffer: it receives no gradient
    and is excluded from optimizer updates.
    """

    layer: EncoderLayerParams
    pos: np.ndarray

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=np.float64)
        if self.pos.ndim != 2 or self.pos.shape[1] != self.layer.dim:
            raise ValueError(f"positional table must be max_T x {self.layer.dim}")

    @property
    def dim(self) -> int:
        return self.layer.dim

    @property
    def max_t(self) -> int:
        return self.pos.shape[0]

    def to_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = self.layer.to_arrays(prefix)
        out[prefix + "pos"] = self.pos
        return out

    @classmethod
    def from_arrays(cls, arrays, prefix: str = "") -> "TemporalParamsV3":
        return cls(layer=EncoderLayerParams.from_arrays(arrays, prefix), pos=arrays[prefix + "pos"])

    def trainable_names(self) -> list[str]:
        return [name for name in self.layer.to_arrays()]


def init_temporal_params(variant: str, dim: int, max_t: int = 64, seed: int = 0):
    """Build parameters for a variant.

    v1: empty.  v2: zeros, so v2 equals v1 at initialization.  v3: seeded
    uniform(-1/sqrt(D), 1/sqrt(D)) matrices, zero biases, unit layer norms,
    sinusoidal positions.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if variant == "v1":
        return TemporalParamsV1()
    if variant == "v2":
        return TemporalParamsV2(score_weights=np.zeros(dim), score_bias=0.0)
    if variant == "v3":
        if max_t < 1:
            raise ValueError(f"max_t must be >= 1, got {max_t}")
        rng = np.random.default_rng(seed)
        return TemporalParamsV3(
            layer=init_encoder_layer(dim, rng),
            pos=sinusoidal_table(max_t, dim),
        )
    raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")


def aggregate_v1(features: VideoFeatures) -> AggregatedPatches:
    """Elementwise mean of each patch index across frames."""
    stack = features.patch_stack()
    return AggregatedPatches(patches=stack.mean(axis=0))


def _v2_weights(stack: np.ndarray, params: TemporalParamsV2) -> np.ndarray:
    # scores: (T, 256) one scalar per (frame, patch index)
    scores = stack @ params.score_weights + params.score_bias
    return softmax(scores, axis=0)


def aggregate_v2(features: VideoFeatures, params: TemporalParamsV2) -> AggregatedPatches:
    """Softmax-weighted mean over frames, weights from the shared linear layer.

    Per patch index i the frame scores are w . V_t^i + b; the softmax over
    frames yields a convex combination, so each output row lies in the
    convex hull of that patch's per-frame vectors.
    """
    if params.dim != features.dim:
        raise ValueError(f"params dim {params.dim} != features dim {features.dim}")
    stack = features.patch_stack()
    weights = _v2_weights(stack, params)
    out = np.einsum("ti,tid->id", weights, stack)
    return AggregatedPatches(patches=out)


def aggregate_v3(features: VideoFeatures, params: TemporalParamsV3) -> AggregatedPatches:
    """Transformer-encoded last-position feature plus the v1 mean."""
    if params.dim != features.dim:
        raise ValueError(f"params dim {params.dim} != features dim {features.dim}")
    if features.t > params.max_t:
        raise CapacityError(
            f"T={features.t} exceeds positional table capacity {params.max_t}"
        )
    stack = features.patch_stack()
    x = stack.transpose(1, 0, 2) + params.pos[: features.t]  # (256, T, D)
    encoded, _ = encoder_layer_forward(x, params.layer)
    out = encoded[:, -1, :] + stack.mean(axis=0)
    return AggregatedPatches(patches=out)


def aggregate(variant: str, features: VideoFeatures, params) -> AggregatedPatches:
    if variant == "v1":
        return aggregate_v1(features)
    if variant == "v2":
        return aggregate_v2(features, params)
    if variant == "v3":
        return aggregate_v3(features, params)
    raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")


def temporal_backward(
    variant: str, features: VideoFeatures, params, upstream: np.ndarray
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Gradients of <upstream, aggregate(variant, features, params)>.

    Returns (param_grads, input_grads) where param_grads keys mirror the
    variant's to_arrays() trainable names and input_grads is (T, 256, D),
    one slice per input frame's patches.
    """
    upstream = np.asarray(upstream, dtype=np.float64)
    stack = features.patch_stack()
    t = features.t
    if upstream.shape != (N_PATCHES, features.dim):
        raise ValueError(
            f"upstream must be {N_PATCHES} x {features.dim}, got {upstream.shape}"
        )

    if variant == "v1":
        dstack = np.broadcast_to(upstream / t, stack.shape).copy()
        return {}, dstack

    if variant == "v2":
        if params.dim != features.dim:
            raise ValueError(f"params dim {params.dim} != features dim {features.dim}")
        weights = _v2_weights(stack, params)  # (T, 256)
        # dL/d weight_ti = upstream_i . V_t^i, then softmax backward over t
        g = np.einsum("id,tid->ti", upstream, stack)
        dscores = weights * (g - np.sum(g * weights, axis=0, keepdims=True))
        dw = np.einsum("ti,tid->d", dscores, stack)
        db = dscores.sum()
        dstack = weights[:, :, None] * upstream[None, :, :] + dscores[:, :, None] * params.score_weights
        grads = {"score_weights": dw, "score_bias": np.array([db])}
        return grads, dstack

    if variant == "v3":
        if params.dim != features.dim:
            raise ValueError(f"params dim {params.dim} != features dim {features.dim}")
        if t > params.max_t:
            raise CapacityError(f"T={t} exceeds positional table capacity {params.max_t}")
        x = stack.transpose(1, 0, 2) + params.pos[:t]
        _, cache = encoder_layer_forward(x, params.layer)
        dz = np.zeros_like(x)
        dz[:, -1, :] = upstream
        dx, layer_grads = encoder_layer_backward(dz, cache)
        dstack = dx.transpose(1, 0, 2) + upstream[None, :, :] / t
        return layer_grads, dstack

    raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
