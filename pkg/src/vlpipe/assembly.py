"""Video token assembly and projection into the language embedding space.

The unified token sequence stacks the 256 aggregated patch vectors on top
of the T per-frame global (cls) vectors, giving 256 + T rows; a single
trainable affine map then carries every row into the decoder's embedding
width.  Global tokens ride along so that per-frame summary information
survives the temporal aggregation of the patch grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import N_PATCHES, VideoFeatures
from .temporal import AggregatedPatches


@dataclass
class VideoTokenSequence:
    """(256 + T) x D token matrix: aggregated patches then per-frame cls rows."""

    tokens: np.ndarray
    t: int

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.float64)
        if self.tokens.ndim != 2 or self.tokens.shape[0] != N_PATCHES + self.t:
            raise ValueError(
                f"tokens must have {N_PATCHES} + {self.t} rows, got {self.tokens.shape}"
            )

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]


@dataclass
class ProjectionParams:
    """Affine map D -> D_llm shared by patch and cls rows."""

    matrix: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ValueError("matrix must be 2-D")
        if self.bias.shape != (self.matrix.shape[1],):
            raise ValueError(
                f"bias shape {self.bias.shape} != output width {self.matrix.shape[1]}"
            )
        if not (np.isfinite(self.matrix).all() and np.isfinite(self.bias).all()):
            raise ValueError("projection params must be finite")

    @property
    def dim_in(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim_out(self) -> int:
        return self.matrix.shape[1]

    def to_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {prefix + "matrix": self.matrix, prefix + "bias": self.bias}

    @classmethod
    def from_arrays(cls, arrays, prefix: str = "") -> "ProjectionParams":
        return cls(matrix=arrays[prefix + "matrix"], bias=arrays[prefix + "bias"])


def init_projection(dim_in: int, dim_out: int, seed: int = 0) -> ProjectionParams:
    """Seeded uniform(-1/sqrt(D), 1/sqrt(D)) matrix, zero bias."""
    if dim_in < 1 or dim_out < 1:
        raise ValueError("dims must be positive")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(dim_in)
    return ProjectionParams(
        matrix=rng.uniform(-bound, bound, size=(dim_in, dim_out)),
        bias=np.zeros(dim_out),
    )


def assemble_video_tokens(
    aggregated: AggregatedPatches, features: VideoFeatures
) -> VideoTokenSequence:
    """Stack aggregated patch rows (in patch order) over cls rows (in frame order)."""
    if aggregated.dim != features.dim:
        raise ValueError(
            f"aggregated dim {aggregated.dim} != features dim {features.dim}"
        )
    tokens = np.vstack([aggregated.patches, features.cls_stack()])
    return VideoTokenSequence(tokens=tokens, t=features.t)


def project_tokens(sequence: VideoTokenSequence, params: ProjectionParams) -> np.ndarray:
    """Row-wise affine map; row count is preserved."""
    if sequence.dim != params.dim_in:
        raise ValueError(f"sequence dim {sequence.dim} != params input dim {params.dim_in}")
    return sequence.tokens @ params.matrix + params.bias


def projection_backward(
    sequence: VideoTokenSequence, params: ProjectionParams, upstream: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of <upstream, project_tokens(sequence, params)>.

    Returns (d_matrix, d_bias, d_input) with d_input shaped like the token
    matrix.
    """
    upstream = np.asarray(upstream, dtype=np.float64)
    if sequence.dim != params.dim_in:
        raise ValueError(f"sequence dim {sequence.dim} != params input dim {params.dim_in}")
    if upstream.shape != (sequence.tokens.shape[0], params.dim_out):
        raise ValueError(
            f"upstream must be {sequence.tokens.shape[0]} x {params.dim_out}, "
            f"got {upstream.shape}"
        )
    d_matrix = sequence.tokens.T @ upstream
    d_bias = upstream.sum(axis=0)
    d_input = upstream @ params.matrix.T
    return d_matrix, d_bias, d_input
