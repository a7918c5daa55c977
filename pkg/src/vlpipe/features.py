"""Frame sampling and per-frame feature extraction.

A video is reduced to T frames at a fixed sampling rate (default one frame
every two seconds), and each sampled frame is turned into 256 spatial patch
vectors plus one global summary vector by a pluggable encoder.  Real
deployments would plug a frozen pre-trained vision backbone (224x224 input,
feature width 1024); tests use the deterministic mock encoder below, whose
feature width is a constructor parameter.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import ContractViolation

N_PATCHES = 256


@dataclass
class VideoSource:
    """A decoded video: frame count, native frame rate, optional frame buffers.

    Frame buffers are height x width x channel uint8 arrays; decoding codecs
    are the caller's problem.
    """

    frame_count: int
    native_fps: float
    frames: list[np.ndarray] | None = None

    def __post_init__(self):
        if self.frame_count < 1:
            raise ValueError(f"frame_count must be >= 1, got {self.frame_count}")
        if self.native_fps <= 0:
            raise ValueError(f"native_fps must be > 0, got {self.native_fps}")
        if self.frames is not None and len(self.frames) != self.frame_count:
            raise ValueError(
                f"frames length {len(self.frames)} != frame_count {self.frame_count}"
            )


@dataclass
class FrameFeatures:
    """One frame's features: a global cls vector and a 256 x D patch matrix."""

    cls: np.ndarray
    patches: np.ndarray

    def __post_init__(self):
        self.cls = np.asarray(self.cls, dtype=np.float64)
        self.patches = np.asarray(self.patches, dtype=np.float64)
        if self.patches.ndim != 2 or self.patches.shape[0] != N_PATCHES:
            raise ValueError(f"patches must be {N_PATCHES} x D, got {self.patches.shape}")
        if self.cls.shape != (self.patches.shape[1],):
            raise ValueError(
                f"cls shape {self.cls.shape} does not match patch width {self.patches.shape[1]}"
            )
        if not (np.isfinite(self.cls).all() and np.isfinite(self.patches).all()):
            raise ValueError("frame features must be finite")

    @property
    def dim(self) -> int:
        return self.patches.shape[1]


@dataclass
class VideoFeatures:
    """Ordered per-frame features for the T sampled frames, shared width D."""

    frames: list[FrameFeatures]

    def __post_init__(self):
        if not self.frames:
            raise ValueError("VideoFeatures needs at least one frame")
        dims = {f.dim for f in self.frames}
        if len(dims) != 1:
            raise ValueError(f"frames disagree on feature width: {sorted(dims)}")

    @property
    def t(self) -> int:
        return len(self.frames)

    @property
    def dim(self) -> int:
        return self.frames[0].dim

    def patch_stack(self) -> np.ndarray:
        """(T, 256, D) stack of patch matrices."""
        return np.stack([f.patches for f in self.frames])

    def cls_stack(self) -> np.ndarray:
        """(T, D) stack of cls vectors in frame order."""
        return np.stack([f.cls for f in self.frames])


class Encoder(Protocol):
    """Contract for frame encoders: declared width, (cls, patches) per buffer."""

    @property
    def dim(self) -> int: ...

    def encode(self, frame: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


def sample_frame_indices(
    frame_count: int, native_fps: float, target_fps: float = 0.5
) -> list[int]:
    """Frame indices sampled at target_fps, anchored at frame 0.

    Walks timestamps k / target_fps and maps each to the nearest frame
    (half-up) until the index falls outside the video; at least one index is
    always returned, and duplicates from coarse native rates are dropped.
    """
    if frame_count < 1:
        raise ValueError(f"frame_count must be >= 1, got {frame_count}")
    if native_fps <= 0 or target_fps <= 0:
        raise ValueError("native_fps and target_fps must be > 0")
    indices = []
    k = 0
    while True:
        idx = int(np.floor(k / target_fps * native_fps + 0.5))
        if idx >= frame_count:
            break
        if not indices or idx > indices[-1]:
            indices.append(idx)
        k += 1
    return indices


def encode_frames(source: VideoSource, indices: list[int], encoder: Encoder) -> VideoFeatures:
    """Encode the selected frames, in index order, via the pluggable encoder.

    Raises ContractViolation if the encoder emits shapes other than a
    (dim,) cls vector and a (256, dim) patch matrix.
    """
    if source.frames is None:
        raise ValueError("source has no frame buffers to encode")
    if not indices:
        raise ValueError("indices must be non-empty")
    out = []
    for idx in indices:
        if not 0 <= idx < source.frame_count:
            raise ValueError(f"frame index {idx} out of range [0, {source.frame_count})")
        cls, patches = encoder.encode(source.frames[idx])
        cls = np.asarray(cls, dtype=np.float64)
        patches = np.asarray(patches, dtype=np.float64)
        if patches.shape != (N_PATCHES, encoder.dim) or cls.shape != (encoder.dim,):
            raise ContractViolation(
                f"encoder declared dim {encoder.dim} but returned cls {cls.shape}, "
                f"patches {patches.shape}"
            )
        out.append(FrameFeatures(cls=cls, patches=patches))
    return VideoFeatures(frames=out)


def mock_encode(frame: np.ndarray, dim: int, seed: int) -> FrameFeatures:
    """Deterministic stand-in for a frozen vision backbone.

    Features are a pure function of (frame bytes, dim, seed): the buffer is
    hashed together with the seed and the digest drives a PCG64 stream of
    uniform values in [-1, 1].  Identical inputs give bit-identical outputs.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    frame = np.ascontiguousarray(frame)
    raw = frame.tobytes()
    if len(raw) == 0:
        raise ValueError("frame buffer is empty")
    h = hashlib.blake2b(digest_size=8)
    h.update(str(frame.shape).encode())
    h.update(raw)
    h.update(int(seed).to_bytes(8, "little", signed=True))
    h.update(int(dim).to_bytes(4, "little"))
    rng = np.random.default_rng(int.from_bytes(h.digest(), "little"))
    values = rng.uniform(-1.0, 1.0, size=(N_PATCHES + 1, dim))
    return FrameFeatures(cls=values[0], patches=values[1:])


@dataclass
class MockEncoder:
    """Encoder-interface wrapper around mock_encode."""

    feature_dim: int
    seed: int = 0

    @property
    def dim(self) -> int:
        return self.feature_dim

    def encode(self, frame: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        f = mock_encode(frame, self.feature_dim, self.seed)
        return f.cls, f.patches
