"""Shared numerical layers: layer norm, single-head attention, feed-forward.

Every forward pass returns a cache consumed by the matching backward pass,
which computes exact analytic derivatives of a scalar objective given the
upstream gradient.  All math runs in float64.  Sequence inputs are shaped
(B, T, D): B independent sequences of T positions with D features.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.special import erf

LN_EPS = 1e-5

_SQRT2 = float(np.sqrt(2.0))
_INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))


def sinusoidal_table(max_t: int, dim: int) -> np.ndarray:
    """Fixed sin/cos positional table of shape (max_t, dim); not trainable."""
    if max_t < 1 or dim < 1:
        raise ValueError("max_t and dim must be positive")
    pos = np.arange(max_t, dtype=np.float64)[:, None]
    idx = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * np.floor(idx / 2.0) / dim)
    return np.where(idx.astype(np.int64) % 2 == 0, np.sin(angle), np.cos(angle))


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def layer_norm(x, gain, shift):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = np.mean(xc * xc, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return gain * xhat + shift, (xhat, inv, gain)


def layer_norm_backward(dy, cache):
    xhat, inv, gain = cache
    reduce_axes = tuple(range(dy.ndim - 1))
    dgain = np.sum(dy * xhat, axis=reduce_axes)
    dshift = np.sum(dy, axis=reduce_axes)
    dxhat = dy * gain
    m1 = np.mean(dxhat, axis=-1, keepdims=True)
    m2 = np.mean(dxhat * xhat, axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dgain, dshift


@dataclass
class EncoderLayerParams:
    """One pre-norm transformer layer: single-head attention + 4x feed-forward.

    Field order is the canonical serialization order.
    """

    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    ln1_gain: np.ndarray
    ln1_shift: np.ndarray
    ln2_gain: np.ndarray
    ln2_shift: np.ndarray

    @property
    def dim(self) -> int:
        return self.wq.shape[0]

    def to_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {prefix + f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray], prefix: str = "") -> "EncoderLayerParams":
        return cls(**{f.name: arrays[prefix + f.name] for f in fields(cls)})


def init_encoder_layer(dim: int, rng: np.random.Generator) -> EncoderLayerParams:
    """Seeded uniform(-1/sqrt(dim), 1/sqrt(dim)) matrices, zero biases, unit norms."""
    if dim < 1:
        raise ValueError("dim must be positive")
    bound = 1.0 / np.sqrt(dim)
    hidden = 4 * dim

    def mat(rows, cols):
        return rng.uniform(-bound, bound, size=(rows, cols))

    return EncoderLayerParams(
        wq=mat(dim, dim), bq=np.zeros(dim),
        wk=mat(dim, dim), bk=np.zeros(dim),
        wv=mat(dim, dim), bv=np.zeros(dim),
        wo=mat(dim, dim), bo=np.zeros(dim),
        w1=mat(dim, hidden), b1=np.zeros(hidden),
        w2=mat(hidden, dim), b2=np.zeros(dim),
        ln1_gain=np.ones(dim), ln1_shift=np.zeros(dim),
        ln2_gain=np.ones(dim), ln2_shift=np.zeros(dim),
    )


def encoder_layer_forward(x: np.ndarray, p: EncoderLayerParams, causal: bool = False):
    """Pre-norm layer: x + Attn(LN1(x)), then + FF(LN2(.)).  x: (B, T, D)."""
    if x.ndim != 3 or x.shape[-1] != p.dim:
        raise ValueError(f"expected (B, T, {p.dim}) input, got {x.shape}")
    d = x.shape[-1]
    h1, ln1_cache = layer_norm(x, p.ln1_gain, p.ln1_shift)
    q = h1 @ p.wq + p.bq
    k = h1 @ p.wk + p.bk
    v = h1 @ p.wv + p.bv
    scores = q @ k.swapaxes(-1, -2) / np.sqrt(d)
    if causal:
        t = x.shape[1]
        scores = scores + np.triu(np.full((t, t), -np.inf), k=1)
    attn_w = softmax(scores, axis=-1)
    ctx = attn_w @ v
    y = x + ctx @ p.wo + p.bo
    h2, ln2_cache = layer_norm(y, p.ln2_gain, p.ln2_shift)
    m = h2 @ p.w1 + p.b1
    g = gelu(m)
    z = y + g @ p.w2 + p.b2
    cache = (p, h1, ln1_cache, q, k, v, attn_w, ctx, h2, ln2_cache, m, g, d)
    return z, cache


def encoder_layer_backward(dz: np.ndarray, cache):
    """Returns (dx, grads) where grads keys mirror EncoderLayerParams fields."""
    p, h1, ln1_cache, q, k, v, attn_w, ctx, h2, ln2_cache, m, g, d = cache

    # feed-forward branch
    df = dz
    dw2 = np.einsum("btf,btd->fd", g, df)
    db2 = df.sum(axis=(0, 1))
    dg = df @ p.w2.T
    dm = dg * gelu_grad(m)
    dw1 = np.einsum("btd,btf->df", h2, dm)
    db1 = dm.sum(axis=(0, 1))
    dh2 = dm @ p.w1.T
    dy_ln, dln2_gain, dln2_shift = layer_norm_backward(dh2, ln2_cache)
    dy = dz + dy_ln

    # attention branch
    dwo = np.einsum("btd,bte->de", ctx, dy)
    dbo = dy.sum(axis=(0, 1))
    dctx = dy @ p.wo.T
    dattn_w = dctx @ v.swapaxes(-1, -2)
    dv = attn_w.swapaxes(-1, -2) @ dctx
    dscores = attn_w * (dattn_w - np.sum(dattn_w * attn_w, axis=-1, keepdims=True))
    dscores = dscores / np.sqrt(d)
    dq = dscores @ k
    dk = dscores.swapaxes(-1, -2) @ q
    dwq = np.einsum("btd,bte->de", h1, dq)
    dbq = dq.sum(axis=(0, 1))
    dwk = np.einsum("btd,bte->de", h1, dk)
    dbk = dk.sum(axis=(0, 1))
    dwv = np.einsum("btd,bte->de", h1, dv)
    dbv = dv.sum(axis=(0, 1))
    dh1 = dq @ p.wq.T + dk @ p.wk.T + dv @ p.wv.T
    dx_ln, dln1_gain, dln1_shift = layer_norm_backward(dh1, ln1_cache)
    dx = dy + dx_ln

    grads = {
        "wq": dwq, "bq": dbq, "wk": dwk, "bk": dbk,
        "wv": dwv, "bv": dbv, "wo": dwo, "bo": dbo,
        "w1": dw1, "b1": db1, "w2": dw2, "b2": db2,
        "ln1_gain": dln1_gain, "ln1_shift": dln1_shift,
        "ln2_gain": dln2_gain, "ln2_shift": dln2_shift,
    }
    return dx, grads
