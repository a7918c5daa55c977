"""Two-stage toy training over the full token pipeline.

Stage 1 trains the vision-to-language connector (projector, and by default
the temporal module) with the language model frozen; stage 2 trains
projector, temporal module, and language model jointly.  The vision encoder
is frozen in both stages (features arrive precomputed).  Optimizer is an
AdamW-style update implemented from its published rule; the learning rate
follows a linear warmup into a cosine decay.

The language model is a deliberately tiny stand-in: token embeddings, two
pre-norm causal decoder blocks, a fixed sinusoidal positional buffer, and
an output head tied to the embedding table.  Loss is mean cross-entropy
over answer-segment target tokens only; targets default to the token
sequence itself and can be supplied separately, in which case prompt-
segment targets never influence the loss.

Everything runs in float64 and is deterministic given the seed; analytic
gradients for every trainable parameter are exercised against finite
differences in the test suite.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import (
    ProjectionParams,
    assemble_video_tokens,
    init_projection,
    project_tokens,
    projection_backward,
)
from .errors import CapacityError, NumericalFailure
from .features import N_PATCHES, FrameFeatures, VideoFeatures
from .nn import (
    EncoderLayerParams,
    encoder_layer_backward,
    encoder_layer_forward,
    init_encoder_layer,
    sinusoidal_table,
    softmax,
)
from .temporal import (
    TemporalParamsV1,
    TemporalParamsV2,
    TemporalParamsV3,
    aggregate,
    init_temporal_params,
    temporal_backward,
)

GROUPS = ("vision_encoder", "temporal", "projector", "llm")

STAGE1_LR = 2e-3
STAGE2_LR = 5e-5
# main-text fine-tuning rate; selectable via build_stage_config(stage2_lr=...)
STAGE2_LR_ALT = 2e-5


@dataclass(frozen=True)
class StageConfig:
    stage: int
    learning_rate: float
    epochs: int
    batch_size: int
    trainable: frozenset[str]
    frozen: frozenset[str]
    warmup_ratio: float = 0.03
    schedule: str = "cosine"
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.95
    eps: float = 1e-6

    def __post_init__(self):
        if self.trainable & self.frozen:
            raise ValueError(f"trainable and frozen overlap: {self.trainable & self.frozen}")
        if "vision_encoder" not in self.frozen:
            raise ValueError("the vision encoder is frozen in every stage")

    def to_json(self) -> dict:
        out = dataclasses.asdict(self)
        out["trainable"] = sorted(self.trainable)
        out["frozen"] = sorted(self.frozen)
        return out


def build_stage_config(
    stage: int,
    train_temporal_in_stage1: bool = True,
    stage2_lr: float = STAGE2_LR,
) -> StageConfig:
    """The two-stage recipe: rates, epochs, batch sizes, and freeze sets.

    Stage 1 trains the connector only (the temporal module's membership is a
    flag, trainable by default); stage 2 unfreezes the language model and
    lowers the rate.
    """
    if stage == 1:
        trainable = {"projector"} | ({"temporal"} if train_temporal_in_stage1 else set())
        frozen = set(GROUPS) - trainable
        return StageConfig(
            stage=1,
            learning_rate=STAGE1_LR,
            epochs=1,
            batch_size=128,
            trainable=frozenset(trainable),
            frozen=frozenset(frozen),
        )
    if stage == 2:
        return StageConfig(
            stage=2,
            learning_rate=stage2_lr,
            epochs=3,
            batch_size=32,
            trainable=frozenset({"temporal", "projector", "llm"}),
            frozen=frozenset({"vision_encoder"}),
        )
    raise ValueError(f"stage must be 1 or 2, got {stage}")


def lr_at(step: int, total_steps: int, config: StageConfig) -> float:
    """Linear ramp over ceil(warmup_ratio * total) steps, then cosine to zero.

    The boundary step evaluates to the full rate under both formulas.  In
    the degenerate case where warmup swallows the whole run the final step
    stays at the full rate.
    """
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warmup = math.ceil(config.warmup_ratio * total_steps)
    if step < warmup:
        return config.learning_rate * step / warmup
    progress = (step - warmup) / max(total_steps - warmup, 1)
    return config.learning_rate * 0.5 * (1.0 + math.cos(math.pi * progress))


# ---------------------------------------------------------------------------
# tiny decoder language model

@dataclass
class TinyDecoderParams:
    """Token embeddings, two causal pre-norm blocks, tied output head.

    `pos` is a fixed sinusoidal buffer (not listed as trainable); the output
    head reuses the embedding table, so logits are hidden @ embedding.T.
    """

    embedding: np.ndarray
    blocks: list[EncoderLayerParams]
    pos: np.ndarray

    def __post_init__(self):
        if self.embedding.shape[0] < 8:
            raise ValueError(f"vocabulary must be >= 8, got {self.embedding.shape[0]}")
        if self.pos.shape[1] != self.embedding.shape[1]:
            raise ValueError("positional width != embedding width")

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]

    @property
    def dim(self) -> int:
        return self.embedding.shape[1]

    @property
    def max_len(self) -> int:
        return self.pos.shape[0]

    def to_arrays(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {prefix + "embedding": self.embedding}
        for i, block in enumerate(self.blocks):
            out.update(block.to_arrays(f"{prefix}blocks.{i}."))
        out[prefix + "pos"] = self.pos
        return out

    @classmethod
    def from_arrays(cls, arrays, prefix: str = "", n_blocks: int = 2) -> "TinyDecoderParams":
        blocks = [
            EncoderLayerParams.from_arrays(arrays, f"{prefix}blocks.{i}.")
            for i in range(n_blocks)
        ]
        return cls(embedding=arrays[prefix + "embedding"], blocks=blocks, pos=arrays[prefix + "pos"])


def init_tiny_decoder(
    vocab_size: int, dim: int, max_len: int = 512, n_blocks: int = 2, seed: int = 0
) -> TinyDecoderParams:
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(dim)
    return TinyDecoderParams(
        embedding=rng.uniform(-bound, bound, size=(vocab_size, dim)),
        blocks=[init_encoder_layer(dim, rng) for _ in range(n_blocks)],
        pos=sinusoidal_table(max_len, dim),
    )


# ---------------------------------------------------------------------------
# toy examples and the composite model

@dataclass
class ToyExample:
    """Precomputed frame features plus a text token sequence.

    answer_mask marks the answer segment: only those target tokens carry
    cross-entropy terms.  targets defaults to the tokens themselves.
    """

    features: VideoFeatures
    tokens: np.ndarray
    answer_mask: np.ndarray
    targets: np.ndarray | None = None

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        self.answer_mask = np.asarray(self.answer_mask, dtype=bool)
        if self.tokens.ndim != 1 or self.tokens.shape != self.answer_mask.shape:
            raise ValueError("tokens and answer_mask must be matching vectors")
        if self.targets is not None:
            self.targets = np.asarray(self.targets, dtype=np.int64)
            if self.targets.shape != self.tokens.shape:
                raise ValueError("targets must match tokens in shape")
        if not self.answer_mask.any():
            raise ValueError("answer_mask selects no tokens")


def make_toy_example(
    features: VideoFeatures, prompt_tokens, answer_tokens
) -> ToyExample:
    prompt = np.asarray(prompt_tokens, dtype=np.int64)
    answer = np.asarray(answer_tokens, dtype=np.int64)
    tokens = np.concatenate([prompt, answer])
    mask = np.concatenate([np.zeros(len(prompt), bool), np.ones(len(answer), bool)])
    return ToyExample(features=features, tokens=tokens, answer_mask=mask)


@dataclass
class ToyModel:
    variant: str
    temporal: object
    projector: ProjectionParams
    decoder: TinyDecoderParams

    def to_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        out.update(self.temporal.to_arrays("temporal."))
        out.update(self.projector.to_arrays("projector."))
        out.update(self.decoder.to_arrays("llm."))
        return out

    def replace_arrays(self, arrays: dict[str, np.ndarray]) -> "ToyModel":
        merged = self.to_arrays()
        merged.update(arrays)
        temporal = _temporal_from_arrays(self.variant, merged, "temporal.")
        projector = ProjectionParams.from_arrays(merged, "projector.")
        decoder = TinyDecoderParams.from_arrays(
            merged, "llm.", n_blocks=len(self.decoder.blocks)
        )
        return ToyModel(self.variant, temporal, projector, decoder)

    def trainable_names(self, groups) -> list[str]:
        """Array names for the given groups; fixed positional buffers excluded."""
        names = []
        for name in self.to_arrays():
            group, _, rest = name.partition(".")
            if group in groups and rest != "pos":
                names.append(name)
        return names


def _temporal_from_arrays(variant, arrays, prefix):
    if variant == "v1":
        return TemporalParamsV1()
    if variant == "v2":
        return TemporalParamsV2.from_arrays(arrays, prefix)
    return TemporalParamsV3.from_arrays(arrays, prefix)


def init_toy_model(
    variant: str,
    dim: int,
    dim_llm: int,
    vocab_size: int,
    max_t: int = 64,
    max_len: int = 512,
    seed: int = 0,
) -> ToyModel:
    s_temporal, s_proj, s_dec = (
        int(x) for x in np.random.SeedSequence(seed).generate_state(3)
    )
    return ToyModel(
        variant=variant,
        temporal=init_temporal_params(variant, dim, max_t=max_t, seed=s_temporal),
        projector=init_projection(dim, dim_llm, seed=s_proj),
        decoder=init_tiny_decoder(vocab_size, dim_llm, max_len=max_len, seed=s_dec),
    )


# ---------------------------------------------------------------------------
# forward / backward through the whole pipeline

def _decoder_hidden(decoder: TinyDecoderParams, full_emb: np.ndarray):
    m = full_emb.shape[0]
    if m > decoder.max_len:
        raise CapacityError(f"sequence length {m} exceeds decoder capacity {decoder.max_len}")
    h = (full_emb + decoder.pos[:m])[None]
    caches = []
    for block in decoder.blocks:
        h, cache = encoder_layer_forward(h, block, causal=True)
        caches.append(cache)
    return h[0], caches


def _example_pass(model: ToyModel, example: ToyExample, want_grads: bool):
    """CE sum and answer-token count for one example; optionally d(ce_sum)."""
    feats = example.features
    if (example.tokens >= model.decoder.vocab_size).any() or (example.tokens < 0).any():
        raise ValueError("token id outside vocabulary")
    agg = aggregate(model.variant, feats, model.temporal)
    seq = assemble_video_tokens(agg, feats)
    projected = project_tokens(seq, model.projector)
    text_emb = model.decoder.embedding[example.tokens]
    full = np.vstack([projected, text_emb])
    hidden, caches = _decoder_hidden(model.decoder, full)
    logits = hidden @ model.decoder.embedding.T

    prefix_len = projected.shape[0]
    targets = example.targets if example.targets is not None else example.tokens
    answer_idx = np.nonzero(example.answer_mask)[0]
    positions = prefix_len + answer_idx - 1
    target_ids = targets[answer_idx]
    if (target_ids >= model.decoder.vocab_size).any() or (target_ids < 0).any():
        raise ValueError("target id outside vocabulary")

    rows = logits[positions]
    row_max = rows.max(axis=1)
    log_z = row_max + np.log(np.exp(rows - row_max[:, None]).sum(axis=1))
    ce_sum = float((log_z - rows[np.arange(len(positions)), target_ids]).sum())
    count = len(positions)
    if not want_grads:
        return ce_sum, count, None

    dlogits = np.zeros_like(logits)
    probs = softmax(rows, axis=1)
    probs[np.arange(len(positions)), target_ids] -= 1.0
    np.add.at(dlogits, positions, probs)

    d_embedding = dlogits.T @ hidden
    dh = (dlogits @ model.decoder.embedding)[None]
    block_grads = []
    for block_index in range(len(model.decoder.blocks) - 1, -1, -1):
        dh, g = encoder_layer_backward(dh, caches[block_index])
        block_grads.insert(0, g)
    dfull = dh[0]
    np.add.at(d_embedding, example.tokens, dfull[prefix_len:])

    d_matrix, d_bias, d_tokens = projection_backward(seq, model.projector, dfull[:prefix_len])
    temporal_grads, _ = temporal_backward(
        model.variant, feats, model.temporal, d_tokens[:N_PATCHES]
    )

    grads = {"temporal." + k: v for k, v in temporal_grads.items()}
    grads["projector.matrix"] = d_matrix
    grads["projector.bias"] = d_bias
    grads["llm.embedding"] = d_embedding
    for i, g in enumerate(block_grads):
        for k, v in g.items():
            grads[f"llm.blocks.{i}.{k}"] = v
    return ce_sum, count, grads


def batch_loss(model: ToyModel, batch: list[ToyExample]) -> float:
    """Mean cross-entropy over all answer tokens in the batch."""
    total, count = 0.0, 0
    for example in batch:
        ce, n, _ = _example_pass(model, example, want_grads=False)
        total += ce
        count += n
    return total / count


def batch_loss_and_grads(model: ToyModel, batch: list[ToyExample]):
    """Loss plus exact gradients for every parameter array (buffers excluded)."""
    if not batch:
        raise ValueError("batch must be non-empty")
    total, count = 0.0, 0
    acc: dict[str, np.ndarray] = {}
    for example in batch:  # fixed order keeps accumulation deterministic
        ce, n, grads = _example_pass(model, example, want_grads=True)
        total += ce
        count += n
        for name, g in grads.items():
            acc[name] = acc[name] + g if name in acc else g.copy()
    scale = 1.0 / count
    return total * scale, {name: g * scale for name, g in acc.items()}


# ---------------------------------------------------------------------------
# optimizer and loop

@dataclass
class AdamWState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adamw_update(
    arrays: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamWState,
    lr: float,
    config: StageConfig,
) -> dict[str, np.ndarray]:
    """One decoupled-weight-decay Adam step over the given arrays."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    out = {}
    for name, value in arrays.items():
        g = grads[name]
        m = state.m.get(name, np.zeros_like(value))
        v = state.v.get(name, np.zeros_like(value))
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name] = m
        state.v[name] = v
        step = (m / bc1) / (np.sqrt(v / bc2) + config.eps)
        out[name] = value - lr * (step + config.weight_decay * value)
    return out


@dataclass
class TrainingReport:
    variant: str
    seed: int
    losses: list[float]
    stage_steps: list[int]
    configs: list[dict]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.seed,
            "losses": self.losses,
            "stage_steps": self.stage_steps,
            "configs": self.configs,
        }


def train_toy(
    variant: str,
    dataset: list[ToyExample],
    stages: list[StageConfig],
    seed: int = 0,
    dim_llm: int = 8,
    vocab_size: int | None = None,
    max_t: int = 64,
    max_len: int = 512,
) -> tuple[TrainingReport, ToyModel]:
    """Run the staged recipe over the toy pipeline.

    Honors each stage's freeze set (frozen arrays are never touched), records
    the loss at every step, and fails loudly on non-finite losses.  Batches
    are fixed-order slices, so runs are bit-reproducible given the seed.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    dims = {ex.features.dim for ex in dataset}
    if len(dims) != 1:
        raise ValueError(f"examples disagree on feature width: {sorted(dims)}")
    if vocab_size is None:
        vocab_size = max(8, int(max(ex.tokens.max() for ex in dataset)) + 1)
    model = init_toy_model(
        variant, dims.pop(), dim_llm, vocab_size, max_t=max_t, max_len=max_len, seed=seed
    )

    losses: list[float] = []
    stage_steps: list[int] = []
    for config in stages:
        batches = [
            dataset[i : i + config.batch_size]
            for i in range(0, len(dataset), config.batch_size)
        ]
        total_steps = config.epochs * len(batches)
        trainable = model.trainable_names(config.trainable)
        state = AdamWState()
        step = 0
        for _ in range(config.epochs):
            for batch in batches:
                loss, grads = batch_loss_and_grads(model, batch)
                if not np.isfinite(loss):
                    raise NumericalFailure(
                        f"non-finite loss at stage {config.stage}, step {step + 1}"
                    )
                step += 1
                lr = lr_at(step, total_steps, config)
                arrays = model.to_arrays()
                updated = adamw_update(
                    {n: arrays[n] for n in trainable},
                    {n: grads[n] for n in trainable},
                    state,
                    lr,
                    config,
                )
                model = model.replace_arrays(updated)
                losses.append(loss)
        stage_steps.append(step)

    report = TrainingReport(
        variant=variant,
        seed=seed,
        losses=losses,
        stage_steps=stage_steps,
        configs=[c.to_json() for c in stages],
    )
    return report, model


# ---------------------------------------------------------------------------
# synthetic data for demos and tests

def synthetic_features(t: int, dim: int, rng: np.random.Generator) -> VideoFeatures:
    frames = [
        FrameFeatures(
            cls=rng.uniform(-1, 1, size=dim),
            patches=rng.uniform(-1, 1, size=(N_PATCHES, dim)),
        )
        for _ in range(t)
    ]
    return VideoFeatures(frames=frames)


def synthetic_toy_dataset(
    n_examples: int,
    dim: int = 4,
    t: int = 2,
    vocab_size: int = 16,
    prompt_len: int = 4,
    answer_len: int = 4,
    seed: int = 0,
) -> list[ToyExample]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_examples):
        feats = synthetic_features(t, dim, rng)
        prompt = rng.integers(0, vocab_size, size=prompt_len)
        answer = rng.integers(0, vocab_size, size=answer_len)
        out.append(make_toy_example(feats, prompt, answer))
    return out
