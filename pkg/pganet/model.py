"""
Toy re-identification network built around a PGA stack.

stem (1×1 conv + BN + ReLU) → PGA stack → global average pool → BN neck
→ linear classifier, trained with ID + batch-hard triplet + β·center loss on
a seeded synthetic identity dataset.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import special
from scipy.spatial.distance import cdist

from .grid_graph import NeighborMode
from .pga import PGAStack, build_stack, stack_forward
from .retrieval_eval import EmbeddingSet
from .tensor_core import (
    BN_MODES, BatchNormState, ComputeTape, GradientError, Parameter, ShapeError, Tensor,
    add, batchnorm, conv1x1, custom_op, global_avg_pool, linear, relu, reshape, scale
)

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
LOSS_COLUMNS = ["loss", "id_loss", "triplet_loss", "center_loss"]
SAMPLE_COLUMNS = ["identity", "camera", "split", "shift_row", "shift_col", "occluded"]
SPLITS = ("train", "query", "gallery")
OCCLUSION_PATCH = 4


@dataclass(eq=False)
class ToyModel:
    """Stem, PGA stack, BN neck and classifier."""
    stem_weight: Parameter
    stem_bias: Parameter
    stem_bn: BatchNormState
    pga: PGAStack
    neck: BatchNormState
    classifier_weight: Parameter
    classifier_bias: Parameter
    input_shape: Tuple[int, int, int]

    def __post_init__(self):
        self.input_shape = tuple(int(s) for s in self.input_shape)
        if self.neck.channels != self.embed_dim or self.classifier_weight.shape[1] != self.embed_dim:
            raise ShapeError(
                f"Classifier {self.classifier_weight.shape} and neck ({self.neck.channels},) "
                f"must match embedding dim {self.embed_dim}"
            )
        if self.stem_weight.shape[1] != self.input_shape[0]:
            raise ShapeError(
                f"Stem weight {self.stem_weight.shape} does not take {self.input_shape[0]} input channels"
            )
        if self.pga.depth and self.pga.layers[0].map_shape != (self.embed_dim,) + self.input_shape[1:]:
            raise ShapeError(
                f"PGA stack expects {self.pga.layers[0].map_shape}, stem produces "
                f"{(self.embed_dim,) + self.input_shape[1:]}"
            )
        names = [p.name for p in self.parameters()]
        if len(set(names)) != len(names):
            raise ValueError("Parameter names must be unique")

    @property
    def embed_dim(self) -> int:
        return self.stem_weight.shape[0]

    @property
    def num_classes(self) -> int:
        return self.classifier_weight.shape[0]

    @property
    def depth(self) -> int:
        return self.pga.depth

    @property
    def mode(self) -> str:
        return self.neck.mode

    def parameters(self) -> List[Parameter]:
        return (
            [self.stem_weight, self.stem_bias] + self.stem_bn.parameters()
            + self.pga.parameters()
            + self.neck.parameters()
            + [self.classifier_weight, self.classifier_bias]
        )

    def named_parameters(self) -> Dict[str, Parameter]:
        return {p.name: p for p in self.parameters()}

    def batchnorm_states(self) -> List[Tuple[str, BatchNormState]]:
        return [("stem.bn", self.stem_bn)] + self.pga.batchnorm_states() + [("neck", self.neck)]

    def set_mode(self, mode: str) -> None:
        if mode not in BN_MODES:
            raise ValueError(f"Unknown mode: {mode}")
        for _, state in self.batchnorm_states():
            state.mode = mode


def build_toy_model(
    in_channels: int = 3,
    height: int = 16,
    width: int = 8,
    embed_dim: int = 16,
    num_classes: int = 8,
    depth: int = 2,
    mode: NeighborMode = NeighborMode.FOUR,
    reduced_dim: Optional[int] = None,
    seed: int = 0,
    self_loops: bool = False,
    literal_softmax: bool = False,
    value_projection: bool = False
) -> ToyModel:
    """Initialize a model; the same arguments and seed give identical weights."""
    rng = np.random.default_rng(seed)
    stem = rng.normal(0.0, 1.0 / np.sqrt(in_channels), size=(embed_dim, in_channels))
    stack = build_stack(
        depth, embed_dim, height, width, mode, reduced_dim, rng,
        self_loops=self_loops, literal_softmax=literal_softmax, value_projection=value_projection
    )
    classifier = rng.normal(0.0, 1.0 / np.sqrt(embed_dim), size=(num_classes, embed_dim))
    return ToyModel(
        stem_weight=Parameter("stem.weight", Tensor(stem)),
        stem_bias=Parameter("stem.bias", Tensor(np.zeros(embed_dim))),
        stem_bn=BatchNormState.create("stem.bn", embed_dim),
        pga=stack,
        neck=BatchNormState.create("neck", embed_dim),
        classifier_weight=Parameter("classifier.weight", Tensor(classifier)),
        classifier_bias=Parameter("classifier.bias", Tensor(np.zeros(num_classes))),
        input_shape=(in_channels, height, width)
    )


def model_forward(
    m: ToyModel,
    x: Union[Tensor, np.ndarray],
    mode: Optional[str] = None,
    attention_sink: Optional[List[np.ndarray]] = None
) -> Tuple[Tensor, Tensor]:
    """
    Run one sample (C_in,H,W) or a batch (B,C_in,H,W) through the model.

    Args:
        m: Model
        x: Input images
        mode: "training" or "evaluation"; None keeps the model's current mode
        attention_sink: Collects each PGA layer's attention matrix

    Returns:
        (logits, embedding); the embedding is taken after the neck, before the classifier
    """
    if mode is not None:
        m.set_mode(mode)
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.ndim not in (3, 4) or x.shape[-3:] != m.input_shape:
        raise ShapeError(f"Model expects inputs of shape {m.input_shape}, got {x.shape}")
    single = x.ndim == 3

    h = relu(batchnorm(conv1x1(x, m.stem_weight, m.stem_bias), m.stem_bn))
    h = stack_forward(m.pga, h, attention_sink)
    pooled = global_avg_pool(h)
    if single:
        pooled = reshape(pooled, (1, m.embed_dim))

    embedding = batchnorm(pooled, m.neck)
    logits = linear(embedding, m.classifier_weight, m.classifier_bias)
    if single:
        return reshape(logits, (m.num_classes,)), reshape(embedding, (m.embed_dim,))
    return logits, embedding


def _check_labels(labels, num_classes: int, count: int) -> np.ndarray:
    labels = np.asarray(labels).reshape(-1)
    if len(labels) != count:
        raise ShapeError(f"Got {len(labels)} labels for {count} samples")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError(f"Labels must be integers, got {labels.dtype}")
    bad = np.flatnonzero((labels < 0) | (labels >= num_classes))
    if bad.size:
        raise ValueError(f"Label {int(labels[bad[0]])} at position {int(bad[0])} is outside [0, {num_classes})")
    return labels


def _as_rows(data: np.ndarray) -> np.ndarray:
    return data.reshape(1, -1) if data.ndim == 1 else data


def id_loss(logits: Tensor, labels, smoothing: float = 0.1) -> Tensor:
    """
    Cross-entropy against the smoothed target (1−ε)·onehot + ε/K, averaged over the batch.

    With ε = 0 this is plain cross-entropy.
    """
    if not 0.0 <= smoothing < 1.0:
        raise ValueError(f"smoothing must be in [0, 1), got {smoothing}")

    def forward(z):
        z2 = _as_rows(z)
        count, k = z2.shape
        y = _check_labels(labels, k, count)
        target = np.full((count, k), smoothing / k)
        target[np.arange(count), y] += 1.0 - smoothing
        lse = special.logsumexp(z2, axis=1)
        value = np.mean(lse - (target * z2).sum(axis=1))
        probs = special.softmax(z2, axis=1)

        def backward(g):
            return (float(g) * (probs - target) / count).reshape(z.shape),

        return np.asarray(value), backward

    return custom_op("id_loss", [logits], forward)


def batch_hard_terms(embeddings: np.ndarray, labels, margin: float = 0.3) -> np.ndarray:
    """
    Per-anchor hinge max(0, margin + d(a, hardest positive) − d(a, hardest negative)).

    Anchors without a positive or without a negative in the batch get NaN.
    """
    terms, _, _ = _batch_hard(np.asarray(embeddings, dtype=np.float64), labels, margin)
    return terms


def _batch_hard(x: np.ndarray, labels, margin: float):
    x = _as_rows(x)
    count = x.shape[0]
    labels = np.asarray(labels).reshape(-1)
    if len(labels) != count:
        raise ShapeError(f"Got {len(labels)} labels for {count} samples")

    dist = cdist(x, x, metric="euclidean")
    same = labels[:, None] == labels[None, :]
    positive = same & ~np.eye(count, dtype=bool)
    negative = ~same

    valid = positive.any(axis=1) & negative.any(axis=1)
    hardest_pos = np.argmax(np.where(positive, dist, -np.inf), axis=1)
    hardest_neg = np.argmin(np.where(negative, dist, np.inf), axis=1)
    rows = np.arange(count)
    terms = np.maximum(0.0, margin + dist[rows, hardest_pos] - dist[rows, hardest_neg])
    terms = np.where(valid, terms, np.nan)
    return terms, hardest_pos, hardest_neg


def triplet_loss(embeddings: Tensor, labels, margin: float = 0.3) -> Tensor:
    """
    Batch-hard triplet loss with Euclidean distances, averaged over valid anchors.

    Raises:
        ValueError: No anchor has both a positive and a negative
    """
    if margin < 0:
        raise ValueError(f"margin must be >= 0, got {margin}")

    def forward(x):
        x2 = _as_rows(x)
        terms, pos, neg = _batch_hard(x2, labels, margin)
        valid = ~np.isnan(terms)
        if not valid.any():
            raise ValueError("No anchor in the batch has both a positive and a negative")
        n_valid = int(valid.sum())
        value = np.asarray(terms[valid].sum() / n_valid)

        def backward(g):
            dx = np.zeros_like(x2)
            coef = float(g) / n_valid
            for a in np.flatnonzero(valid & (np.nan_to_num(terms) > 0)):
                for other, sign in ((pos[a], 1.0), (neg[a], -1.0)):
                    diff = x2[a] - x2[other]
                    norm = np.linalg.norm(diff)
                    if norm > 0:
                        unit = sign * coef * diff / norm
                        dx[a] += unit
                        dx[other] -= unit
            return dx.reshape(x.shape),

        return value, backward

    return custom_op("triplet_loss", [embeddings], forward)


def center_loss(embeddings: Tensor, labels, centers: Parameter) -> Tensor:
    """½ · mean over samples of ‖f_i − c_{y_i}‖²; gradients reach both embeddings and centers."""

    def forward(x, c):
        x2 = _as_rows(x)
        count = x2.shape[0]
        if c.ndim != 2 or c.shape[1] != x2.shape[1]:
            raise ShapeError(f"Centers {c.shape} do not match embeddings {x.shape}")
        y = _check_labels(labels, c.shape[0], count)
        diff = x2 - c[y]
        value = np.asarray(0.5 * np.mean(np.sum(diff ** 2, axis=1)))

        def backward(g):
            dx = float(g) * diff / count
            dc = np.zeros_like(c)
            np.add.at(dc, y, -dx)
            return dx.reshape(x.shape), dc

        return value, backward

    return custom_op("center_loss", [embeddings, centers], forward)


@dataclass(eq=False)
class LossConfig:
    """Loss weights and the learnable class centers."""
    centers: Parameter
    beta: float = 5e-4
    margin: float = 0.3
    smoothing: float = 0.1

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")
        if not 0.0 <= self.smoothing < 1.0:
            raise ValueError(f"smoothing must be in [0, 1), got {self.smoothing}")

    @classmethod
    def create(
        cls,
        num_classes: int,
        embed_dim: int,
        beta: float = 5e-4,
        margin: float = 0.3,
        smoothing: float = 0.1
    ) -> "LossConfig":
        centers = Parameter("loss.centers", Tensor(np.zeros((num_classes, embed_dim))))
        return cls(centers=centers, beta=beta, margin=margin, smoothing=smoothing)


def loss_components(logits: Tensor, embeddings: Tensor, labels, cfg: LossConfig) -> Dict[str, Tensor]:
    """The three terms of the composite loss, each a scalar on the batch's tape."""
    return {
        "id_loss": id_loss(logits, labels, cfg.smoothing),
        "triplet_loss": triplet_loss(embeddings, labels, cfg.margin),
        "center_loss": center_loss(embeddings, labels, cfg.centers)
    }


def total_loss(logits: Tensor, embeddings: Tensor, labels, cfg: LossConfig) -> Tensor:
    """L = L_ID + L_Triplet + β·L_C."""
    return combine_losses(loss_components(logits, embeddings, labels, cfg), cfg.beta)


def combine_losses(parts: Dict[str, Tensor], beta: float) -> Tensor:
    return add(add(parts["id_loss"], parts["triplet_loss"]), scale(parts["center_loss"], beta))


@dataclass
class AdamState:
    """Adam moments, step counter and the warm-up schedule."""
    lr: float = 3e-4
    weight_decay: float = 5e-4
    warmup_iters: int = 500
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.warmup_iters < 0:
            raise ValueError(f"warmup_iters must be >= 0, got {self.warmup_iters}")

    def learning_rate(self, iteration: int) -> float:
        """Linear ramp from lr/10 at iteration 0 to lr at ``warmup_iters``, then constant."""
        if self.warmup_iters == 0 or iteration >= self.warmup_iters:
            return self.lr
        return self.lr * (0.1 + 0.9 * iteration / self.warmup_iters)


def adam_step(state: AdamState, params: Sequence[Parameter]) -> Sequence[Parameter]:
    """
    Apply one Adam update with decoupled weight decay, then zero the gradients.

    Raises:
        GradientError: A parameter has no gradient from the last backward pass
    """
    for p in params:
        if not p.grad_populated:
            raise GradientError(f"Parameter {p.name} has no populated gradient")

    lr = state.learning_rate(state.step)
    state.step += 1
    t = state.step

    for p in params:
        g = p.grad.data
        m = state.first_moment.setdefault(p.name, np.zeros(p.shape))
        v = state.second_moment.setdefault(p.name, np.zeros(p.shape))
        if m.shape != p.shape:
            raise ShapeError(f"Moment for {p.name} has shape {m.shape}, parameter has {p.shape}")
        m[...] = state.beta1 * m + (1 - state.beta1) * g
        v[...] = state.beta2 * v + (1 - state.beta2) * g ** 2
        m_hat = m / (1 - state.beta1 ** t)
        v_hat = v / (1 - state.beta2 ** t)
        value = p.value.data
        value -= lr * (m_hat / (np.sqrt(v_hat) + state.epsilon) + state.weight_decay * value)
        p.zero_grad()
    return params


@dataclass
class SynthDataset:
    """
    Seeded synthetic identities.

    ``images[i]`` is described by row i of ``samples``; identity templates are
    kept for inspection.
    """
    seed: int
    templates: np.ndarray
    images: np.ndarray
    samples: pd.DataFrame

    @property
    def num_ids(self) -> int:
        return self.templates.shape[0]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(self.templates.shape[1:])

    def split(self, name: str) -> Tuple[np.ndarray, pd.DataFrame]:
        if name not in SPLITS:
            raise ValueError(f"Unknown split: {name}")
        frame = self.samples[self.samples["split"] == name]
        return self.images[frame.index.to_numpy()], frame


def split_sizes(per_id: int) -> Dict[str, int]:
    query = max(1, int(round(0.1 * per_id)))
    gallery = max(1, int(round(0.3 * per_id)))
    return {"train": per_id - query - gallery, "query": query, "gallery": gallery}


def make_synth_dataset(
    seed: int,
    num_ids: int,
    per_id: int,
    shape: Tuple[int, int, int] = (3, 16, 8),
    occlusion_prob: float = 0.0,
    max_shift: int = 2,
    camera_noise: Tuple[float, float] = (0.2, 0.8)
) -> SynthDataset:
    """
    Draw identity templates and their noisy, shifted (and optionally occluded) samples.

    Each identity's samples are split train/query/gallery 60/10/30. Query j
    is on camera j % 2 and gallery samples alternate starting from camera 1,
    so every query has a gallery match on the other camera.
    Camera 1 adds stronger pixel noise than camera 0, so every true match
    crosses a camera gap.
    """
    if num_ids < 2:
        raise ValueError(f"num_ids must be >= 2, got {num_ids}")
    if per_id < 4:
        raise ValueError(f"per_id must be >= 4, got {per_id}")
    if not 0.0 <= occlusion_prob <= 1.0:
        raise ValueError(f"occlusion_prob must be in [0, 1], got {occlusion_prob}")
    c, h, w = (int(s) for s in shape)

    rng = np.random.default_rng(seed)
    templates = rng.normal(0.0, 1.0, size=(num_ids, c, 1, 1)) + rng.normal(0.0, 0.5, size=(num_ids, c, h, w))
    sizes = split_sizes(per_id)

    images, rows = [], []
    for identity in range(num_ids):
        for split in SPLITS:
            for j in range(sizes[split]):
                camera = (1 + j) % 2 if split == "gallery" else j % 2
                shift_row, shift_col = (int(s) for s in rng.integers(-max_shift, max_shift + 1, size=2))
                image = np.roll(templates[identity], (shift_row, shift_col), axis=(1, 2))
                image = image + rng.normal(0.0, camera_noise[camera], size=(c, h, w))
                occluded = bool(rng.random() < occlusion_prob)
                if occluded:
                    ph, pw = min(OCCLUSION_PATCH, h), min(OCCLUSION_PATCH, w)
                    top = int(rng.integers(0, h - ph + 1))
                    left = int(rng.integers(0, w - pw + 1))
                    image[:, top:top + ph, left:left + pw] = 0.0
                images.append(image)
                rows.append((identity, camera, split, shift_row, shift_col, occluded))

    samples = pd.DataFrame(rows, columns=SAMPLE_COLUMNS)
    logger.debug("Synthesized %d samples for %d identities (seed %d)", len(samples), num_ids, seed)
    return SynthDataset(seed=seed, templates=templates, images=np.stack(images), samples=samples)


def pk_batches(
    labels: np.ndarray,
    batch_p: int,
    batch_k: int,
    rng: np.random.Generator
) -> List[np.ndarray]:
    """
    One epoch of P identities × K instances batches over the given labels.

    An identity with fewer than K samples is drawn with replacement.
    """
    labels = np.asarray(labels)
    identities = np.unique(labels)
    if batch_p > len(identities) or batch_p < 2:
        raise ValueError(f"batch_p must be in [2, {len(identities)}], got {batch_p}")
    if batch_k < 2:
        raise ValueError(f"batch_k must be >= 2, got {batch_k}")

    members = {ident: np.flatnonzero(labels == ident) for ident in identities}
    count = int(np.ceil(len(labels) / (batch_p * batch_k)))
    batches = []
    for _ in range(count):
        chosen = rng.choice(identities, size=batch_p, replace=False)
        batch = [
            rng.choice(members[ident], size=batch_k, replace=len(members[ident]) < batch_k)
            for ident in chosen
        ]
        batches.append(np.concatenate(batch))
    return batches


def training_log_columns(depth: int) -> List[str]:
    return ["epoch"] + LOSS_COLUMNS + ["train_acc"] + [f"alpha_{i}" for i in range(depth)]


def _run_epoch(
    m: ToyModel,
    images: np.ndarray,
    labels: np.ndarray,
    batches: List[np.ndarray],
    loss_cfg: LossConfig,
    optimizer: Optional[AdamState]
) -> Dict[str, float]:
    totals = dict.fromkeys(LOSS_COLUMNS, 0.0)
    correct = 0
    params = m.parameters() + [loss_cfg.centers]

    for batch in batches:
        tape = ComputeTape()
        y = labels[batch]
        logits, embedding = model_forward(m, tape.constant(images[batch]))
        parts = loss_components(logits, embedding, y, loss_cfg)
        loss = combine_losses(parts, loss_cfg.beta)
        if optimizer is not None:
            tape.backward(loss)
            adam_step(optimizer, params)

        totals["loss"] += loss.item()
        for name, part in parts.items():
            totals[name] += part.item()
        correct += int(np.sum(np.argmax(logits.data, axis=1) == y))

    seen = sum(len(b) for b in batches)
    summary = {name: value / len(batches) for name, value in totals.items()}
    summary["train_acc"] = correct / seen
    return summary


def train(
    m: ToyModel,
    data: SynthDataset,
    loss_cfg: LossConfig,
    optimizer: AdamState,
    epochs: int,
    batch_p: int = 4,
    batch_k: int = 4,
    seed: int = 0
) -> pd.DataFrame:
    """
    Train with PK-sampled mini-batches.

    Row 0 of the log is one epoch of forward passes before any update;
    rows 1..epochs follow each training epoch. Identical seeds give
    identical logs.

    Returns:
        DataFrame with columns epoch, loss, id_loss, triplet_loss,
        center_loss, train_acc, alpha_0..alpha_{L-1}
    """
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if data.shape != m.input_shape:
        raise ShapeError(f"Dataset images {data.shape} do not match model inputs {m.input_shape}")
    if data.num_ids != m.num_classes:
        raise ShapeError(f"Dataset has {data.num_ids} identities, model has {m.num_classes} classes")
    if loss_cfg.centers.shape != (m.num_classes, m.embed_dim):
        raise ShapeError(f"Centers {loss_cfg.centers.shape} do not match ({m.num_classes}, {m.embed_dim})")

    images, frame = data.split("train")
    labels = frame["identity"].to_numpy()
    rng = np.random.default_rng(seed)
    m.set_mode("training")

    rows = []
    for epoch in range(epochs + 1):
        batches = pk_batches(labels, batch_p, batch_k, rng)
        summary = _run_epoch(m, images, labels, batches, loss_cfg, optimizer if epoch else None)
        row = {"epoch": epoch, **summary}
        row.update({f"alpha_{i}": a for i, a in enumerate(m.pga.alphas())})
        rows.append(row)
        logger.info(
            "epoch %d loss %.4f (id %.4f, triplet %.4f, center %.4f) train_acc %.3f",
            epoch, summary["loss"], summary["id_loss"], summary["triplet_loss"],
            summary["center_loss"], summary["train_acc"]
        )

    return pd.DataFrame(rows, columns=training_log_columns(m.depth))


def extract_embeddings(
    m: ToyModel,
    images: np.ndarray,
    frame: pd.DataFrame,
    role: str = "query"
) -> EmbeddingSet:
    """Evaluation-mode embeddings with identity and camera labels attached."""
    previous = m.mode
    m.set_mode("evaluation")
    try:
        _, embedding = model_forward(m, np.asarray(images, dtype=np.float64))
    finally:
        m.set_mode(previous)
    return EmbeddingSet(
        vectors=_as_rows(embedding.data),
        identities=frame["identity"].to_numpy(),
        cameras=frame["camera"].to_numpy(),
        role=role
    )


def save_checkpoint(path: Union[str, Path], m: ToyModel) -> Path:
    """
    Write named parameters and BN running statistics to an ``.npz`` archive.

    Entries: ``format_version``, ``shape`` (C_in, H, W, C, K, depth),
    ``param/<name>`` and ``bn/<name>/running_mean|running_var``.
    """
    path = Path(path)
    arrays = {
        "format_version": np.asarray(CHECKPOINT_VERSION),
        "shape": np.asarray(m.input_shape + (m.embed_dim, m.num_classes, m.depth))
    }
    for name, p in m.named_parameters().items():
        arrays[f"param/{name}"] = p.value.data
    for name, state in m.batchnorm_states():
        if state.initialized:
            arrays[f"bn/{name}/running_mean"] = state.running_mean
            arrays[f"bn/{name}/running_var"] = state.running_var

    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    logger.info("Saved checkpoint with %d entries to %s", len(arrays), path)
    return path


def load_checkpoint(path: Union[str, Path], m: ToyModel) -> ToyModel:
    """
    Restore parameters and running statistics into a model of the same shape.

    Raises:
        ShapeError: Names or shapes in the archive do not match the model
    """
    with np.load(Path(path)) as archive:
        version = int(archive["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"Unsupported checkpoint version: {version}")
        expected = m.input_shape + (m.embed_dim, m.num_classes, m.depth)
        if tuple(int(s) for s in archive["shape"]) != expected:
            raise ShapeError(f"Checkpoint shape {tuple(archive['shape'])} does not match model {expected}")

        params = m.named_parameters()
        stored = {key[len("param/"):] for key in archive.files if key.startswith("param/")}
        if stored != set(params):
            missing = sorted(set(params) ^ stored)
            raise ShapeError(f"Checkpoint parameters differ from the model: {missing[:5]}")
        for name, p in params.items():
            value = archive[f"param/{name}"]
            if value.shape != p.shape:
                raise ShapeError(f"Checkpoint {name} has shape {value.shape}, model has {p.shape}")
            p.value.data[...] = value

        for name, state in m.batchnorm_states():
            key = f"bn/{name}/running_mean"
            if key in archive.files:
                state.seed_running_stats(archive[key], archive[f"bn/{name}/running_var"])
    return m
