"""Depth and neighbor-mode sweeps on the synthetic retrieval split."""

import logging
from dataclasses import dataclass
from typing import Optional

import pandas as pd

from .config import RunConfig
from .grid_graph import NeighborMode
from .model import (
    AdamState, LossConfig, SynthDataset, ToyModel,
    build_toy_model, extract_embeddings, make_synth_dataset, train
)
from .retrieval_eval import RankingResult, evaluate

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["setting", "seed", "mAP", "rank1"]


@dataclass
class Experiment:
    """Everything one training run needs, built from a RunConfig."""
    model: ToyModel
    data: SynthDataset
    loss_cfg: LossConfig
    optimizer: AdamState
    seed: int


def prepare_experiment(
    config: RunConfig,
    seed: Optional[int] = None,
    depth: Optional[int] = None,
    mode: Optional[str] = None
) -> Experiment:
    """
    Build dataset, model, loss and optimizer; ``depth`` and ``mode`` override the config.
    """
    seed = config.seed if seed is None else seed
    depth = config.depth if depth is None else depth
    mode = NeighborMode.parse(mode or config.neighbor_mode)

    shape = (config.in_channels, config.height, config.width)
    data = make_synth_dataset(
        seed, config.num_ids, config.per_id, shape,
        occlusion_prob=config.occlusion_prob, max_shift=config.max_shift,
        camera_noise=tuple(config.camera_noise)
    )
    model = build_toy_model(
        in_channels=config.in_channels,
        height=config.height,
        width=config.width,
        embed_dim=config.embed_dim,
        num_classes=config.num_ids,
        depth=depth,
        mode=mode,
        reduced_dim=config.effective_reduced_dim,
        seed=seed,
        self_loops=config.self_loops,
        literal_softmax=config.literal_softmax,
        value_projection=config.value_projection
    )
    loss_cfg = LossConfig.create(
        config.num_ids, config.embed_dim,
        beta=config.beta, margin=config.margin, smoothing=config.smoothing
    )
    optimizer = AdamState(lr=config.lr, weight_decay=config.weight_decay, warmup_iters=config.warmup_iters)
    return Experiment(model=model, data=data, loss_cfg=loss_cfg, optimizer=optimizer, seed=seed)


def run_experiment(config: RunConfig, experiment: Experiment) -> pd.DataFrame:
    """Train for ``config.epochs`` and return the training log."""
    return train(
        experiment.model, experiment.data, experiment.loss_cfg, experiment.optimizer,
        config.epochs, batch_p=config.batch_p, batch_k=config.batch_k, seed=experiment.seed
    )


def evaluate_experiment(config: RunConfig, experiment: Experiment) -> RankingResult:
    """Rank the gallery split for every query split sample."""
    q_images, q_frame = experiment.data.split("query")
    g_images, g_frame = experiment.data.split("gallery")
    query = extract_embeddings(experiment.model, q_images, q_frame, role="query")
    gallery = extract_embeddings(experiment.model, g_images, g_frame, role="gallery")
    return evaluate(query, gallery, config.metric)


def _sweep_row(config: RunConfig, setting, seed: int, depth: int, mode: str) -> dict:
    experiment = prepare_experiment(config, seed=seed, depth=depth, mode=mode)
    run_experiment(config, experiment)
    result = evaluate_experiment(config, experiment)
    logger.info("sweep setting=%s seed=%d mAP=%.4f rank1=%.4f", setting, seed, result.mAP, result.cmc_at(1))
    return {"setting": setting, "seed": seed, "mAP": result.mAP, "rank1": result.cmc_at(1)}


def run_layer_sweep(config: RunConfig) -> pd.DataFrame:
    """Train and evaluate every depth in ``sweep_layers`` for every seed."""
    rows = [
        _sweep_row(config, depth, seed, depth, config.neighbor_mode)
        for depth in config.sweep_layers
        for seed in config.seeds
    ]
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def run_neighbor_sweep(config: RunConfig) -> pd.DataFrame:
    """
    Train and evaluate every mode in ``sweep_neighbors`` for every seed.

    Uses the configured depth, at least one layer so the graph matters.
    """
    depth = max(1, config.depth)
    rows = [
        _sweep_row(config, mode, seed, depth, mode)
        for mode in config.sweep_neighbors
        for seed in config.seeds
    ]
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def summarize_sweep(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean mAP and rank-1 per setting, in sweep order."""
    summary = frame.groupby("setting", sort=False)[["mAP", "rank1"]].mean().reset_index()
    summary["seeds"] = frame.groupby("setting", sort=False).size().to_numpy()
    return summary
