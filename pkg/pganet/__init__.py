"""Pixel-wise graph attention on grid graphs, with a toy re-identification pipeline."""

from .tensor_core import (
    Tensor, Parameter, ComputeTape, BatchNormState,
    ShapeError, GradientError, UninitializedStatisticsError,
    finite_diff_check
)
from .grid_graph import (
    GridSpec, NeighborMode, EdgeList, Adjacency, GraphError,
    generate_grid_graph, adjacency_from_pairs, oracle_adjacency, bench_generation, size_ladder
)
from .pga import (
    TransferFunction, PGALayer, PGAStack, ConfigurationError,
    correlation, masked_attention, propagate, pga_forward, residual_forward, stack_forward,
    build_stack, attention_to_frame
)
from .model import (
    ToyModel, LossConfig, SynthDataset, AdamState,
    build_toy_model, model_forward, id_loss, triplet_loss, center_loss, total_loss,
    adam_step, make_synth_dataset, train, extract_embeddings, save_checkpoint, load_checkpoint
)
from .retrieval_eval import (
    EmbeddingSet, RankingResult, EvaluationError, pairwise_distances, evaluate, metrics_frame
)
from .config import RunConfig, ConfigError, load_run_config
from .run_store import RunStore, ArtifactRecord, ArtifactNotFoundError

__all__ = [
    'Tensor', 'Parameter', 'ComputeTape', 'BatchNormState',
    'ShapeError', 'GradientError', 'UninitializedStatisticsError', 'finite_diff_check',
    'GridSpec', 'NeighborMode', 'EdgeList', 'Adjacency', 'GraphError',
    'generate_grid_graph', 'adjacency_from_pairs', 'oracle_adjacency', 'bench_generation', 'size_ladder',
    'TransferFunction', 'PGALayer', 'PGAStack', 'ConfigurationError',
    'correlation', 'masked_attention', 'propagate', 'pga_forward', 'residual_forward', 'stack_forward',
    'build_stack', 'attention_to_frame',
    'ToyModel', 'LossConfig', 'SynthDataset', 'AdamState',
    'build_toy_model', 'model_forward', 'id_loss', 'triplet_loss', 'center_loss', 'total_loss',
    'adam_step', 'make_synth_dataset', 'train', 'extract_embeddings', 'save_checkpoint', 'load_checkpoint',
    'EmbeddingSet', 'RankingResult', 'EvaluationError', 'pairwise_distances', 'evaluate', 'metrics_frame',
    'RunConfig', 'ConfigError', 'load_run_config',
    'RunStore', 'ArtifactRecord', 'ArtifactNotFoundError'
]
