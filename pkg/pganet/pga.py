"""Pixel-wise graph attention layers and residual stacks."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import special

from .grid_graph import Adjacency, GridSpec, NeighborMode, generate_grid_graph
from .tensor_core import (
    BatchNormState, Parameter, ShapeError, Tensor,
    batchnorm, conv1x1, linear, masked_row_softmax, matmul, relu,
    reshape, scalar_mix, transf, transpose
)

logger = logging.getLogger(__name__)

PIXEL = "pixel"
CHANNEL = "channel"


class ConfigurationError(ValueError):
    """Raised when layers of a stack cannot be composed."""
    pass


def default_reduced_dim(features: int) -> int:
    return max(1, features // 2)


def _as_tensor(f: Union[Tensor, np.ndarray]) -> Tensor:
    return f if isinstance(f, Tensor) else Tensor(f)


def _to_nodes(f: Tensor, layout: str) -> Tensor:
    if layout == PIXEL:
        return transf(f)
    c, h, w = f.shape[-3:]
    return reshape(f, f.shape[:-3] + (c, h * w))


def _to_map(nodes: Tensor, layout: str, shape: Tuple[int, ...]) -> Tensor:
    if layout == PIXEL:
        return transf(nodes, hw=shape[-2:])
    return reshape(nodes, shape)


@dataclass(eq=False)
class TransferFunction:
    """
    θ / φ: affine map, batch norm and ReLU producing an (N, D′) node matrix.

    In pixel layout the affine map is a 1×1 convolution over the (C,H,W) map;
    in channel layout each channel is a node whose features are its flattened
    H·W values.
    """
    weight: Parameter
    bias: Parameter
    bn: BatchNormState
    layout: str = PIXEL

    @classmethod
    def create(
        cls,
        name: str,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        layout: str = PIXEL
    ) -> "TransferFunction":
        if out_dim < 1:
            raise ConfigurationError(f"Transfer output dimension must be >= 1, got {out_dim}")
        weight = rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(out_dim, in_dim))
        return cls(
            weight=Parameter(f"{name}.weight", Tensor(weight)),
            bias=Parameter(f"{name}.bias", Tensor(np.zeros(out_dim))),
            bn=BatchNormState.create(f"{name}.bn", out_dim),
            layout=layout
        )

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def parameters(self) -> List[Parameter]:
        return [self.weight, self.bias] + self.bn.parameters()

    def __call__(self, f: Tensor) -> Tensor:
        if self.layout == PIXEL:
            return transf(relu(batchnorm(conv1x1(f, self.weight, self.bias), self.bn)))
        nodes = _to_nodes(f, CHANNEL)
        return relu(batchnorm(linear(nodes, self.weight, self.bias), self.bn, channel_axis=-1))


@dataclass(eq=False)
class PGALayer:
    """One attention layer bound to a graph over the pixels (or channels) of a fixed-size map."""
    theta: TransferFunction
    phi: TransferFunction
    alpha_raw: Parameter
    adjacency: Adjacency
    channels: int
    height: int
    width: int
    mode: NeighborMode = NeighborMode.FOUR
    literal_softmax: bool = False
    value_weight: Optional[Parameter] = None
    value_bias: Optional[Parameter] = None

    def __post_init__(self):
        self.mode = NeighborMode.parse(self.mode)
        if self.adjacency.n != self.node_count:
            raise ShapeError(
                f"Adjacency has {self.adjacency.n} nodes, layer expects {self.node_count}"
            )
        if self.theta.weight.shape != self.phi.weight.shape:
            raise ConfigurationError(
                f"theta {self.theta.weight.shape} and phi {self.phi.weight.shape} must match"
            )
        if self.theta.in_dim != self.node_features:
            raise ConfigurationError(
                f"Transfer input {self.theta.in_dim} does not match node features {self.node_features}"
            )

    @property
    def layout(self) -> str:
        return CHANNEL if self.mode.is_channel else PIXEL

    @property
    def node_count(self) -> int:
        return self.channels if self.mode.is_channel else self.height * self.width

    @property
    def node_features(self) -> int:
        return self.height * self.width if self.mode.is_channel else self.channels

    @property
    def map_shape(self) -> Tuple[int, int, int]:
        return (self.channels, self.height, self.width)

    @property
    def alpha(self) -> float:
        return float(special.expit(self.alpha_raw.value.item()))

    def parameters(self) -> List[Parameter]:
        params = self.theta.parameters() + self.phi.parameters() + [self.alpha_raw]
        if self.value_weight is not None:
            params += [self.value_weight, self.value_bias]
        return params

    def batchnorm_states(self) -> List[Tuple[str, BatchNormState]]:
        return [
            (self.theta.weight.name.rsplit(".", 1)[0] + ".bn", self.theta.bn),
            (self.phi.weight.name.rsplit(".", 1)[0] + ".bn", self.phi.bn)
        ]


def build_layer(
    name: str,
    channels: int,
    height: int,
    width: int,
    adjacency: Adjacency,
    mode: NeighborMode = NeighborMode.FOUR,
    reduced_dim: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    literal_softmax: bool = False,
    value_projection: bool = False
) -> PGALayer:
    """Create a layer with independent θ, φ and α = sigmoid(0) = 0.5."""
    mode = NeighborMode.parse(mode)
    rng = rng if rng is not None else np.random.default_rng(0)
    layout = CHANNEL if mode.is_channel else PIXEL
    features = height * width if mode.is_channel else channels
    out_dim = reduced_dim or default_reduced_dim(features)

    value_weight = value_bias = None
    if value_projection:
        value_weight = Parameter(
            f"{name}.value.weight",
            Tensor(rng.normal(0.0, 1.0 / np.sqrt(features), size=(features, features)))
        )
        value_bias = Parameter(f"{name}.value.bias", Tensor(np.zeros(features)))

    return PGALayer(
        theta=TransferFunction.create(f"{name}.theta", features, out_dim, rng, layout),
        phi=TransferFunction.create(f"{name}.phi", features, out_dim, rng, layout),
        alpha_raw=Parameter(f"{name}.alpha_raw", Tensor(np.zeros(()))),
        adjacency=adjacency,
        channels=channels,
        height=height,
        width=width,
        mode=mode,
        literal_softmax=literal_softmax,
        value_weight=value_weight,
        value_bias=value_bias
    )


@dataclass(eq=False)
class PGAStack:
    """Layers applied in sequence, all on the same graph and map shape."""
    layers: List[PGALayer] = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            return
        first = self.layers[0]
        for index, layer in enumerate(self.layers[1:], start=1):
            if layer.map_shape != first.map_shape or layer.mode is not first.mode:
                raise ConfigurationError(
                    f"Layer {index} has shape {layer.map_shape}/{layer.mode.value}, "
                    f"layer 0 has {first.map_shape}/{first.mode.value}"
                )
            if layer.adjacency != first.adjacency:
                raise ConfigurationError(f"Layer {index} uses a different adjacency")

    @property
    def depth(self) -> int:
        return len(self.layers)

    def parameters(self) -> List[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def batchnorm_states(self) -> List[Tuple[str, BatchNormState]]:
        return [item for layer in self.layers for item in layer.batchnorm_states()]

    def alphas(self) -> List[float]:
        return [layer.alpha for layer in self.layers]


def build_stack(
    depth: int,
    channels: int,
    height: int,
    width: int,
    mode: NeighborMode = NeighborMode.FOUR,
    reduced_dim: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    self_loops: bool = False,
    literal_softmax: bool = False,
    value_projection: bool = False,
    prefix: str = "pga"
) -> PGAStack:
    """
    Build ``depth`` independently parameterized layers sharing one graph.

    Args:
        depth: Number of layers (0 gives the identity stack)
        channels, height, width: Map shape the stack operates on
        mode: Graph over pixels, channels, or the fully connected comparison
        reduced_dim: D′ of θ/φ (None = half the node feature size)
        rng: Initialization generator
    """
    if depth < 0:
        raise ConfigurationError(f"depth must be >= 0, got {depth}")
    mode = NeighborMode.parse(mode)
    rng = rng if rng is not None else np.random.default_rng(0)
    adjacency = generate_grid_graph(GridSpec(h=height, w=width, c=channels), mode, self_loops=self_loops)
    layers = [
        build_layer(
            f"{prefix}.{index}", channels, height, width, adjacency, mode,
            reduced_dim, rng, literal_softmax, value_projection
        )
        for index in range(depth)
    ]
    logger.debug("Built %d-layer %s stack on %s", depth, mode.value, adjacency)
    return PGAStack(layers)


def correlation(f: Tensor, theta: TransferFunction, phi: TransferFunction) -> Tensor:
    """R = θ(F)·φ(F)ᵀ, an (N×N) score matrix (batched when F is)."""
    return matmul(theta(f), transpose(phi(f)))


def masked_attention(adjacency: Adjacency, r: Tensor, literal: bool = False) -> Tensor:
    """Ã = softmax(A ⊙ R), row-wise over each node's neighbors."""
    return masked_row_softmax(r, adjacency, literal=literal)


def propagate(a_tilde: Tensor, v: Tensor) -> Tensor:
    """Ṽ = ReLU(Ã·V)."""
    return relu(matmul(a_tilde, v))


def _check_input(layer: PGALayer, f: Tensor) -> None:
    if f.ndim not in (3, 4) or f.shape[-3:] != layer.map_shape:
        raise ShapeError(
            f"Layer expects maps of shape {layer.map_shape} "
            f"({layer.node_count} nodes), got {f.shape}"
        )


def pga_forward(
    layer: PGALayer,
    f: Union[Tensor, np.ndarray],
    attention_sink: Optional[List[np.ndarray]] = None
) -> Tensor:
    """
    PGA(F) = transf(softmax(A ⊙ R) · transf(F)).

    V is F in node layout (optionally through the value projection).
    When ``attention_sink`` is given, a copy of Ã is appended to it.
    """
    f = _as_tensor(f)
    _check_input(layer, f)
    a_tilde = masked_attention(layer.adjacency, correlation(f, layer.theta, layer.phi), layer.literal_softmax)
    if attention_sink is not None:
        attention_sink.append(a_tilde.data.copy())

    v = _to_nodes(f, layer.layout)
    if layer.value_weight is not None:
        v = linear(v, layer.value_weight, layer.value_bias)
    return _to_map(propagate(a_tilde, v), layer.layout, f.shape)


def residual_forward(
    layer: PGALayer,
    f: Union[Tensor, np.ndarray],
    attention_sink: Optional[List[np.ndarray]] = None
) -> Tensor:
    """F̃ = αF + (1−α)·PGA(F)."""
    f = _as_tensor(f)
    return scalar_mix(layer.alpha_raw, f, pga_forward(layer, f, attention_sink))


def stack_forward(
    stack: PGAStack,
    f: Union[Tensor, np.ndarray],
    attention_sink: Optional[List[np.ndarray]] = None
) -> Tensor:
    """Apply every layer's residual form in order; an empty stack returns F."""
    f = _as_tensor(f)
    for layer in stack.layers:
        f = residual_forward(layer, f, attention_sink)
    return f


def attention_to_frame(a_tilde: np.ndarray) -> pd.DataFrame:
    """Nonzero entries of one (N×N) attention matrix as row, col, weight."""
    a_tilde = np.asarray(a_tilde)
    if a_tilde.ndim != 2 or a_tilde.shape[0] != a_tilde.shape[1]:
        raise ShapeError(f"Expected a square attention matrix, got {a_tilde.shape}")
    rows, cols = np.nonzero(a_tilde)
    return pd.DataFrame({"row": rows, "col": cols, "weight": a_tilde[rows, cols]})
