"""Dense float64 tensors with exact reverse-mode gradients recorded on an explicit tape.

Layout conventions used throughout the package:
    feature maps   (C, H, W)  or batched (B, C, H, W)
    node matrices  (N, C)     or batched (B, N, C)
with node id i = row * W + col.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import special

logger = logging.getLogger(__name__)

BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

BN_MODES = ("training", "evaluation")


class ShapeError(ValueError):
    """Raised when operand shapes are inconsistent."""
    pass


class GradientError(RuntimeError):
    """Raised when gradients cannot be computed or are not available."""
    pass


class UninitializedStatisticsError(RuntimeError):
    """Raised when evaluation-mode batch norm runs before any statistics exist."""
    pass


def _as_buffer(data: Any) -> np.ndarray:
    array = np.asarray(data, dtype=np.float64)
    if not array.flags.c_contiguous:
        array = array.copy(order="C")
    return array


class Tensor:
    """
    Contiguous row-major float64 buffer, optionally bound to a ComputeTape.

    A tensor created directly is a constant. Tensors produced by operations on
    taped inputs carry the tape and the id of the node that produced them.
    """

    __slots__ = ("data", "tape", "node_id")

    def __init__(
        self,
        data: Any,
        tape: Optional["ComputeTape"] = None,
        node_id: Optional[int] = None
    ):
        self.data = _as_buffer(data)
        if any(extent < 1 for extent in self.data.shape):
            raise ShapeError(f"Tensor extents must be >= 1, got {self.data.shape}")
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def __repr__(self) -> str:
        bound = f", node={self.node_id}" if self.tape is not None else ""
        return f"Tensor(shape={self.shape}{bound})"


@dataclass(eq=False)
class Parameter:
    """Learnable value with a gradient buffer of identical shape."""
    name: str
    value: Tensor
    grad: Optional[Tensor] = None
    grad_populated: bool = False

    def __post_init__(self):
        if not isinstance(self.value, Tensor):
            self.value = Tensor(self.value)
        if self.grad is None:
            self.grad = Tensor(np.zeros(self.value.shape))
        if self.grad.shape != self.value.shape:
            raise ShapeError(
                f"Gradient shape {self.grad.shape} does not match value shape {self.value.shape}"
            )

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad.data[...] = 0.0
        self.grad_populated = False

    def accumulate(self, grad: np.ndarray) -> None:
        self.grad.data[...] += np.reshape(grad, self.shape)
        self.grad_populated = True


@dataclass
class TapeNode:
    """One recorded operation."""
    op: str
    inputs: Tuple[Optional[int], ...]
    output: int
    saved: Dict[str, Any]
    backward: BackwardRule


class ComputeTape:
    """
    Ordered record of operations for one forward pass.

    Nodes are appended in execution order, so every node's inputs precede it
    and a single reverse sweep visits each node once. A tape is single-writer.
    """

    def __init__(self):
        self.nodes: List[TapeNode] = []
        self._next_id = 0
        self._leaves: Dict[int, Parameter] = {}
        self._watched: Dict[int, Tensor] = {}

    def _new_id(self) -> int:
        node_id = self._next_id
        self._next_id += 1
        return node_id

    def watch(self, param: Parameter) -> Tensor:
        """Bind a parameter to this tape; repeated calls return the same leaf."""
        key = id(param)
        if key not in self._watched:
            leaf = Tensor(param.value.data, tape=self, node_id=self._new_id())
            self._leaves[leaf.node_id] = param
            self._watched[key] = leaf
        return self._watched[key]

    def constant(self, data: Union[Tensor, np.ndarray, float]) -> Tensor:
        """Bind a constant input to this tape (its gradient is discarded)."""
        if isinstance(data, Tensor):
            data = data.data
        return Tensor(data, tape=self, node_id=self._new_id())

    def record(
        self,
        op: str,
        inputs: Sequence[Tensor],
        value: np.ndarray,
        backward: BackwardRule,
        saved: Optional[Dict[str, Any]] = None
    ) -> Tensor:
        out = Tensor(value, tape=self, node_id=self._new_id())
        self.nodes.append(TapeNode(
            op=op,
            inputs=tuple(t.node_id if t.tape is self else None for t in inputs),
            output=out.node_id,
            saved=saved or {},
            backward=backward
        ))
        return out

    def backward(self, loss: Tensor) -> Dict[str, np.ndarray]:
        """
        Accumulate d(loss)/d(param) into every parameter watched on this tape.

        Gradients add onto whatever the parameters already hold, so calling
        backward twice without zeroing doubles them.

        Returns:
            Dict mapping parameter names to this call's gradient contribution
        """
        if loss.tape is not self:
            raise GradientError("Loss was not produced on this tape")
        if loss.size != 1:
            raise GradientError(f"Loss must be a scalar, got shape {loss.shape}")

        grads: Dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}

        for node in reversed(self.nodes):
            upstream = grads.pop(node.output, None)
            if upstream is None:
                continue
            for input_id, grad in zip(node.inputs, node.backward(upstream)):
                if input_id is None or grad is None:
                    continue
                if input_id in grads:
                    grads[input_id] = grads[input_id] + grad
                else:
                    grads[input_id] = grad

        contributions = {}
        for leaf_id, param in self._leaves.items():
            grad = grads.get(leaf_id)
            if grad is None:
                grad = np.zeros(param.shape)
            param.accumulate(grad)
            contributions[param.name] = np.reshape(grad, param.shape)

        logger.debug("Backward over %d nodes into %d parameters", len(self.nodes), len(contributions))
        return contributions


@dataclass(eq=False)
class BatchNormState:
    """Per-channel scale/shift plus running statistics."""
    gamma: Parameter
    beta_shift: Parameter
    running_mean: Optional[np.ndarray] = None
    running_var: Optional[np.ndarray] = None
    momentum: float = 0.1
    epsilon: float = 1e-5
    mode: str = "training"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.mode not in BN_MODES:
            raise ValueError(f"Unknown mode: {self.mode}")
        if self.gamma.shape != self.beta_shift.shape or len(self.gamma.shape) != 1:
            raise ShapeError(
                f"gamma {self.gamma.shape} and beta {self.beta_shift.shape} must be equal 1-D shapes"
            )

    @classmethod
    def create(
        cls,
        name: str,
        channels: int,
        momentum: float = 0.1,
        epsilon: float = 1e-5
    ) -> "BatchNormState":
        return cls(
            gamma=Parameter(f"{name}.gamma", Tensor(np.ones(channels))),
            beta_shift=Parameter(f"{name}.beta", Tensor(np.zeros(channels))),
            momentum=momentum,
            epsilon=epsilon
        )

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]

    @property
    def initialized(self) -> bool:
        return self.running_mean is not None

    def parameters(self) -> List[Parameter]:
        return [self.gamma, self.beta_shift]

    def seed_running_stats(self, mean: np.ndarray, var: np.ndarray) -> None:
        mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        var = np.asarray(var, dtype=np.float64).reshape(-1)
        if mean.shape != (self.channels,) or var.shape != (self.channels,):
            raise ShapeError(f"Running stats must have shape ({self.channels},)")
        if np.any(var < 0):
            raise ValueError("running_var must be >= 0")
        self.running_mean = mean.copy()
        self.running_var = var.copy()

    def _update_running(self, mean: np.ndarray, var: np.ndarray) -> None:
        if self.running_mean is None:
            self.running_mean = mean.copy()
            self.running_var = var.copy()
            return
        m = self.momentum
        self.running_mean = (1 - m) * self.running_mean + m * mean
        self.running_var = (1 - m) * self.running_var + m * var


TensorLike = Union[Tensor, Parameter, np.ndarray, float]


def _bind(*values: TensorLike) -> Tuple[Optional[ComputeTape], List[Tensor]]:
    """Find the single tape shared by the inputs and bind parameters to it."""
    tapes = {}
    for v in values:
        if isinstance(v, Tensor) and v.tape is not None:
            tapes[id(v.tape)] = v.tape
    if len(tapes) > 1:
        raise GradientError("Operation inputs were recorded on different tapes")
    tape = next(iter(tapes.values()), None)

    bound = []
    for v in values:
        if isinstance(v, Parameter):
            bound.append(tape.watch(v) if tape is not None else v.value)
        elif isinstance(v, Tensor):
            bound.append(v)
        else:
            bound.append(Tensor(v))
    return tape, bound


def _emit(
    tape: Optional[ComputeTape],
    op: str,
    inputs: Sequence[Tensor],
    value: np.ndarray,
    backward: BackwardRule,
    **saved: Any
) -> Tensor:
    if tape is None:
        return Tensor(value)
    return tape.record(op, inputs, value, backward, saved)


def custom_op(
    op: str,
    inputs: Sequence[TensorLike],
    forward: Callable[..., Tuple[np.ndarray, BackwardRule]]
) -> Tensor:
    """
    Record an operation whose forward value and backward rule the caller supplies.

    Args:
        op: Operation name stored on the tape
        inputs: Operand tensors or parameters
        forward: Called with the operands' arrays; returns (value, backward rule)

    Returns:
        Output tensor, taped when any input is taped
    """
    tape, bound = _bind(*inputs)
    value, backward = forward(*(t.data for t in bound))
    return _emit(tape, op, bound, value, backward)


def _swap(array: np.ndarray) -> np.ndarray:
    return np.swapaxes(array, -1, -2)


def _image_to_nodes(array: np.ndarray) -> np.ndarray:
    *lead, c, h, w = array.shape
    return np.ascontiguousarray(_swap(array.reshape(*lead, c, h * w)))


def _nodes_to_image(array: np.ndarray, hw: Tuple[int, int]) -> np.ndarray:
    *lead, n, c = array.shape
    return np.ascontiguousarray(_swap(array)).reshape(*lead, c, hw[0], hw[1])


def _affine(nodes: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    return nodes @ np.ascontiguousarray(w.T) + b


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    """Matrix product (m×k)·(k×n); either operand may carry a leading batch axis."""
    tape, (a, b) = _bind(a, b)
    if a.ndim not in (2, 3) or b.ndim not in (2, 3) or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    if a.ndim == 3 and b.ndim == 3 and a.shape[0] != b.shape[0]:
        raise ShapeError(f"matmul: batch sizes differ in {a.shape} and {b.shape}")

    a_data, b_data = a.data, b.data

    def backward(g):
        da = g @ _swap(b_data)
        db = _swap(a_data) @ g
        if a_data.ndim == 2 and da.ndim == 3:
            da = da.sum(axis=0)
        if b_data.ndim == 2 and db.ndim == 3:
            db = db.sum(axis=0)
        return da, db

    return _emit(tape, "matmul", [a, b], a_data @ b_data, backward)


def transpose(x: TensorLike) -> Tensor:
    """Swap the last two axes into a new buffer."""
    tape, (x,) = _bind(x)
    if x.ndim < 2:
        raise ShapeError(f"transpose needs at least 2 axes, got {x.shape}")
    return _emit(
        tape, "transpose", [x], np.ascontiguousarray(_swap(x.data)),
        lambda g: (np.ascontiguousarray(_swap(g)),)
    )


def reshape(x: TensorLike, shape: Sequence[int]) -> Tensor:
    """Reinterpret the buffer with a new shape; element order is unchanged."""
    tape, (x,) = _bind(x)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != x.size:
        raise ShapeError(f"Cannot reshape {x.shape} to {shape}")
    original = x.shape
    return _emit(tape, "reshape", [x], x.data.reshape(shape), lambda g: (g.reshape(original),))


def transf(x: TensorLike, hw: Optional[Tuple[int, int]] = None) -> Tensor:
    """
    Convert between image layout and node layout.

    Without ``hw`` the input is a (C,H,W) map (optionally batched) and the
    result is the (N,C) node matrix with node id row*W + col. With ``hw`` the
    input is an (N,C) node matrix and the result is the (C,H,W) map.
    """
    tape, (x,) = _bind(x)

    if hw is None:
        if x.ndim not in (3, 4):
            raise ShapeError(
                f"transf of a node matrix {x.shape} needs a declared (H, W)"
            )
        original = x.shape
        h, w = original[-2:]
        return _emit(
            tape, "transf", [x], _image_to_nodes(x.data),
            lambda g: (_nodes_to_image(g, (h, w)),)
        )

    h, w = int(hw[0]), int(hw[1])
    if x.ndim not in (2, 3) or h * w != x.shape[-2]:
        raise ShapeError(f"transf: declared (H, W)=({h}, {w}) does not match nodes {x.shape}")
    return _emit(
        tape, "transf", [x], _nodes_to_image(x.data, (h, w)),
        lambda g: (_image_to_nodes(g),)
    )


def relu(x: TensorLike) -> Tensor:
    """Elementwise max(0, x); the subgradient at exactly 0 is 0."""
    tape, (x,) = _bind(x)
    positive = x.data > 0
    return _emit(tape, "relu", [x], np.where(positive, x.data, 0.0), lambda g: (g * positive,))


def masked_row_softmax(scores: TensorLike, mask: Any, literal: bool = False) -> Tensor:
    """
    Row softmax restricted to the entries of an adjacency mask.

    Off-mask entries are exactly 0 and a row with an empty mask is all zeros.
    With ``literal=True`` the softmax runs over every entry of (mask ⊙ scores),
    so non-edges take part with logit 0.

    Args:
        scores: (N,N) or (B,N,N) scores
        mask: Adjacency over N nodes
        literal: Softmax over the full masked product instead of the support

    Returns:
        Attention weights of the same shape as ``scores``
    """
    tape, (scores,) = _bind(scores)
    n = mask.n
    if scores.ndim not in (2, 3) or scores.shape[-1] != scores.shape[-2] or scores.shape[-1] != n:
        raise ShapeError(f"Scores {scores.shape} do not match a mask over {n} nodes")

    support = mask.to_dense()
    s = scores.data

    if literal:
        probs = special.softmax(np.where(support, s, 0.0), axis=-1)
    else:
        masked = np.where(support, s, -np.inf)
        row_max = masked.max(axis=-1, keepdims=True)
        row_max = np.where(np.isfinite(row_max), row_max, 0.0)
        expo = np.where(support, np.exp(masked - row_max), 0.0)
        denom = expo.sum(axis=-1, keepdims=True)
        probs = np.divide(expo, denom, out=np.zeros_like(expo), where=denom > 0)

    def backward(g):
        dz = probs * (g - (g * probs).sum(axis=-1, keepdims=True))
        return (np.where(support, dz, 0.0),)

    return _emit(tape, "masked_row_softmax", [scores], probs, backward, literal=literal)


def linear(x: TensorLike, w: TensorLike, b: TensorLike) -> Tensor:
    """Node-wise affine map x·Wᵀ + b for (N,Din) or (B,N,Din) node matrices."""
    tape, (x, w, b) = _bind(x, w, b)
    if w.ndim != 2 or x.ndim not in (2, 3) or x.shape[-1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ShapeError(f"linear: input {x.shape}, weight {w.shape}, bias {b.shape} disagree")
    x_data, w_data = x.data, w.data
    d_in, d_out = w_data.shape[1], w_data.shape[0]

    def backward(g):
        flat_g = g.reshape(-1, d_out)
        dw = flat_g.T @ x_data.reshape(-1, d_in)
        return g @ w_data, dw, flat_g.sum(axis=0)

    return _emit(tape, "linear", [x, w, b], _affine(x_data, w_data, b.data), backward)


def conv1x1(f: TensorLike, w: TensorLike, b: TensorLike) -> Tensor:
    """
    Pointwise convolution: out[:, r, c] = W·f[:, r, c] + b.

    Computed exactly as transf → linear → transf, so the two agree bit for bit.
    """
    tape, (f, w, b) = _bind(f, w, b)
    if f.ndim not in (3, 4) or w.ndim != 2 or f.shape[-3] != w.shape[1] or b.shape != (w.shape[0],):
        raise ShapeError(f"conv1x1: input {f.shape}, weight {w.shape}, bias {b.shape} disagree")
    hw = f.shape[-2:]
    nodes = _image_to_nodes(f.data)
    w_data = w.data
    d_in, d_out = w_data.shape[1], w_data.shape[0]

    def backward(g):
        g_nodes = _image_to_nodes(g).reshape(-1, d_out)
        dw = g_nodes.T @ nodes.reshape(-1, d_in)
        d_nodes = g_nodes.reshape(nodes.shape[:-1] + (d_out,)) @ w_data
        return _nodes_to_image(d_nodes, hw), dw, g_nodes.sum(axis=0)

    value = _nodes_to_image(_affine(nodes, w_data, b.data), hw)
    return _emit(tape, "conv1x1", [f, w, b], value, backward)


def batchnorm(x: TensorLike, state: BatchNormState, channel_axis: Optional[int] = None) -> Tensor:
    """
    Batch normalization over every axis except the channel axis.

    The channel axis defaults to -3 for feature maps (3-D or 4-D) and -1 for
    2-D inputs; pass ``channel_axis=-1`` for batched node matrices. Training
    mode normalizes with the batch statistics and updates the running ones;
    evaluation mode uses the running statistics.

    Raises:
        UninitializedStatisticsError: Evaluation mode with no running statistics
    """
    tape, (x, gamma, beta) = _bind(x, state.gamma, state.beta_shift)
    if channel_axis is None:
        channel_axis = -1 if x.ndim == 2 else -3
    if x.ndim < 2 or x.ndim < -channel_axis:
        raise ShapeError(f"batchnorm: input {x.shape} has no channel axis {channel_axis}")
    axis = channel_axis % x.ndim
    channels = x.shape[axis]
    if channels != state.channels:
        raise ShapeError(f"batchnorm: input {x.shape} has {channels} channels, state has {state.channels}")

    reduce_axes = tuple(i for i in range(x.ndim) if i != axis)
    bshape = [1] * x.ndim
    bshape[axis] = channels
    count = x.size // channels
    data = x.data
    g_b = gamma.data.reshape(bshape)

    if state.mode == "training":
        mean = data.mean(axis=reduce_axes, keepdims=True)
        centered = data - mean
        var = (centered ** 2).mean(axis=reduce_axes, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + state.epsilon)
        xhat = centered * inv_std
        unbiased = var * count / (count - 1) if count > 1 else var
        state._update_running(mean.reshape(-1), unbiased.reshape(-1))

        def backward(g):
            dxhat = g * g_b
            dx = inv_std / count * (
                count * dxhat
                - dxhat.sum(axis=reduce_axes, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=reduce_axes, keepdims=True)
            )
            return dx, (g * xhat).sum(axis=reduce_axes), g.sum(axis=reduce_axes)
    else:
        if not state.initialized:
            raise UninitializedStatisticsError("uninitialized running statistics")
        inv_std = 1.0 / np.sqrt(state.running_var.reshape(bshape) + state.epsilon)
        xhat = (data - state.running_mean.reshape(bshape)) * inv_std

        def backward(g):
            return g * g_b * inv_std, (g * xhat).sum(axis=reduce_axes), g.sum(axis=reduce_axes)

    value = g_b * xhat + beta.data.reshape(bshape)
    return _emit(tape, "batchnorm", [x, gamma, beta], value, backward, mode=state.mode)


def scalar_mix(a: TensorLike, x: TensorLike, y: TensorLike) -> Tensor:
    """α·x + (1−α)·y with α = sigmoid(a)."""
    tape, (a, x, y) = _bind(a, x, y)
    if a.size != 1:
        raise ShapeError(f"scalar_mix: mixing parameter must be scalar, got {a.shape}")
    if x.shape != y.shape:
        raise ShapeError(f"scalar_mix: {x.shape} and {y.shape} differ")
    alpha = float(special.expit(a.data.reshape(-1)[0]))
    x_data, y_data = x.data, y.data
    a_shape = a.shape

    def backward(g):
        da = np.sum(g * (x_data - y_data)) * alpha * (1.0 - alpha)
        return np.full(a_shape, da), alpha * g, (1.0 - alpha) * g

    return _emit(tape, "scalar_mix", [a, x, y], alpha * x_data + (1.0 - alpha) * y_data, backward)


def global_avg_pool(f: TensorLike) -> Tensor:
    """Per-channel spatial mean: (C,H,W) → (C), (B,C,H,W) → (B,C)."""
    tape, (f,) = _bind(f)
    if f.ndim not in (3, 4):
        raise ShapeError(f"global_avg_pool needs a feature map, got {f.shape}")
    shape = f.shape
    area = shape[-1] * shape[-2]
    return _emit(
        tape, "global_avg_pool", [f], f.data.mean(axis=(-2, -1)),
        lambda g: (np.broadcast_to(g[..., None, None] / area, shape).copy(),)
    )


def add(a: TensorLike, b: TensorLike) -> Tensor:
    tape, (a, b) = _bind(a, b)
    if a.shape != b.shape:
        raise ShapeError(f"add: {a.shape} and {b.shape} differ")
    return _emit(tape, "add", [a, b], a.data + b.data, lambda g: (g, g))


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    tape, (a, b) = _bind(a, b)
    if a.shape != b.shape:
        raise ShapeError(f"mul: {a.shape} and {b.shape} differ")
    a_data, b_data = a.data, b.data
    return _emit(tape, "mul", [a, b], a_data * b_data, lambda g: (g * b_data, g * a_data))


def scale(x: TensorLike, factor: float) -> Tensor:
    tape, (x,) = _bind(x)
    factor = float(factor)
    return _emit(tape, "scale", [x], x.data * factor, lambda g: (g * factor,))


def sum_all(x: TensorLike) -> Tensor:
    tape, (x,) = _bind(x)
    shape = x.shape
    return _emit(tape, "sum_all", [x], np.asarray(x.data.sum()), lambda g: (np.full(shape, float(g)),))


def _evaluate_loss(loss_fn: Callable[[ComputeTape], Tensor]) -> float:
    value = loss_fn(ComputeTape())
    if value.size != 1:
        raise GradientError(f"Checked function must return a scalar, got shape {value.shape}")
    result = value.item()
    if not np.isfinite(result):
        raise GradientError(f"Checked function returned a non-finite value: {result}")
    return result


def finite_diff_check(
    loss_fn: Callable[[ComputeTape], Tensor],
    params: Sequence[Parameter],
    step: float = 1e-5
) -> float:
    """
    Compare tape gradients against central finite differences.

    Args:
        loss_fn: Builds a scalar loss on the given tape (watching ``params``)
        params: Parameters whose gradients are checked
        step: Perturbation size h in (f(p+h) - f(p-h)) / 2h

    Returns:
        Maximum relative error |g_ad - g_fd| / max(1e-12, |g_ad| + |g_fd|)
    """
    if step <= 0:
        raise ValueError(f"step must be > 0, got {step}")

    for p in params:
        p.zero_grad()
    tape = ComputeTape()
    loss = loss_fn(tape)
    if not np.all(np.isfinite(loss.data)):
        raise GradientError("Checked function returned a non-finite value")
    tape.backward(loss)

    worst = 0.0
    for p in params:
        analytic = p.grad.data.copy()
        values = p.value.data
        numeric = np.zeros_like(values)
        for index in np.ndindex(values.shape):
            original = values[index]
            values[index] = original + step
            plus = _evaluate_loss(loss_fn)
            values[index] = original - step
            minus = _evaluate_loss(loss_fn)
            values[index] = original
            numeric[index] = (plus - minus) / (2.0 * step)

        rel = np.abs(analytic - numeric) / np.maximum(1e-12, np.abs(analytic) + np.abs(numeric))
        if rel.size:
            worst = max(worst, float(rel.max()))
        logger.debug("Gradient check %s: max rel err %.3e", p.name, float(rel.max()) if rel.size else 0.0)

    return worst
