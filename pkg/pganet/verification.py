"""
Self-checks run by the ``verify`` command.

Each suite returns a SuiteReport; a suite passes when it has no failures.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import RunConfig
from .grid_graph import (
    Adjacency, EdgeList, GridSpec, NeighborMode,
    adjacency_from_pairs, generate_grid_graph, oracle_adjacency
)
from .model import LossConfig, build_toy_model, model_forward, total_loss
from .pga import build_stack, pga_forward, residual_forward, stack_forward
from .tensor_core import (
    ComputeTape, Parameter, Tensor,
    batchnorm, BatchNormState, conv1x1, finite_diff_check, global_avg_pool, linear,
    masked_row_softmax, matmul, mul, relu, scalar_mix, sum_all, transf
)

logger = logging.getLogger(__name__)

GRADIENT_TOLERANCE = 1e-4
ROW_SUM_TOLERANCE = 1e-9
SPOT_SIZES = [(16, 8), (32, 16)]
ORACLE_MODES = [NeighborMode.FOUR, NeighborMode.EIGHT, NeighborMode.TWO_CHANNEL]


@dataclass
class SuiteReport:
    """Outcome of one verification suite."""
    suite: str
    checks: int = 0
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, ok: bool, label: str) -> None:
        self.checks += 1
        if not ok:
            self.failures.append(label)
            logger.error("%s: check failed for %s", self.suite, label)


def reports_frame(reports: Sequence[SuiteReport]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "suite": r.suite,
                "checks": r.checks,
                "failures": len(r.failures),
                "status": "pass" if r.passed else "fail",
                "failed": "; ".join(r.failures)
            }
            for r in reports
        ],
        columns=["suite", "checks", "failures", "status", "failed"]
    )


def corrupt_adjacency(adjacency: Adjacency) -> Adjacency:
    """Drop the last directed edge (or add one to an edgeless graph)."""
    pairs = adjacency.to_edge_list()
    if len(pairs):
        edges = EdgeList(pairs.node[:-1], pairs.neighbor[:-1])
        return adjacency_from_pairs(edges, adjacency.n, symmetrize=False)
    return adjacency_from_pairs(EdgeList(np.array([0]), np.array([0])), adjacency.n, self_loops=True)


def _oracle_specs() -> Iterable[Tuple[GridSpec, NeighborMode]]:
    sizes = list(itertools.product(range(1, 9), range(1, 9))) + SPOT_SIZES
    for (h, w), mode in itertools.product(sizes, ORACLE_MODES):
        yield GridSpec(h=h, w=w, c=h * w), mode


def run_oracle_suite(corrupt_grid: Optional[Tuple[int, int]] = None) -> SuiteReport:
    """
    Compare the fast generator against the brute-force oracle on every grid up to 8×8 plus spot sizes.

    Args:
        corrupt_grid: (h, w) whose generated adjacency is damaged before the
            comparison, as a negative control
    """
    report = SuiteReport("oracle")
    for spec, mode in _oracle_specs():
        fast = generate_grid_graph(spec, mode)
        if corrupt_grid is not None and (spec.h, spec.w) == tuple(corrupt_grid):
            fast = corrupt_adjacency(fast)
        report.record(fast == oracle_adjacency(spec, mode), f"{spec.h}x{spec.w}/{mode.value}")
    return report


def random_adjacency(rng: np.random.Generator, max_nodes: int = 12) -> Adjacency:
    """Random symmetric graph; low densities leave isolated nodes."""
    n = int(rng.integers(1, max_nodes + 1))
    density = rng.uniform(0.0, 0.6)
    rows, cols = np.triu_indices(n, k=1)
    keep = rng.random(len(rows)) < density
    return adjacency_from_pairs(EdgeList(rows[keep], cols[keep]), n)


def run_attention_suite(seed: int = 0, instances: int = 100) -> SuiteReport:
    """Row sums, exact off-support zeros and empty rows of the masked softmax."""
    report = SuiteReport("attention")
    rng = np.random.default_rng(seed)
    for index in range(instances):
        adjacency = random_adjacency(rng)
        scores = rng.normal(0.0, 3.0, size=(adjacency.n, adjacency.n))
        weights = masked_row_softmax(Tensor(scores), adjacency).data
        support = adjacency.to_dense()
        has_neighbors = support.any(axis=1)

        sums_ok = np.allclose(weights[has_neighbors].sum(axis=1), 1.0, atol=ROW_SUM_TOLERANCE, rtol=0.0)
        report.record(bool(sums_ok), f"instance {index}: row sums")
        report.record(bool(np.all(weights[~support] == 0.0)), f"instance {index}: off-support zeros")
        report.record(bool(np.all(weights[~has_neighbors] == 0.0)), f"instance {index}: empty rows")
    return report


def _away_from_zero(rng: np.random.Generator, shape, floor: float = 1e-3) -> np.ndarray:
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < floor, np.sign(x + 1e-12) * floor * 10, x)


def _op_checks(rng: np.random.Generator) -> List[Tuple[str, Callable[[ComputeTape], Tensor], List[Parameter]]]:
    """Scalar losses through each differentiable op, with the parameters they exercise."""
    checks = []

    a = Parameter("a", Tensor(rng.normal(size=(4, 3))))
    b = Parameter("b", Tensor(rng.normal(size=(3, 2))))
    coef = Tensor(rng.normal(size=(4, 2)))
    checks.append(("matmul", lambda t: sum_all(mul(matmul(t.watch(a), b), coef)), [a, b]))

    x = Parameter("x", Tensor(rng.normal(size=(2, 3, 4))))
    coef_t = Tensor(rng.normal(size=(12, 2)))
    checks.append(("transf", lambda t: sum_all(mul(transf(t.watch(x)), coef_t)), [x]))

    r = Parameter("r", Tensor(_away_from_zero(rng, (5, 4))))
    coef_r = Tensor(rng.normal(size=(5, 4)))
    checks.append(("relu", lambda t: sum_all(mul(relu(t.watch(r)), coef_r)), [r]))

    grid = generate_grid_graph(GridSpec(h=2, w=3), NeighborMode.FOUR)
    s = Parameter("s", Tensor(rng.normal(size=(6, 6))))
    coef_s = Tensor(rng.normal(size=(6, 6)))
    checks.append(("masked_row_softmax", lambda t: sum_all(mul(masked_row_softmax(t.watch(s), grid), coef_s)), [s]))
    checks.append((
        "masked_row_softmax_literal",
        lambda t: sum_all(mul(masked_row_softmax(t.watch(s), grid, literal=True), coef_s)), [s]
    ))

    nodes = Parameter("nodes", Tensor(rng.normal(size=(5, 3))))
    lw = Parameter("lw", Tensor(rng.normal(size=(2, 3))))
    lb = Parameter("lb", Tensor(rng.normal(size=2)))
    coef_l = Tensor(rng.normal(size=(5, 2)))
    checks.append(("linear", lambda t: sum_all(mul(linear(t.watch(nodes), lw, lb), coef_l)), [nodes, lw, lb]))

    f = Parameter("f", Tensor(rng.normal(size=(3, 2, 2))))
    cw = Parameter("cw", Tensor(rng.normal(size=(2, 3))))
    cb = Parameter("cb", Tensor(rng.normal(size=2)))
    coef_c = Tensor(rng.normal(size=(2, 2, 2)))
    checks.append(("conv1x1", lambda t: sum_all(mul(conv1x1(t.watch(f), cw, cb), coef_c)), [f, cw, cb]))

    bn_in = Parameter("bn_in", Tensor(rng.normal(size=(2, 2, 3))))
    state = BatchNormState.create("bn", 2)
    state.gamma.value.data[...] = rng.uniform(0.5, 1.5, size=2)
    coef_b = Tensor(rng.normal(size=(2, 2, 3)))
    checks.append((
        "batchnorm",
        lambda t: sum_all(mul(batchnorm(t.watch(bn_in), state), coef_b)),
        [bn_in, state.gamma, state.beta_shift]
    ))

    mix = Parameter("mix", Tensor(np.asarray(rng.normal())))
    mx = Parameter("mx", Tensor(rng.normal(size=(2, 3))))
    my = Parameter("my", Tensor(rng.normal(size=(2, 3))))
    coef_m = Tensor(rng.normal(size=(2, 3)))
    checks.append(("scalar_mix", lambda t: sum_all(mul(scalar_mix(t.watch(mix), mx, my), coef_m)), [mix, mx, my]))

    pool = Parameter("pool", Tensor(rng.normal(size=(3, 2, 2))))
    coef_p = Tensor(rng.normal(size=3))
    checks.append(("global_avg_pool", lambda t: sum_all(mul(global_avg_pool(t.watch(pool)), coef_p)), [pool]))
    return checks


def _checkable(params: Sequence[Parameter]) -> List[Parameter]:
    """
    Drop biases that feed a training-mode batch norm.

    Their true gradient is exactly zero, so finite differences only see
    rounding noise and the relative error is meaningless.
    """
    feeds_batchnorm = (".theta.", ".phi.", "stem.")
    return [
        p for p in params
        if not (p.name.endswith(".bias") and any(tag in "." + p.name for tag in feeds_batchnorm))
    ]


def _layer_checks(rng: np.random.Generator, seed: int):
    checks = []

    layer_input = Parameter("input", Tensor(rng.uniform(0.1, 1.0, size=(2, 2, 2))))
    stack = build_stack(1, 2, 2, 2, NeighborMode.FOUR, rng=np.random.default_rng(seed))
    layer = stack.layers[0]
    layer.alpha_raw.value.data[...] = rng.normal()
    coef = Tensor(rng.normal(size=(2, 2, 2)))
    checks.append((
        "pga_layer",
        lambda t: sum_all(mul(residual_forward(layer, t.watch(layer_input)), coef)),
        [layer_input] + _checkable(layer.parameters())
    ))

    deep_input = Parameter("deep_input", Tensor(rng.uniform(0.1, 1.0, size=(2, 3, 3))))
    deep = build_stack(3, 2, 3, 3, NeighborMode.FOUR, rng=np.random.default_rng(seed + 1))
    coef_d = Tensor(rng.normal(size=(2, 3, 3)))
    checks.append((
        "pga_stack_depth3",
        lambda t: sum_all(mul(stack_forward(deep, t.watch(deep_input)), coef_d)),
        [deep_input] + _checkable(deep.parameters())
    ))

    model = build_toy_model(in_channels=2, height=3, width=2, embed_dim=4, num_classes=2, depth=2, seed=seed)
    images = rng.normal(size=(4, 2, 3, 2))
    labels = np.array([0, 0, 1, 1])
    loss_cfg = LossConfig.create(2, 4, beta=0.5)
    loss_cfg.centers.value.data[...] = rng.normal(size=(2, 4))

    def model_loss(t: ComputeTape) -> Tensor:
        logits, embedding = model_forward(model, t.constant(images), mode="training")
        return total_loss(logits, embedding, labels, loss_cfg)

    checks.append(("total_loss_depth2", model_loss, _checkable(model.parameters()) + [loss_cfg.centers]))
    return checks


def run_gradient_suite(seeds: Sequence[int] = tuple(range(10))) -> SuiteReport:
    """Finite-difference checks of every op, a PGA layer, a depth-3 stack and the full loss."""
    report = SuiteReport("gradient")
    for seed in seeds:
        rng = np.random.default_rng(seed)
        for name, loss_fn, params in _op_checks(rng) + _layer_checks(rng, seed):
            error = finite_diff_check(loss_fn, params)
            logger.debug("seed %d %s: max rel err %.3e", seed, name, error)
            report.record(error <= GRADIENT_TOLERANCE, f"seed {seed}: {name} ({error:.2e})")
    return report


def influence_support(depth: int, pixel: int, seed: int = 0, h: int = 4, w: int = 4, channels: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nodes whose output changes when one input pixel changes, after ``depth`` non-residual layers.

    Batch norm runs in evaluation mode with seeded statistics so every
    transfer function acts pixel by pixel.

    Returns:
        (changed node mask, hop distances from ``pixel``)
    """
    rng = np.random.default_rng(seed)
    stack = build_stack(depth, channels, h, w, NeighborMode.FOUR, rng=rng)
    for layer in stack.layers:
        for _, state in layer.batchnorm_states():
            state.seed_running_stats(np.zeros(state.channels), np.ones(state.channels))
            state.mode = "evaluation"

    f = rng.uniform(0.1, 1.0, size=(channels, h, w))
    g = f.copy()
    g[:, pixel // w, pixel % w] += rng.uniform(0.5, 1.0, size=channels)

    def run(x):
        out = Tensor(x)
        for layer in stack.layers:
            out = pga_forward(layer, out)
        return transf(out).data

    changed = np.any(run(f) != run(g), axis=1)
    hops = stack.layers[0].adjacency.hop_distances()[pixel] if depth else np.zeros(h * w)
    return changed, hops


def run_locality_suite(seed: int = 0, depths: Sequence[int] = (1, 2, 3)) -> SuiteReport:
    """Influence of a single pixel stays within ``depth`` hops on a 4×4 grid."""
    report = SuiteReport("locality")
    for depth in depths:
        for pixel in range(16):
            changed, hops = influence_support(depth, pixel, seed=seed)
            report.record(bool(np.all(hops[changed] <= depth)), f"depth {depth}, pixel {pixel}")
    return report


def run_all(config: RunConfig) -> List[SuiteReport]:
    reports = [
        run_oracle_suite(config.corrupt_grid),
        run_attention_suite(config.seed),
        run_gradient_suite(range(config.verify_seeds)),
        run_locality_suite(config.seed)
    ]
    for r in reports:
        logger.info("%s: %d checks, %d failures", r.suite, r.checks, len(r.failures))
    return reports
