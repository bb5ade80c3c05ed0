"""Grid graph generation: vectorized row shifts, brute-force oracle and timing benchmark."""

import logging
import time
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.sparse import csgraph

logger = logging.getLogger(__name__)

BENCH_COLUMNS = ["n", "mode", "fast_seconds", "oracle_seconds", "ratio"]


class GraphError(ValueError):
    """Raised for invalid grid specs or out-of-range node ids."""
    pass


class NeighborMode(str, Enum):
    """Which pixels (or channels) count as neighbors."""
    FOUR = "four"
    EIGHT = "eight"
    TWO_CHANNEL = "two_channel"
    FULLY_CONNECTED = "fully_connected"

    @classmethod
    def parse(cls, value: "str | NeighborMode") -> "NeighborMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"4": "four", "8": "eight", "2": "two_channel", "channel": "two_channel",
                   "twochannel": "two_channel", "fullyconnected": "fully_connected", "full": "fully_connected"}
        key = aliases.get(key, key)
        for mode in cls:
            if mode.value == key:
                return mode
        raise ValueError(f"Unknown neighbor mode: {value}")

    @property
    def max_degree(self) -> Optional[int]:
        """k in O(kHW); None for the fully connected comparison graph."""
        return {"four": 4, "eight": 8, "two_channel": 2}.get(self.value)

    @property
    def is_channel(self) -> bool:
        return self is NeighborMode.TWO_CHANNEL


@dataclass(frozen=True)
class GridSpec:
    """Feature map extents; ``c`` only matters for the channel graph."""
    h: int
    w: int
    c: int = 1

    def __post_init__(self):
        for name in ("h", "w", "c"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise GraphError(f"GridSpec.{name} must be a positive integer, got {value}")

    def node_count(self, mode: NeighborMode) -> int:
        return self.c if mode.is_channel else self.h * self.w


@dataclass(frozen=True)
class EdgeList:
    """Directed (node, neighbor) pairs as produced by the row-shift generator."""
    node: np.ndarray
    neighbor: np.ndarray

    def __post_init__(self):
        if len(self.node) != len(self.neighbor):
            raise GraphError(
                f"Edge arrays differ in length: {len(self.node)} vs {len(self.neighbor)}"
            )

    def __len__(self) -> int:
        return len(self.node)


@dataclass(frozen=True, eq=False)
class Adjacency:
    """
    Compressed-row boolean adjacency with ascending columns per row.

    The dense n×n view is materialized on first use and cached.
    """
    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray

    def __post_init__(self):
        offsets = np.asarray(self.row_offsets, dtype=np.int64)
        cols = np.asarray(self.col_indices, dtype=np.int64)
        if offsets.shape != (self.n + 1,) or offsets[0] != 0 or offsets[-1] != len(cols):
            raise GraphError(f"row_offsets must have length {self.n + 1} and span {len(cols)} entries")
        if np.any(np.diff(offsets) < 0):
            raise GraphError("row_offsets must be nondecreasing")
        if len(cols) and (cols.min() < 0 or cols.max() >= self.n):
            raise GraphError(f"Column ids must lie in [0, {self.n})")
        rows = np.repeat(np.arange(self.n), np.diff(offsets))
        same_row = rows[1:] == rows[:-1]
        if np.any(np.diff(cols)[same_row] <= 0):
            raise GraphError("Columns must be strictly ascending within each row")
        offsets.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "row_offsets", offsets)
        object.__setattr__(self, "col_indices", cols)

    @classmethod
    def empty(cls, n: int) -> "Adjacency":
        return cls(n, np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))

    @property
    def num_edges(self) -> int:
        """Number of directed entries."""
        return len(self.col_indices)

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), self.degrees())

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def neighbors(self, node: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[node]:self.row_offsets[node + 1]]

    def edge_set(self) -> Set[Tuple[int, int]]:
        return set(zip(self.row_ids().tolist(), self.col_indices.tolist()))

    def to_edge_list(self) -> EdgeList:
        return EdgeList(self.row_ids(), self.col_indices.copy())

    @cached_property
    def _dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n), dtype=bool)
        dense[self.row_ids(), self.col_indices] = True
        dense.setflags(write=False)
        return dense

    def to_dense(self) -> np.ndarray:
        return self._dense

    def to_scipy(self) -> sparse.csr_matrix:
        data = np.ones(self.num_edges, dtype=bool)
        return sparse.csr_matrix((data, self.col_indices, self.row_offsets), shape=(self.n, self.n))

    def is_symmetric(self) -> bool:
        forward = _pair_keys(self.row_ids(), self.col_indices, self.n)
        backward = np.sort(_pair_keys(self.col_indices, self.row_ids(), self.n))
        return np.array_equal(forward, backward)

    def has_self_loops(self) -> bool:
        return bool(np.any(self.row_ids() == self.col_indices))

    def permute(self, perm: Sequence[int]) -> "Adjacency":
        """Relabel node i as perm[i]."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.n)):
            raise GraphError("perm must be a permutation of range(n)")
        return _from_directed_pairs(perm[self.row_ids()], perm[self.col_indices], self.n)

    def hop_distances(self) -> np.ndarray:
        """Unweighted shortest-path lengths; unreachable pairs are inf."""
        return csgraph.shortest_path(self.to_scipy(), method="D", unweighted=True, directed=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Adjacency):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
        )

    def __repr__(self) -> str:
        return f"Adjacency(n={self.n}, edges={self.num_edges})"


def _pair_keys(rows: np.ndarray, cols: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(rows, dtype=np.int64) * n + np.asarray(cols, dtype=np.int64)


def _from_directed_pairs(rows: np.ndarray, cols: np.ndarray, n: int) -> Adjacency:
    keys = np.unique(_pair_keys(rows, cols, n))
    rows = keys // n
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
    return Adjacency(n, offsets, keys % n)


def adjacency_from_pairs(
    edges: EdgeList,
    n: int,
    symmetrize: bool = True,
    self_loops: bool = False
) -> Adjacency:
    """
    Build the compressed adjacency from node pairs.

    Args:
        edges: Directed pairs (duplicates allowed)
        n: Node count
        symmetrize: Add (j, i) for every (i, j)
        self_loops: Keep (i, i) pairs instead of dropping them

    Returns:
        Deduplicated, per-row sorted Adjacency

    Raises:
        GraphError: If any id lies outside [0, n)
    """
    if n < 1:
        raise GraphError(f"Node count must be positive, got {n}")
    node = np.asarray(edges.node, dtype=np.int64)
    neighbor = np.asarray(edges.neighbor, dtype=np.int64)

    ids = np.concatenate([node, neighbor])
    bad = np.flatnonzero((ids < 0) | (ids >= n))
    if bad.size:
        position = int(bad[0]) % max(len(node), 1)
        raise GraphError(f"Node id {int(ids[bad[0]])} at pair index {position} is outside [0, {n})")

    if not self_loops:
        keep = node != neighbor
        node, neighbor = node[keep], neighbor[keep]
    if symmetrize:
        node, neighbor = np.concatenate([node, neighbor]), np.concatenate([neighbor, node])

    return _from_directed_pairs(node, neighbor, n)


def grid_edge_list(spec: GridSpec, mode: NeighborMode) -> EdgeList:
    """
    Row-shift edge construction for the 4-, 8- and 2-neighbor graphs.

    Each row r of range(n).reshape(h, w) contributes shifted slices: left and
    right within the row, the rows below and above, and for the 8-neighbor
    graph the four diagonals trimmed at both row and column boundaries. The
    channel graph is a single row of c nodes. No distances are computed.
    """
    mode = NeighborMode.parse(mode)
    if mode is NeighborMode.FULLY_CONNECTED:
        raise GraphError("The fully connected graph has no row-shift construction")
    h, w = (1, spec.c) if mode.is_channel else (spec.h, spec.w)
    grid = np.arange(h * w).reshape(h, w)
    diagonal = mode is NeighborMode.EIGHT

    node: List[np.ndarray] = []
    neighbor: List[np.ndarray] = []
    for i in range(h):
        r = grid[i]
        node.append(r[1:])
        neighbor.append(r[1:] - 1)
        node.append(r[:-1])
        neighbor.append(r[:-1] + 1)
        if i != h - 1:
            node.append(r)
            neighbor.append(r + w)
            if diagonal:
                node.append(r[1:])
                neighbor.append(r[1:] + w - 1)
                node.append(r[:-1])
                neighbor.append(r[:-1] + w + 1)
        if i != 0:
            node.append(r)
            neighbor.append(r - w)
            if diagonal:
                node.append(r[1:])
                neighbor.append(r[1:] - w - 1)
                node.append(r[:-1])
                neighbor.append(r[:-1] - w + 1)

    return EdgeList(np.concatenate(node), np.concatenate(neighbor))


def fully_connected_adjacency(n: int, self_loops: bool = False) -> Adjacency:
    """Every node adjacent to every other node (the non-local comparison)."""
    rows = np.repeat(np.arange(n), n)
    cols = np.tile(np.arange(n), n)
    if not self_loops:
        keep = rows != cols
        rows, cols = rows[keep], cols[keep]
    return _from_directed_pairs(rows, cols, n)


def generate_grid_graph(
    spec: GridSpec,
    mode: NeighborMode,
    self_loops: bool = False
) -> Adjacency:
    """
    Generate the adjacency of a feature map in O(kHW).

    Args:
        spec: Grid extents
        mode: Neighbor relation
        self_loops: Also connect every node to itself

    Returns:
        Symmetric Adjacency over N = h*w pixels (or c channels)
    """
    mode = NeighborMode.parse(mode)
    n = spec.node_count(mode)
    if mode is NeighborMode.FULLY_CONNECTED:
        return fully_connected_adjacency(n, self_loops)

    edges = grid_edge_list(spec, mode)
    if self_loops:
        loops = np.arange(n)
        edges = EdgeList(np.concatenate([edges.node, loops]), np.concatenate([edges.neighbor, loops]))
    adjacency = adjacency_from_pairs(edges, n, symmetrize=False, self_loops=self_loops)
    logger.debug("Generated %s graph on %d nodes with %d entries", mode.value, n, adjacency.num_edges)
    return adjacency


def oracle_adjacency(spec: GridSpec, mode: NeighborMode) -> Adjacency:
    """
    Brute-force O(N^2) construction: connect every pair at grid distance exactly 1.

    Manhattan distance for the 4-neighbor graph, Chebyshev for the 8-neighbor
    graph and index distance for the channel chain.
    """
    mode = NeighborMode.parse(mode)
    n = spec.node_count(mode)
    index = np.arange(n)
    width = spec.c if mode.is_channel else spec.w
    row, col = index // width, index % width

    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    for i in range(n):
        if mode is NeighborMode.FOUR:
            dist = np.abs(row - row[i]) + np.abs(col - col[i])
        elif mode is NeighborMode.EIGHT:
            dist = np.maximum(np.abs(row - row[i]), np.abs(col - col[i]))
        elif mode is NeighborMode.TWO_CHANNEL:
            dist = np.abs(index - i)
        else:
            dist = (index != i).astype(np.int64)
        hits = np.flatnonzero(dist == 1)
        rows.append(np.full(hits.size, i))
        cols.append(hits)

    return _from_directed_pairs(np.concatenate(rows), np.concatenate(cols), n)


def expected_edge_count(spec: GridSpec, mode: NeighborMode) -> int:
    """Closed-form number of directed entries."""
    mode = NeighborMode.parse(mode)
    h, w = spec.h, spec.w
    four = 2 * (h * (w - 1) + w * (h - 1))
    if mode is NeighborMode.FOUR:
        return four
    if mode is NeighborMode.EIGHT:
        return four + 4 * (h - 1) * (w - 1)
    if mode is NeighborMode.TWO_CHANNEL:
        return 2 * (spec.c - 1)
    n = h * w
    return n * (n - 1)


def size_ladder(sizes: Sequence[int]) -> List[GridSpec]:
    """
    Map node counts to grids shaped like the 16×8 benchmark map (h = 2w where possible).

    The channel count equals the node count so every mode sees the same N.
    """
    specs = []
    for n in sizes:
        n = int(n)
        if n < 1:
            raise GraphError(f"Ladder sizes must be positive, got {n}")
        target = np.sqrt(n / 2.0)
        divisors = [d for d in range(1, n + 1) if n % d == 0]
        w = min(divisors, key=lambda d: (abs(d - target), d))
        specs.append(GridSpec(h=n // w, w=w, c=n))
    return specs


def _mean_runtime(
    builder: Callable[[GridSpec, NeighborMode], Adjacency],
    spec: GridSpec,
    mode: NeighborMode,
    repeats: int
) -> float:
    builder(spec, mode)
    total = 0.0
    for _ in range(repeats):
        start = time.perf_counter()
        builder(spec, mode)
        total += time.perf_counter() - start
    return total / repeats


def bench_generation(
    sizes: Sequence[GridSpec],
    mode: NeighborMode,
    repeats: int = 3
) -> pd.DataFrame:
    """
    Time the row-shift generator against the brute-force oracle.

    One warm-up run of each is discarded, then the mean over ``repeats`` runs
    is reported. Both run single-threaded.

    Returns:
        DataFrame with columns n, mode, fast_seconds, oracle_seconds, ratio
    """
    if repeats < 3:
        raise ValueError(f"repeats must be >= 3, got {repeats}")
    mode = NeighborMode.parse(mode)

    rows = []
    for spec in sizes:
        fast = _mean_runtime(generate_grid_graph, spec, mode, repeats)
        oracle = _mean_runtime(oracle_adjacency, spec, mode, repeats)
        ratio = oracle / fast if fast > 0 else float("inf")
        n = spec.node_count(mode)
        rows.append({
            "n": n,
            "mode": mode.value,
            "fast_seconds": fast,
            "oracle_seconds": oracle,
            "ratio": ratio
        })
        logger.info("bench %s n=%d fast=%.6fs oracle=%.6fs ratio=%.1f", mode.value, n, fast, oracle, ratio)

    return pd.DataFrame(rows, columns=BENCH_COLUMNS)
