import numpy as np
import pytest
from hypothesis import given, strategies as st

from pganet.grid_graph import (
    BENCH_COLUMNS, EdgeList, GraphError, GridSpec, NeighborMode,
    adjacency_from_pairs, bench_generation, expected_edge_count,
    fully_connected_adjacency, generate_grid_graph, oracle_adjacency, size_ladder
)

GRID_MODES = [NeighborMode.FOUR, NeighborMode.EIGHT, NeighborMode.TWO_CHANNEL]


def test_single_pixel_has_no_edges():
    assert generate_grid_graph(GridSpec(1, 1), NeighborMode.FOUR).num_edges == 0


def test_two_by_two_four_neighbors():
    adjacency = generate_grid_graph(GridSpec(2, 2), NeighborMode.FOUR)
    expected = {(0, 1), (1, 0), (0, 2), (2, 0), (1, 3), (3, 1), (2, 3), (3, 2)}
    assert adjacency.edge_set() == expected
    assert oracle_adjacency(GridSpec(2, 2), NeighborMode.FOUR).edge_set() == expected


def test_center_of_three_by_three_eight_neighbors():
    adjacency = generate_grid_graph(GridSpec(3, 3), NeighborMode.EIGHT)
    assert adjacency.neighbors(4).tolist() == [0, 1, 2, 3, 5, 6, 7, 8]


def test_benchmark_map_edge_count():
    adjacency = generate_grid_graph(GridSpec(16, 8), NeighborMode.FOUR)
    assert adjacency.num_edges == 2 * (16 * 7 + 8 * 15) == 464


def test_channel_chain():
    adjacency = generate_grid_graph(GridSpec(1, 1, c=512), NeighborMode.TWO_CHANNEL)
    assert adjacency.n == 512
    assert adjacency.num_edges == 1022
    assert adjacency.neighbors(0).tolist() == [1]
    assert adjacency.neighbors(10).tolist() == [9, 11]


def test_single_row_eight_neighbors_is_a_path():
    adjacency = oracle_adjacency(GridSpec(1, 5), NeighborMode.EIGHT)
    assert adjacency.degrees().tolist() == [1, 2, 2, 2, 1]
    assert adjacency == generate_grid_graph(GridSpec(1, 5), NeighborMode.EIGHT)


@pytest.mark.parametrize("mode", GRID_MODES)
def test_matches_oracle_on_small_grids(mode):
    for h in range(1, 9):
        for w in range(1, 9):
            spec = GridSpec(h, w, c=h * w)
            assert generate_grid_graph(spec, mode) == oracle_adjacency(spec, mode), (h, w, mode)


@given(
    st.integers(min_value=1, max_value=16),
    st.integers(min_value=1, max_value=16),
    st.sampled_from(GRID_MODES)
)
def test_structural_invariants(h, w, mode):
    spec = GridSpec(h, w, c=h + w)
    adjacency = generate_grid_graph(spec, mode)
    assert adjacency.is_symmetric()
    assert not adjacency.has_self_loops()
    assert adjacency.num_edges == expected_edge_count(spec, mode)
    assert adjacency.degrees().max(initial=0) <= mode.max_degree


def test_self_loops_option():
    adjacency = generate_grid_graph(GridSpec(2, 3), NeighborMode.FOUR, self_loops=True)
    assert adjacency.has_self_loops()
    assert adjacency.num_edges == expected_edge_count(GridSpec(2, 3), NeighborMode.FOUR) + 6


def test_fully_connected():
    adjacency = generate_grid_graph(GridSpec(2, 3), NeighborMode.FULLY_CONNECTED)
    assert adjacency.num_edges == 6 * 5
    assert adjacency == fully_connected_adjacency(6)
    assert adjacency == oracle_adjacency(GridSpec(2, 3), NeighborMode.FULLY_CONNECTED)


def test_hop_distances_are_manhattan_on_four_graph():
    adjacency = generate_grid_graph(GridSpec(3, 4), NeighborMode.FOUR)
    hops = adjacency.hop_distances()
    assert hops[0, 11] == 2 + 3
    assert hops[5, 5] == 0


def test_permute_relabels_edges():
    adjacency = generate_grid_graph(GridSpec(1, 3), NeighborMode.FOUR)
    permuted = adjacency.permute([2, 0, 1])
    assert permuted.edge_set() == {(2, 0), (0, 2), (0, 1), (1, 0)}
    with pytest.raises(GraphError):
        adjacency.permute([0, 0, 1])


def test_csr_matches_dense():
    adjacency = generate_grid_graph(GridSpec(4, 3), NeighborMode.EIGHT)
    np.testing.assert_array_equal(adjacency.to_scipy().toarray(), adjacency.to_dense())


class TestAdjacencyFromPairs:
    def test_empty(self):
        adjacency = adjacency_from_pairs(EdgeList(np.array([], dtype=int), np.array([], dtype=int)), 3)
        assert adjacency.num_edges == 0
        assert not adjacency.to_dense().any()

    def test_symmetric_closure(self):
        adjacency = adjacency_from_pairs(EdgeList(np.array([0]), np.array([1])), 2)
        assert adjacency.edge_set() == {(0, 1), (1, 0)}

    def test_duplicates_collapse(self):
        adjacency = adjacency_from_pairs(EdgeList(np.array([0, 0, 1]), np.array([1, 1, 0])), 2)
        assert adjacency.num_edges == 2

    def test_self_pairs_dropped_by_default(self):
        adjacency = adjacency_from_pairs(EdgeList(np.array([1]), np.array([1])), 2)
        assert adjacency.num_edges == 0

    def test_out_of_range_id_is_named(self):
        with pytest.raises(GraphError, match="Node id 7 at pair index 1"):
            adjacency_from_pairs(EdgeList(np.array([0, 7]), np.array([1, 0])), 3)

    def test_length_mismatch(self):
        with pytest.raises(GraphError):
            EdgeList(np.array([0, 1]), np.array([1]))


class TestGridSpec:
    @pytest.mark.parametrize("h,w,c", [(0, 1, 1), (1, -2, 1), (1, 1, 0)])
    def test_rejects_non_positive(self, h, w, c):
        with pytest.raises(GraphError):
            GridSpec(h, w, c)

    def test_mode_aliases(self):
        assert NeighborMode.parse("4") is NeighborMode.FOUR
        assert NeighborMode.parse("two-channel") is NeighborMode.TWO_CHANNEL
        assert NeighborMode.parse("Fully_Connected") is NeighborMode.FULLY_CONNECTED
        with pytest.raises(ValueError):
            NeighborMode.parse("six")


def test_size_ladder_keeps_benchmark_shape():
    specs = size_ladder([128, 512])
    assert (specs[0].h, specs[0].w, specs[0].c) == (16, 8, 128)
    assert specs[1].h * specs[1].w == 512
    assert specs[1].c == 512


def test_bench_generation_table():
    bench = bench_generation(size_ladder([32]), NeighborMode.FOUR, repeats=3)
    assert list(bench.columns) == BENCH_COLUMNS
    assert bench.loc[0, "n"] == 32
    assert bench.loc[0, "fast_seconds"] > 0
    assert bench.loc[0, "ratio"] == pytest.approx(bench.loc[0, "oracle_seconds"] / bench.loc[0, "fast_seconds"])


def test_bench_needs_three_repeats():
    with pytest.raises(ValueError):
        bench_generation(size_ladder([8]), NeighborMode.FOUR, repeats=2)


@pytest.mark.slow
def test_generator_speedup_grows_with_size():
    bench = bench_generation(size_ladder([128, 512, 2048]), NeighborMode.FOUR, repeats=5)
    ratios = bench["ratio"].to_numpy()
    assert np.all(np.diff(ratios) > 0)
    assert ratios[0] >= 5
    assert ratios[-1] >= 12
