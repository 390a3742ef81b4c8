import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_graph
from mgembed.errors import EdgeListParseError, FileFormatError, GraphValidationError
from mgembed.graph import (BIPARTITE, HOMOGENEOUS, Graph, complement_negative_sample,
                           complement_size, enumerate_complement, load_edge_list, load_graph,
                           save_graph)


def test_triangle_from_text():
    g = load_edge_list(["a b", "b c", "c a"])
    assert g.num_nodes == 3 and g.edge_count == 3
    assert sorted(g.degrees().tolist()) == [2, 2, 2]
    assert g.labels == ("a", "b", "c")


def test_duplicates_and_reversed_edges_collapse():
    g = load_edge_list(["a b", "b a", "a b", "# comment", "", "b c"])
    assert g.edge_count == 2
    assert g.neighbors(g.index("b")).tolist() == [0, 2]


def test_bytes_and_path_sources(tmp_path):
    p = tmp_path / "g.edges"
    p.write_text("x y\ny z\n")
    assert load_edge_list(str(p)).edge_count == 2
    assert load_edge_list(b"x y\ny z\n").edge_count == 2


def test_self_loop_rejected():
    with pytest.raises(GraphValidationError):
        load_edge_list(["a a"])


def test_malformed_line_reports_line_number():
    with pytest.raises(EdgeListParseError) as info:
        load_edge_list(["a b", "c"])
    assert info.value.lineno == 2


def test_bipartite_layout_and_cross_partition():
    g = load_edge_list(["u1 s1", "u2 s1", "u1 s2"], kind=BIPARTITE)
    assert g.left_size == 2 and g.right_size == 2
    assert g.labels == ("u1", "u2", "s1", "s2")
    assert all(g.is_left(u) and not g.is_left(v) for u, v in g.edges())
    with pytest.raises(GraphValidationError):
        load_edge_list(["u1 s1", "s1 u2"], kind=BIPARTITE)


def test_bipartite_intra_partition_edge_rejected():
    with pytest.raises(GraphValidationError):
        Graph.from_edges(4, [(0, 1)], BIPARTITE, left_size=2)


def test_neighbor_out_of_range():
    g = Graph.from_edges(3, [(0, 1)])
    with pytest.raises(IndexError):
        g.neighbors(3)


def test_isolated_nodes_survive_round_trip(tmp_path):
    g = Graph.from_edges(4, [(0, 1)], labels=["a", "b", "c", "d"], name="iso")
    save_graph(g, tmp_path / "iso")
    h = load_graph(tmp_path / "iso.edges")
    assert h.labels == g.labels and h.num_nodes == 4 and h.name == "iso"
    assert np.array_equal(h.indptr, g.indptr) and np.array_equal(h.indices, g.indices)


def test_bipartite_round_trip(tmp_path, rng):
    g = random_graph(rng, 12, 0.3, BIPARTITE, left=5)
    save_graph(g, tmp_path / "b")
    h = load_graph(str(tmp_path / "b.edges"))
    assert h.kind == BIPARTITE and h.left_size == 5
    assert np.array_equal(h.edge_codes(), g.edge_codes())


def test_missing_file():
    with pytest.raises(FileFormatError):
        load_graph("/nonexistent/graph.edges")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15)), max_size=60))
def test_csr_symmetric_and_sorted(pairs):
    pairs = [(a, b) for a, b in pairs if a != b]
    g = Graph.from_edges(16, pairs)
    expect = {(min(a, b), max(a, b)) for a, b in pairs}
    assert {tuple(e) for e in g.edges().tolist()} == expect
    for v in range(16):
        nb = g.neighbors(v)
        assert np.all(np.diff(nb) > 0)
        assert all(g.has_edge(int(u), v) for u in nb)


# -- complement sampling ----------------------------------------------------

def _oracle(g):
    n = g.num_nodes
    out = set()
    for u in range(n):
        for v in range(u + 1, n):
            if g.kind == BIPARTITE and g.is_left(u) == g.is_left(v):
                continue
            if not g.has_edge(u, v):
                out.add((u, v))
    return out


def test_complement_enumeration_matches_oracle(rng):
    for trial in range(30):
        kind = HOMOGENEOUS if trial % 2 else BIPARTITE
        g = random_graph(rng, int(rng.integers(2, 20)), rng.random(), kind)
        comp = {tuple(p) for p in enumerate_complement(g).tolist()}
        assert comp == _oracle(g)
        assert complement_size(g) == len(comp)


def test_complement_sample_is_distinct_non_edges(rng):
    g = random_graph(rng, 200, 0.05)
    s = complement_negative_sample(g, 5000, rng)
    codes = s.pairs[:, 0] * g.num_nodes + s.pairs[:, 1]
    assert len(np.unique(codes)) == 5000 and not s.exhausted
    assert not np.isin(codes, g.edge_codes()).any()
    assert np.all(s.pairs[:, 0] < s.pairs[:, 1])


def test_complement_exhaustion_returns_all(rng):
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    s = complement_negative_sample(g, 10, rng)
    assert s.exhausted and {tuple(p) for p in s.pairs.tolist()} == _oracle(g)


def test_complete_graph_has_empty_complement(rng):
    iu, ju = np.triu_indices(6, 1)
    g = Graph.from_edges(6, np.stack([iu, ju], 1))
    s = complement_negative_sample(g, 3, rng)
    assert s.exhausted and len(s.pairs) == 0


def test_dense_graph_falls_back_to_enumeration(rng):
    # 1 non-edge among 190 pairs: rejection alone would rarely find it
    iu, ju = np.triu_indices(20, 1)
    keep = ~((iu == 3) & (ju == 7))
    g = Graph.from_edges(20, np.stack([iu[keep], ju[keep]], 1))
    iu, ju = np.triu_indices(30, 1)
    dense = Graph.from_edges(30, np.stack([iu, ju], 1)[rng.random(len(iu)) < 0.97])
    s = complement_negative_sample(dense, complement_size(dense) - 1, rng)
    assert len(s.pairs) == complement_size(dense) - 1
    assert {tuple(p) for p in s.pairs.tolist()} <= _oracle(dense)
    assert complement_negative_sample(g, 1, rng).pairs.tolist() == [[3, 7]]


def test_sample_deterministic_given_seed():
    g = random_graph(np.random.default_rng(1), 50, 0.1)
    a = complement_negative_sample(g, 100, np.random.default_rng(7)).pairs
    b = complement_negative_sample(g, 100, np.random.default_rng(7)).pairs
    assert np.array_equal(a, b)
