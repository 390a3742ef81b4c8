from collections import Counter

import numpy as np
import pytest

from conftest import random_graph
from mgembed.context import (corpus_to_prediction_pairs, expected_group_count,
                             generate_groups, iter_prediction_pairs, read_corpus, write_corpus)
from mgembed.graph import BIPARTITE, Graph


def star(leaves):
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def test_star_with_seven_leaves():
    c = generate_groups(star(7), k=5, n=1, seed=3)
    hub = [grp for grp in c if grp.root == 0]
    assert sorted(len(grp.members) for grp in hub) == [2, 5]
    assert sorted(m for grp in hub for m in grp.members) == list(range(1, 8))
    # each leaf has one neighbor, hence one group of one member
    assert len(c) == 2 + 7


def test_isolated_node_contributes_nothing():
    g = Graph.from_edges(4, [(0, 1)])
    c = generate_groups(g, 5, 3, seed=0)
    assert set(c.roots.tolist()) == {0, 1}


def test_invalid_parameters():
    with pytest.raises(ValueError):
        generate_groups(star(3), k=0)
    with pytest.raises(ValueError):
        generate_groups(star(3), n=0)


def test_deterministic_and_worker_independent(rng):
    g = random_graph(rng, 80, 0.1)
    a = generate_groups(g, 3, 4, seed=11)
    b = generate_groups(g, 3, 4, seed=11, workers=3)
    assert np.array_equal(a.roots, b.roots) and np.array_equal(a.members, b.members)
    c = generate_groups(g, 3, 4, seed=12)
    assert not np.array_equal(a.members, c.members)


def test_group_counts_and_multiplicity_on_random_graphs(rng):
    for trial in range(50):
        n = int(rng.integers(2, 200))
        kind = BIPARTITE if trial % 5 == 0 else "homogeneous"
        g = random_graph(rng, n, float(rng.uniform(0.0, 0.3)), kind)
        k, reps = int(rng.integers(1, 8)), int(rng.integers(1, 6))
        c = generate_groups(g, k, reps, seed=trial)
        assert len(c) == expected_group_count(g, k, reps)
        assert np.all(c.sizes() <= k) and np.all(c.sizes() >= 1)
        seen = Counter()
        for root, members in c:
            seen.update((root, m) for m in members)
        for u, v in g.edges().tolist():
            assert seen[(u, v)] == reps and seen[(v, u)] == reps
        assert sum(seen.values()) == 2 * reps * g.edge_count


def test_prediction_pairs_match_streaming_and_count(rng):
    g = random_graph(rng, 40, 0.2)
    c = generate_groups(g, 4, 2, seed=1)
    centers, contexts = corpus_to_prediction_pairs(c)
    stream = list(iter_prediction_pairs(c))
    assert list(zip(centers.tolist(), contexts.tolist())) == stream
    sizes = c.sizes()
    assert len(centers) == int(np.sum(sizes * (sizes + 1)))
    assert np.all(centers != contexts)


def test_group_of_size_j_yields_j_times_j_plus_one_pairs():
    c = generate_groups(star(3), k=3, n=1, seed=0)
    hub = next(grp for grp in c if grp.root == 0)
    pairs = list(iter_prediction_pairs([hub]))
    assert len(pairs) == 12 and len(set(pairs)) == 12


def test_corpus_file_round_trip(tmp_path, rng):
    g = random_graph(rng, 30, 0.2)
    c = generate_groups(g, 5, 2, seed=4)
    path = tmp_path / "corpus.txt"
    write_corpus(c, path)
    d = read_corpus(path, 5, 2, g.num_nodes)
    assert np.array_equal(c.roots, d.roots)
    assert np.array_equal(c.offsets, d.offsets)
    assert np.array_equal(c.members, d.members)
