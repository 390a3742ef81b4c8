import numpy as np
import pytest

from conftest import table
from mgembed.errors import ColdNodeError, DataError, FileFormatError
from mgembed.graph import Graph
from mgembed.mimic import (MimicConfig, MimicModel, embedded_neighbors, init_regressor,
                           load_mimic, mimic_infer, mimic_train, mse_loss_and_grads,
                           naive_mimic, neighbor_input, predict, save_mimic)
from mgembed.skipgram import EmbeddingSet


def path_graph(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def test_naive_mean_examples():
    g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    e = table([[9, 9], [1, 0], [0, 1], [2, 2]])
    assert np.allclose(naive_mimic("0", g, e), [1, 1])
    e = table([[0, 0], [3, -1], [-3, 1], [3, -1]])
    g2 = Graph.from_edges(3, [(0, 1), (0, 2)])
    assert np.allclose(naive_mimic("0", g2, e), 0)


def test_naive_skips_missing_and_cold():
    g = Graph.from_edges(3, [(0, 1), (0, 2)])
    e = table([[1, 1], [4, 4]])  # labels "0", "1"
    assert np.allclose(naive_mimic("0", g, e), [4, 4])
    with pytest.raises(ColdNodeError):
        naive_mimic("2", g, EmbeddingSet(np.ones((1, 2), np.float32), None, ["2"]))
    with pytest.raises(ColdNodeError):
        naive_mimic("missing", g, e)


def test_neighbor_ordering_and_padding():
    # node 0 links to 1 (degree 1), 2 (degree 2) and 3 (degree 2)
    g = Graph.from_edges(5, [(0, 1), (0, 2), (0, 3), (2, 4), (3, 4)])
    e = table(np.arange(10).reshape(5, 2))
    assert embedded_neighbors("0", g, e) == ["2", "3", "1"]
    x = neighbor_input("0", g, e, 5).reshape(5, 2)
    assert np.array_equal(x[:3], [[4, 5], [6, 7], [2, 3]])
    assert np.allclose(x[3:], [[4, 5], [4, 5]])
    assert np.array_equal(neighbor_input("0", g, e, 2), [4, 5, 6, 7])


def fd_error(rng, activation="tanh", h=1e-6):
    sizes = [int(s) for s in rng.integers(1, 5, size=3)]
    weights, biases = init_regressor(sizes, rng)
    biases = [rng.normal(size=b.shape) for b in biases]
    x = rng.normal(size=(int(rng.integers(1, 6)), sizes[0]))
    y = rng.normal(size=(len(x), sizes[-1]))
    _, gw, gb = mse_loss_and_grads(weights, biases, x, y, activation)
    num, ana = [], []
    for params, grads in ((weights, gw), (biases, gb)):
        for p, g in zip(params, grads):
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + h
                up = mse_loss_and_grads(weights, biases, x, y, activation)[0]
                p[idx] = old - h
                dn = mse_loss_and_grads(weights, biases, x, y, activation)[0]
                p[idx] = old
                num.append((up - dn) / (2 * h))
                ana.append(g[idx])
    num, ana = np.array(num), np.array(ana)
    return np.linalg.norm(num - ana) / max(np.linalg.norm(num), 1e-12)


def test_regressor_gradients_match_finite_differences(rng):
    errs = [fd_error(rng, "tanh") for _ in range(20)] + [fd_error(rng, "identity") for _ in range(5)]
    assert max(errs) < 1e-5


def clustered(rng, n=120, d=4):
    """Random graph whose node vectors are smooth over edges."""
    centers = rng.normal(size=(4, d))
    comm = rng.integers(0, 4, n)
    vec = centers[comm] + 0.2 * rng.normal(size=(n, d))
    same = comm[:, None] == comm[None, :]
    p = np.where(same, 0.15, 0.01)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p[iu, ju]
    return Graph.from_edges(n, np.stack([iu[keep], ju[keep]], 1)), table(vec)


def test_lr_zero_leaves_parameters_unchanged(rng):
    g, e = clustered(rng)
    a = mimic_train(g, e, MimicConfig(n=3, epochs=0, seed=1, residual=False))
    b = mimic_train(g, e, MimicConfig(n=3, epochs=5, lr=0.0, seed=1, residual=False))
    for wa, wb in zip(a.weights + a.biases, b.weights + b.biases):
        assert np.array_equal(wa, wb)


def test_training_beats_untrained_on_validation(rng):
    g, e = clustered(rng)
    m = mimic_train(g, e, MimicConfig(n=3, epochs=50, lr=1e-2, seed=0, residual=False))
    assert m.val_mse < m.history[0][2]


def test_validation_beats_constant_predictor(rng):
    g, e = clustered(rng)
    m = mimic_train(g, e, MimicConfig(n=3, epochs=100, lr=1e-2, seed=0))
    assert m.val_mse < np.var(e.input, axis=0).mean()


def test_fixed_point_dataset_is_learned():
    # on a cycle where every vector is the same, the neighbor mean is exact
    n = 40
    g = Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])
    e = table(np.tile([0.3, -0.7, 0.1], (n, 1)))
    m = mimic_train(g, e, MimicConfig(n=2, epochs=200, lr=1e-2, activation="identity",
                                      hidden=(), residual=False, seed=0))
    assert m.train_mse <= 1e-4


def test_identity_model_copies_neighbor():
    g = path_graph(3)
    e = table([[1, 2], [3, 4], [5, 6]])
    m = MimicModel(1, 2, [np.eye(2)], [np.zeros(2)], activation="identity")
    assert np.allclose(mimic_infer(m, "0", g, e), [3, 4])


def test_infer_deterministic_and_cold(rng):
    g, e = clustered(rng)
    m = mimic_train(g, e, MimicConfig(n=3, epochs=5, seed=2))
    v = g.labels[int(np.argmax(g.degrees()))]
    assert np.array_equal(mimic_infer(m, v, g, e), mimic_infer(m, v, g, e))
    lonely = Graph.from_edges(2, [])
    with pytest.raises(ColdNodeError):
        mimic_infer(m, "0", lonely, e)


def test_residual_starts_at_slot_mean(rng):
    g, e = clustered(rng)
    m = mimic_train(g, e, MimicConfig(n=3, epochs=0, seed=0))
    v = g.labels[int(np.argmax(g.degrees()))]
    x = neighbor_input(v, g, e, 3)
    assert np.allclose(predict(m, x)[0], x.reshape(3, -1).mean(axis=0))


def test_empty_training_set():
    g = Graph.from_edges(3, [])
    with pytest.raises(DataError):
        mimic_train(g, table(np.zeros((3, 2))))


def test_model_file_round_trip(tmp_path, rng):
    g, e = clustered(rng)
    m = mimic_train(g, e, MimicConfig(n=3, epochs=3, seed=0))
    save_mimic(m, tmp_path / "m.mimic")
    back = load_mimic(tmp_path / "m.mimic")
    assert back.residual and back.layer_sizes == m.layer_sizes
    x = rng.normal(size=(5, 12))
    assert np.array_equal(predict(back, x), predict(m, x))
    (tmp_path / "bad").write_text("nope\n")
    with pytest.raises(FileFormatError):
        load_mimic(tmp_path / "bad")
