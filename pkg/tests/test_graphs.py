import numpy as np
import pytest

from countgraph import (
    DEFAULT_CAUSALITY_TOL,
    DEFAULT_RHO_STAR,
    ModelParams,
    WStack,
    causality_graph,
    edge_weights,
    extract_graphs,
    partial_coherence,
    partial_graph,
    penalty_h1,
)


def test_penalty_h1_oracle():
    # sum of absolute off-diagonal entries over the whole stack
    w = WStack(mats=np.array([[[-1.0, 0.2], [0.2, -1.0]],
                              [[0.0, -0.5], [0.1, 0.0]]]))
    assert penalty_h1(w) == pytest.approx(1.0, abs=1e-15)


def test_edge_weights_oracle():
    a = np.array([[[0.0, 0.3], [0.2, 0.0]]])
    params = ModelParams(np.zeros((1, 2)), a, np.ones(2))
    iw, ow = edge_weights(params)
    np.testing.assert_allclose(iw, [0.3, 0.2])
    np.testing.assert_allclose(ow, [0.2, 0.3])


def test_causality_graph_reads_columns_as_causes():
    # A_1[j, i] != 0 means i drives j
    a = np.zeros((2, 3, 3))
    a[0, 1, 0] = 0.4   # 0 -> 1 at lag 1
    a[1, 0, 2] = -0.2  # 2 -> 0 at lag 2
    a[0, 0, 0] = 0.9   # self lag, never an edge
    params = ModelParams(np.zeros((1, 3)), a, np.ones(3))
    edges = causality_graph(params)
    pairs = {(i, j) for i, j, _ in edges}
    assert pairs == {(0, 1), (2, 0)}
    weights = {(i, j): w for i, j, w in edges}
    np.testing.assert_allclose(weights[(2, 0)], [0.0, -0.2])


def test_causality_tolerance_gates_edges():
    a = np.zeros((1, 2, 2))
    a[0, 1, 0] = 5e-7
    params = ModelParams(np.zeros((1, 2)), a, np.ones(2))
    assert causality_graph(params, tol=DEFAULT_CAUSALITY_TOL) == []
    assert len(causality_graph(params, tol=1e-8)) == 1
    with pytest.raises(ValueError):
        causality_graph(params, tol=-1.0)


def test_partial_graph_threshold_is_strict():
    a = np.zeros((1, 2, 2))
    a[0, 0, 1] = 0.5
    params = ModelParams(np.zeros((1, 2)), a, np.ones(2))
    field = partial_coherence(params, grid_size=128)
    rho = field.rho[0, 1]
    assert partial_graph(field, rho_star=rho) == []          # > not >=
    assert len(partial_graph(field, rho_star=rho * 0.99)) == 1
    with pytest.raises(ValueError):
        partial_graph(field, rho_star=1.0)


def test_extract_graphs_coupled_pair():
    a = np.zeros((1, 3, 3))
    a[0, 1, 0] = 0.5
    params = ModelParams(np.zeros((1, 3)), a, np.ones(3))
    res = extract_graphs(params, rho_star=DEFAULT_RHO_STAR)
    assert res.directed_pairs() == {(0, 1)}
    assert res.undirected_pairs() == {(0, 1)}
    assert res.n == 3 and len(res.labels) == 3
    # undirected edges are stored with i < j and the grid-sup coherence
    i, j, rho = res.undirected[0]
    assert (i, j) == (0, 1) and 0 < rho <= 1


def test_extract_graphs_labels_passthrough():
    params = ModelParams(np.zeros((1, 2)), np.zeros((1, 2, 2)), np.ones(2))
    res = extract_graphs(params, labels=["flu", "rsv"])
    assert res.labels == ["flu", "rsv"]
    assert res.undirected == [] and res.directed == []
