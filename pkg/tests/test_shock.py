import numpy as np
import pytest

from fragility.errors import ConfigError, NumericalError
from fragility.network import build_network, flows, masses
from fragility.shock import (
    assemble, build_model, classify, distribution_matrix, edge_factor_matrix, edge_factors,
    largest_eigenvalue, node_factors, power_iteration, simulate_shock,
)

from conftest import random_jumps, random_model


def test_node_factor_examples():
    G = np.array([[5.0, 1.0, 2.0], [1.0, 5.0, 3.0], [2.0, 3.0, 5.0]])
    assert node_factors(G).tolist() == [1.0, 1.0, 1.0]
    assert classify(node_factors(G)).tolist() == ["neutral"] * 3
    G = np.array([[0.0, 2.0], [1.0, 0.0]])
    a = node_factors(G)
    assert a.tolist() == [0.5, 2.0]
    assert classify(a).tolist() == ["absorber", "amplifier"]


def test_isolated_node_gets_zero(caplog):
    G = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert node_factors(G).tolist() == [0.0, 0.0]
    assert "no outflow" in caplog.text


def test_amplifier_direction():
    # market 0 receives more than it sends
    G = np.array([[0.0, 1.0, 1.0], [3.0, 0.0, 1.0], [3.0, 1.0, 0.0]])
    labels = classify(node_factors(G))
    assert labels[0] == "amplifier"


def test_distribution_examples():
    G = np.ones((4, 4))
    U = distribution_matrix(G)
    assert np.allclose(U[0, 1:], 1 / 3) and U[0, 0] == 0
    G = np.array([[9.0, 2, 1, 1], [1, 0, 1, 1], [1, 1, 0, 1], [1, 1, 1, 0]])
    assert distribution_matrix(G)[0].tolist() == [0.0, 0.5, 0.25, 0.25]


def test_distribution_rows(rng):
    for _ in range(20):
        G = rng.random((6, 6)) * (rng.random((6, 6)) < 0.6)
        U = distribution_matrix(G)
        sums = U.sum(axis=1)
        assert np.all((np.abs(sums - 1) < 1e-12) | (sums == 0))
        assert (np.diag(U) == 0).all() and (U >= 0).all()


def test_distribution_inflow_mode():
    G = np.array([[0.0, 2.0, 1.0], [1.0, 0.0, 1.0], [3.0, 1.0, 0.0]])
    U = distribution_matrix(G, "inflow")
    inflow = G.sum(axis=0)
    assert np.allclose(U, G / inflow[:, None])
    with pytest.raises(ConfigError):
        distribution_matrix(G, "both")


def test_edge_factor_two_by_two():
    P = np.array([[1.0, 0.5], [0.25, 1.0]])
    G = np.array([[3.0, 1.5], [0.5, 7.0]])
    A = edge_factor_matrix(G, P)
    assert A[0, 1] == 1.0 and A[1, 0] == 1.0


def test_edge_factor_against_bracketed_form(rng):
    for _ in range(10):
        P = rng.random((3, 3)) + 0.05
        np.fill_diagonal(P, 1.0)
        M, m = masses(P)
        _, G = flows(P, M, m)
        A = edge_factor_matrix(G, P)
        off = ~np.eye(3, dtype=bool)
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                w_out = sum(P[i, k] for k in range(3) if k != i)
                w_in = sum(P[k, j] for k in range(3) if k != j)
                g_out = sum(G[i, k] for k in range(3) if k != i)
                g_in = sum(G[k, j] for k in range(3) if k != j)
                oracle = ((P[i, j] / w_out) * g_out) / ((P[i, j] / w_in) * g_in)
                assert A[i, j] == pytest.approx(oracle, rel=1e-12)
        assert off.any()


def test_edge_flow_cancellation_and_orientation(rng):
    net = build_network(random_jumps(rng, 120, 5, 0.2), list("abcde"))
    E = edge_factors(net.G, "flow")
    support = net.G.T > 0
    assert (E[support] == 1.0).all()
    Ep = edge_factors(net.G, "probability", P=net.P)
    assert np.array_equal(Ep, edge_factor_matrix(net.G, net.P).T)
    Ei = edge_factors(net.G, "inverse_distance", Q=net.Q)
    assert np.allclose(Ei, Ep, rtol=1e-12)
    with pytest.raises(ConfigError):
        edge_factors(net.G, "probability")


def test_assemble_examples():
    U = np.array([[0.0, 1.0], [1.0, 0.0]])
    E = np.ones((2, 2))
    assert assemble(np.eye(2), U, E).tolist() == [[0, 1], [1, 0]]
    assert assemble(np.diag([0.5, 2.0]), U, E).tolist() == [[0, 2], [0.5, 0]]
    with pytest.raises(ValueError):
        assemble(np.ones(3), U, E)


def test_assemble_loop_oracle(rng):
    node, U, E = rng.random(6), rng.random((6, 6)), rng.random((6, 6))
    T = assemble(node, U, E)
    for i in range(6):
        for j in range(6):
            assert T[i, j] == pytest.approx(E[i, j] * U[j, i] * node[j], rel=1e-15)


def test_eigen_examples():
    lam, v = largest_eigenvalue(np.diag([0.5, 0.3]))
    assert lam == pytest.approx(0.5, abs=1e-10)
    assert v.sum() == pytest.approx(1.0)
    lam, v = largest_eigenvalue(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert lam == pytest.approx(1.0, abs=1e-10)
    assert largest_eigenvalue(np.zeros((3, 3)))[0] == 0.0


def test_eigen_scale_invariant_iterates(rng):
    T = rng.random((5, 5))
    lam1, v1, it1, _ = power_iteration(T)
    lam2, v2, it2, _ = power_iteration(3.0 * T)
    assert it1 == it2 and np.allclose(v1, v2, rtol=1e-12)


def test_eigen_errors_and_fallback(caplog):
    with pytest.raises(NumericalError):
        largest_eigenvalue(np.array([[np.nan, 0], [0, 1]]))
    with pytest.raises(ValueError):
        largest_eigenvalue(np.array([[-1.0, 0], [0, 1]]))
    # too few iterations forces the dense path
    T = np.array([[0.9, 0.1], [0.2, 0.7]])
    lam, _ = largest_eigenvalue(T, max_iter=1)
    assert lam == pytest.approx(max(abs(np.linalg.eigvals(T))), abs=1e-12)


def test_non_convergence_carries_diagnostics():
    T = np.random.default_rng(0).random((70, 70))
    with pytest.raises(NumericalError) as e:
        largest_eigenvalue(T, max_iter=1)
    assert e.value.diagnostics["n"] == 70


def test_simulate_shock_examples():
    path = simulate_shock(np.diag([0.5, 0.5]), [1.0, 1.0], 5)
    assert path.norms.tolist() == [2.0, 1.0, 0.5, 0.25, 0.125, 0.0625]
    path = simulate_shock(np.diag([1e200, 1.0]), [1.0, 1.0], 10)
    assert path.explosive and len(path.norms) < 11
    with pytest.raises(ValueError):
        simulate_shock(np.eye(2), [-1.0, 0.0], 3)


def test_shock_ratio_converges_to_lambda(rng):
    T = rng.random((6, 6)) + 0.01
    lam, _ = largest_eigenvalue(T)
    r = simulate_shock(T, rng.random(6), 60).ratios()
    assert r[-1] == pytest.approx(lam, rel=1e-10)


def test_model_invariants(rng):
    for _ in range(10):
        mdl = random_model(rng, n=6, u_denominator="outflow")
        assert (mdl.T >= 0).all() and mdl.lam >= 0 and (mdl.eigvec >= 0).all()
        assert np.abs(mdl.T @ mdl.eigvec - mdl.lam * mdl.eigvec).sum() < 1e-8
        assert mdl.lam >= np.abs(np.linalg.eigvals(mdl.T)).max() - 1e-9


def test_inflow_default_is_column_stochastic(rng):
    mdl = random_model(rng, n=5)
    assert mdl.u_denominator == "inflow"
    B = mdl.U.T * mdl.node[None, :]
    sums = B.sum(axis=0)
    assert np.all((np.abs(sums - 1) < 1e-12) | (sums == 0))


def test_model_export(rng):
    d = random_model(rng, n=4).to_dict(matrices=True)
    assert set(d["classification"]) == {"amplifier", "absorber", "neutral"}
    assert len(d["T"]) == 4 and isinstance(d["lambda"], float)
