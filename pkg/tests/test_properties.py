"""Property-based checks of the pipeline invariants."""

import numpy as np
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fragility.decomposition import contributions
from fragility.ingest import IndexPanel, compute_returns
from fragility.jumps import compute_stats
from fragility.network import FlowNetwork, build_network, conditional_probability, flows, masses
from fragility.shock import (
    assemble, build_model, distribution_matrix, edge_factors, largest_eigenvalue, simulate_shock,
)

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

jump_windows = st.integers(2, 6).flatmap(
    lambda n: arrays(np.int8, st.tuples(st.integers(1, 40), st.just(n)), elements=st.integers(0, 1))
)
seeds = st.integers(0, 2**32 - 1)


@given(arrays(float, st.tuples(st.integers(2, 30), st.integers(1, 4)), elements=st.floats(0.5, 2.0)))
def test_cumulative_returns_recover_levels(levels):
    levels = np.cumprod(levels, axis=0)
    p = IndexPanel(tuple(f"d{k:03d}" for k in range(len(levels))), tuple(f"m{j}" for j in range(levels.shape[1])), levels)
    r = compute_returns(p, 1)
    rebuilt = np.cumprod(1 + r.returns, axis=0)
    assert np.allclose(rebuilt, levels[1:] / levels[0], rtol=1e-12, atol=0)


@given(seeds, st.integers(2, 5))
def test_column_permutation(seed, n):
    rng = np.random.default_rng(seed)
    lv = 100 * np.exp(np.cumsum(rng.normal(0, 0.01, (40, n)), axis=0))
    perm = rng.permutation(n)
    names = tuple(f"m{j}" for j in range(n))
    dates = tuple(f"d{k:03d}" for k in range(40))
    a = compute_returns(IndexPanel(dates, names, lv))
    b = compute_returns(IndexPanel(dates, tuple(names[j] for j in perm), lv[:, perm]))
    assert np.array_equal(a.diffs[:, perm], b.diffs)


@given(seeds, st.sampled_from([0.5, 2.0, 3.0, 10.0, 0.01]), st.floats(-5, 5))
def test_affine_invariance(seed, k, b):
    x = np.random.default_rng(seed).standard_t(4, (200, 1))
    s1 = compute_stats(x, ["a"])
    y = k * x + b
    s2 = compute_stats(y, ["a"])
    z1 = (x - s1.mu) / s1.sigma
    z2 = (y - s2.mu) / s2.sigma
    assume(np.min(np.abs(np.abs(z1) - 2.0)) > 1e-6)
    assert np.array_equal(np.abs(z1) > 2, np.abs(z2) > 2)


@given(seeds, st.floats(0.5, 3.0), st.floats(0.0, 1.0))
def test_cutoff_monotone(seed, c1, dc):
    x = np.random.default_rng(seed).normal(size=(300, 2))
    s = compute_stats(x, ["a", "b"])
    z = np.abs((x - s.mu) / s.sigma)
    high = z > c1 + dc
    low = z > c1
    assert not (high & ~low).any()


@given(jump_windows)
def test_probability_bounds_and_diagonal(I):
    P = conditional_probability(I)
    assert ((P >= 0) & (P <= 1)).all()
    jumped = I.sum(axis=0) > 0
    assert (np.diag(P)[jumped] == 1).all()


@given(jump_windows)
def test_window_duplication(I):
    assert np.array_equal(conditional_probability(I), conditional_probability(np.vstack([I, I])))


@given(jump_windows)
def test_flow_identity(I):
    P = conditional_probability(I)
    M, m = masses(P)
    Q, G = flows(P, M, m)
    ref = M[:, None] * m[None, :] * P ** 2
    assert np.allclose(G, ref, rtol=1e-12, atol=0)
    assert (G >= 0).all()
    assert np.allclose(M, P.sum(axis=0)) and np.allclose(m, P.sum(axis=1))
    pos = P > 0
    assert np.allclose(Q[pos], 1 / P[pos]) and (G[~pos] == 0).all()


@given(arrays(float, (5, 5), elements=st.floats(0, 1)))
def test_symmetric_probability_gives_symmetric_flows(A):
    P = (A + A.T) / 2
    M, m = masses(P)
    _, G = flows(P, M, m)
    assert np.allclose(M, m, rtol=1e-12)
    assert np.allclose(G, G.T, rtol=1e-12, atol=0)


def _model(seed, n):
    rng = np.random.default_rng(seed)
    I = (rng.random((80, n)) < 0.2).astype(np.int8)
    I[0] = 1
    return build_network(I, tuple(f"m{k}" for k in range(n)))


@given(seeds, st.integers(2, 7), st.floats(0.1, 10.0))
def test_node_homogeneity(seed, n, t):
    mdl = build_model(_model(seed, n))
    lam_t = largest_eigenvalue(assemble(mdl.node * t, mdl.U, mdl.E))[0]
    assert abs(lam_t - t * mdl.lam) <= 1e-9 * max(1.0, t * mdl.lam)


@given(seeds, st.integers(2, 7))
def test_permutation_invariance(seed, n):
    net = _model(seed, n)
    perm = np.random.default_rng(seed).permutation(n)
    P = net.P[np.ix_(perm, perm)]
    M, m = masses(P)
    Q, G = flows(P, M, m)
    pnet = FlowNetwork(tuple(net.markets[k] for k in perm), P, M, m, Q, G, None, net.exponents)
    assert abs(build_model(pnet).lam - build_model(net).lam) <= 1e-9


@given(seeds, st.integers(2, 7))
def test_rows_normalized_and_flow_cancellation(seed, n):
    net = _model(seed, n)
    s = distribution_matrix(net.G, "outflow").sum(axis=1)
    assert np.all((np.abs(s - 1) < 1e-12) | (s == 0))
    E = edge_factors(net.G, "flow")
    assert (E[net.G.T > 0] == 1.0).all()


@given(seeds, st.integers(2, 6), st.floats(0.2, 1.8))
def test_stability_equivalence(seed, n, target):
    assume(abs(target - 0.9) > 0.05)
    mdl = build_model(_model(seed, n))
    assume(mdl.lam > 0)
    node = mdl.node * target / mdl.lam
    T = assemble(node, mdl.U, mdl.E)
    lam = largest_eigenvalue(T)[0]
    path = simulate_shock(T, np.ones(n), 200)
    decayed = (not path.explosive) and path.norms[-1] < 1e-9
    assert decayed == (lam < 0.9)


@given(seeds, st.integers(2, 6))
def test_zero_perturbation_exact(seed, n):
    mdl = build_model(_model(seed, n))
    t = contributions(mdl, mdl)
    assert t.node_contrib == t.flow_contrib == t.edge_contrib == t.residual == 0.0
