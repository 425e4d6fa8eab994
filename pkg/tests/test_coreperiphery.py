import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from _oracles import qcp_literal, qcp_max_enumerate, qcp_max_subset_dp, random_simple_graph
from coreperi.coreperiphery import (ConfigError, CpAssignment, NullDistributionCache, SolverConfig,
                                    count_significant, detect, detect_and_test, detect_single_core,
                                    ideal_block, increment, qcp, qcp_scaled, random_graph, sidak_alpha,
                                    structure_contributions)
from coreperi.network import ConceptNetwork
from coreperi.synthetic import planted_blocks, planted_network

FAST = SolverConfig(n_kicks=100, n_restarts=5)


def net_of(adj):
    return ConceptNetwork.from_adjacency(adj)


@st.composite
def graphs(draw, n_min=3, n_max=9):
    n = draw(st.integers(n_min, n_max))
    bits = draw(st.lists(st.booleans(), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2))
    adj = np.zeros((n, n), dtype=np.int8)
    iu, ju = np.triu_indices(n, 1)
    adj[iu, ju] = bits
    adj[ju, iu] = bits
    return adj


@st.composite
def labelled_graphs(draw):
    adj = draw(graphs())
    n = adj.shape[0]
    c = np.array(draw(st.lists(st.integers(0, 3), min_size=n, max_size=n)))
    x = np.array(draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    return adj, c, x


# ---------------------------------------------------------------- objective

@given(labelled_graphs())
def test_qcp_matches_double_loop(case):
    adj, c, x = case
    assert qcp(net_of(adj), c, x) == pytest.approx(qcp_literal(adj, c, x), abs=1e-9)


@given(labelled_graphs())
def test_qcp_invariant_to_relabelling(case):
    adj, c, x = case
    perm = np.array([7, 3, 11, 5])
    assert qcp_scaled(net_of(adj), c, x) == qcp_scaled(net_of(adj), perm[c], x)


@given(labelled_graphs())
def test_contributions_sum_to_qcp(case):
    adj, c, x = case
    net = net_of(adj)
    assert structure_contributions(net, c, x).sum() == pytest.approx(qcp(net, c, x), abs=1e-9)


@given(labelled_graphs())
def test_qcp_bounded_by_edges(case):
    # every counted pair contributes at most 1 - p, and only edges do
    adj, c, x = case
    net = net_of(adj)
    m = net.n_edges
    p = m / (adj.shape[0] * (adj.shape[0] - 1) / 2)
    assert qcp(net, c, x) <= m * (1 - p) + 1e-9


def test_ideal_block_template():
    c = [1, 1, 1, 2]
    x = [1, 0, 0, 1]
    assert ideal_block(c, x, 0, 1) == 1
    assert ideal_block(c, x, 1, 2) == 0
    assert ideal_block(c, x, 0, 3) == 0
    assert ideal_block(c, x, 0, 0) == 0


def test_idealized_single_block_value():
    adj, c, x = planted_blocks([(4, 6)])
    net = net_of(adj)
    m = net.n_edges
    p = m / (10 * 9 / 2)
    assert qcp(net, c, x) == pytest.approx(m * (1 - p), abs=1e-9)


def test_empty_and_edgeless_objective():
    net = ConceptNetwork.from_edges(3, [])
    assert qcp(net, [1, 1, 1], [1, 1, 1]) == 0.0


# ---------------------------------------------------------------- increment

@pytest.mark.parametrize("seed", range(5))
def test_increment_every_move(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 10))
    adj = random_simple_graph(n, rng.uniform(0.2, 0.7), rng)
    if adj.sum() == 0:
        adj[0, 1] = adj[1, 0] = 1
    net = net_of(adj)
    c = rng.integers(0, 3, size=n)
    x = rng.integers(0, 2, size=n)
    for i in range(n):
        for new_c, new_x in itertools.product(range(4), (0, 1)):
            c2, x2 = c.copy(), x.copy()
            c2[i], x2[i] = new_c, new_x
            direct = qcp_literal(adj, c2, x2) - qcp_literal(adj, c, x)
            assert abs(increment(net, c, x, i, new_c, new_x) - direct) < 1e-9


# ---------------------------------------------------------------- detection

@pytest.mark.parametrize("seed", range(12))
def test_detect_reaches_global_maximum_small(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(3, 7))
    adj = random_simple_graph(n, rng.uniform(0.2, 0.8), rng)
    if adj.sum() == 0:
        adj[0, 1] = adj[1, 0] = 1
    asg = detect(net_of(adj), SolverConfig(rng_seed=seed))
    assert asg.qcp == pytest.approx(qcp_max_enumerate(adj), abs=1e-9)


def test_subset_dp_agrees_with_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(6):
        n = int(rng.integers(3, 6))
        adj = random_simple_graph(n, 0.5, rng)
        assert qcp_max_subset_dp(adj) == pytest.approx(qcp_max_enumerate(adj), abs=1e-9)


@given(graphs(n_min=4, n_max=9), st.integers(0, 2**31))
def test_detect_at_least_trivial_labellings(adj, seed):
    net = net_of(adj)
    if net.n_edges == 0:
        return
    asg = detect(net, SolverConfig(rng_seed=seed, n_kicks=20, n_restarts=2))
    n = adj.shape[0]
    assert asg.qcp >= qcp(net, np.zeros(n, int), np.ones(n, int)) - 1e-12
    assert asg.qcp >= -1e-12
    assert asg.qcp == pytest.approx(qcp_literal(adj, asg.c, asg.x), abs=1e-9)


@given(graphs(n_min=4, n_max=9), st.integers(0, 2**31))
def test_plain_heuristic_is_local_optimum(adj, seed):
    # no single-node move to a neighbour label can improve the bare heuristic's result
    net = net_of(adj)
    if net.n_edges == 0:
        return
    asg = detect(net, SolverConfig(rng_seed=seed, n_kicks=0, merge_structures=False, n_restarts=1))
    for i in range(net.n_nodes):
        for j in net.neighbors(i):
            for new_x in (0, 1):
                assert increment(net, asg.c, asg.x, i, int(asg.c[j]), new_x) <= 1e-9


def test_canonical_numbering():
    net, _, _ = planted_network([(5, 3), (3, 2)])
    asg = detect(net, FAST)
    sizes = asg.structure_sizes()
    assert list(sizes) == sorted(sizes, reverse=True)
    assert set(np.unique(asg.c)) == set(range(1, asg.n_structures + 1))


def test_detect_deterministic():
    rng = np.random.default_rng(3)
    net = net_of(random_simple_graph(30, 0.2, rng))
    a = detect(net, SolverConfig(rng_seed=11))
    b = detect(net, SolverConfig(rng_seed=11))
    assert a.same_as(b)


def test_planted_blocks_recovered():
    net, c_true, x_true = planted_network([(5, 10), (5, 10)])
    asg = detect(net, FAST)
    assert asg.n_structures == 2
    assert np.array_equal(asg.x, x_true)
    for k in (1, 2):
        assert len(set(c_true[asg.c == k])) == 1


def test_single_core_mode_uses_one_structure():
    net, _, x_true = planted_network([(4, 8)], noise=0.0)
    asg = detect_single_core(net, FAST)
    assert asg.n_structures == 1
    assert np.array_equal(asg.x, x_true)


def test_detect_needs_two_nodes():
    with pytest.raises(ValueError):
        detect(ConceptNetwork.from_edges(1, []))


def test_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig(n_restarts=0)
    with pytest.raises(ConfigError):
        SolverConfig(sig_samples=50)
    with pytest.raises(ConfigError):
        SolverConfig(sig_alpha=1.5)
    SolverConfig(sig_samples=10, significance=False)


# ---------------------------------------------------------------- significance

def test_sidak():
    assert sidak_alpha(0.05, 1) == pytest.approx(0.05)
    assert sidak_alpha(0.05, 3) == pytest.approx(1 - 0.95 ** (1 / 3))


def test_random_graph_has_exact_size():
    g = random_graph(12, 20, np.random.default_rng(0))
    assert (g.n_nodes, g.n_edges) == (12, 20)


def test_planted_structures_significant_and_cached():
    rng = np.random.default_rng(8)
    net, _, _ = planted_network([(5, 15), (5, 15)], noise=0.03, rng=rng)
    cache = NullDistributionCache()
    cfg = SolverConfig(n_kicks=100)
    asg = detect_and_test(net, cfg, cache)
    assert asg.n_significant == 2
    assert asg.null_threshold is not None and len(cache) == 1
    again = count_significant(net, asg, cfg, cache)
    assert len(cache) == 1 and again.n_significant == 2


def test_random_graph_rarely_significant():
    rng = np.random.default_rng(21)
    hits = 0
    cache = NullDistributionCache()
    cfg = SolverConfig(n_kicks=50, n_restarts=3)
    for s in range(10):
        net = net_of(random_simple_graph(25, 0.2, rng))
        hits += detect_and_test(net, cfg, cache).n_significant
    assert hits <= 3


def test_significance_off_flags_everything():
    net, _, _ = planted_network([(3, 4), (3, 4)])
    asg = detect_and_test(net, SolverConfig(significance=False, sig_samples=1, n_kicks=10))
    assert asg.n_significant == asg.n_structures


def test_assignment_accessors():
    asg = CpAssignment(np.array([1, 1, 2]), np.array([1, 0, 1]), 0.5, np.array([0.2, 0.1]),
                       np.array([True, False]))
    assert asg.n_structures == 2 and asg.n_significant == 1 and asg.n_nodes == 3
    assert list(asg.structure_sizes()) == [2, 1]
    assert list(asg.core_nodes()) == [0, 2]
    assert list(asg.members(1)) == [0, 1]
