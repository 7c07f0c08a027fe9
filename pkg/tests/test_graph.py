import random

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given

from superhighway.errors import GraphInvariantError, NotFound
from superhighway.graph import (
    CrossDomainSystem,
    Domain,
    DomainGraph,
    Namespace,
    NodeId,
    StructureKind,
    WeightedGraph,
    item,
    merge_highway,
    neighbors,
    single_structure,
    stats,
    user,
)

from .conftest import random_toy_system, toy_systems
from .oracles import adjacency_from_edges, union_counts


def dg(domain, rows, **kw):
    return DomainGraph.from_interactions(domain, rows, **kw)


def test_nodeid_equality_and_namespacing():
    assert item("a") == NodeId(Namespace.ITEM, "a")
    assert user(Domain.SOURCE, "a") != user(Domain.TARGET, "a")
    assert user(Domain.SOURCE, "a") != item("a")
    assert NodeId.parse(str(user(Domain.TARGET, "x:y"))) == user(Domain.TARGET, "x:y")


def test_neighbors_readback():
    g = dg(Domain.SOURCE, [("u1", "i2", 1.0), ("u1", "i1", 1.0)], users=["lonely"])
    assert neighbors(g, user(Domain.SOURCE, "u1")) == [(item("i1"), 1.0), (item("i2"), 1.0)]
    assert neighbors(g, user(Domain.SOURCE, "lonely")) == []
    with pytest.raises(NotFound):
        neighbors(g, user(Domain.SOURCE, "ghost"))


def test_neighbors_match_edge_scan():
    rng = random.Random(5)
    for _ in range(20):
        nodes = [item(f"n{k}") for k in range(5)]
        edges = []
        for a in range(5):
            for b in range(a + 1, 5):
                if rng.random() < 0.5:
                    edges.append((nodes[a], nodes[b], rng.choice([0.5, 1.0, 2.0])))
        g = WeightedGraph.from_edges(edges, nodes=nodes)
        adj = adjacency_from_edges(edges)
        for n in nodes:
            assert neighbors(g, n) == sorted(adj.get(n, {}).items())


def test_degree_sum_is_twice_edges():
    for seed in range(10):
        sys, _, _ = random_toy_system(seed)
        for g in (sys.source, sys.target, merge_highway(sys).graph):
            assert int(g.degrees().sum()) == 2 * g.num_edges


def test_rejects_invalid_graphs():
    a, b = item("a"), item("b")
    with pytest.raises(GraphInvariantError):
        WeightedGraph.from_edges([(a, b, 0.0)])
    with pytest.raises(GraphInvariantError):
        WeightedGraph.from_edges([(a, b, -1.0)])
    with pytest.raises(GraphInvariantError):
        WeightedGraph.from_edges([(a, a, 1.0)])
    with pytest.raises(GraphInvariantError):
        WeightedGraph.from_edges([(a, b, 1.0), (b, a, 2.0)])
    with pytest.raises(GraphInvariantError):
        WeightedGraph([a, b], sp.csr_matrix(np.array([[0, 1.0], [0, 0]])))
    with pytest.raises(GraphInvariantError):
        WeightedGraph([b, a], sp.csr_matrix((2, 2)))


def test_domain_graph_is_bipartite_and_namespaced():
    u1, u2 = user(Domain.SOURCE, "u1"), user(Domain.SOURCE, "u2")
    g = WeightedGraph.from_edges([(u1, u2, 1.0)])
    with pytest.raises(GraphInvariantError):
        DomainGraph(Domain.SOURCE, g.nodes, g.matrix())
    g = WeightedGraph.from_edges([(user(Domain.TARGET, "v"), item("a"), 1.0)])
    with pytest.raises(GraphInvariantError):
        DomainGraph(Domain.SOURCE, g.nodes, g.matrix())


def test_duplicates_collapse_to_max(caplog):
    g = dg(Domain.TARGET, [("u", "a", 1.0), ("u", "a", 3.0)])
    assert g.num_edges == 1
    assert g.weight(user(Domain.TARGET, "u"), item("a")) == 3.0
    assert "duplicate" in caplog.text


def test_graph_arrays_are_immutable():
    g = dg(Domain.TARGET, [("u", "a", 1.0)])
    with pytest.raises(ValueError):
        g.weights[0] = 5.0


def test_shared_items_recomputed():
    sys = CrossDomainSystem(dg(Domain.SOURCE, [("u", "a", 1.0), ("u", "b", 1.0)]),
                            dg(Domain.TARGET, [("u", "b", 1.0), ("u", "c", 1.0)]))
    assert sys.shared_items == frozenset({item("b")})
    with pytest.raises(GraphInvariantError):
        CrossDomainSystem(sys.target, sys.source)


def test_merge_single_shared_item():
    sys = CrossDomainSystem(dg(Domain.SOURCE, [("u1", "a", 1.0)]), dg(Domain.TARGET, [("u2", "a", 1.0)]))
    h = merge_highway(sys)
    assert h.kind is StructureKind.HIGHWAY
    assert h.graph.num_nodes == 3 and h.graph.num_edges == 2


def test_merge_disjoint_items():
    sys = CrossDomainSystem(dg(Domain.SOURCE, [("u", "a", 1.0)]), dg(Domain.TARGET, [("u", "b", 1.0)]))
    h = merge_highway(sys)
    assert sys.shared_items == frozenset()
    assert h.graph.num_nodes == 4 and h.graph.num_edges == 2


def test_merge_matches_set_union_oracle():
    src = [(f"u{k}", i, 1.0) for k, items in enumerate([["a", "b"], ["c"], ["a", "d"]]) for i in items]
    tgt = [(f"u{k}", i, 1.0) for k, items in enumerate([["a", "e", "f"], ["c", "f"]]) for i in items]
    sys = CrossDomainSystem(dg(Domain.SOURCE, src), dg(Domain.TARGET, tgt))
    assert len(sys.shared_items) == 2
    h = merge_highway(sys)
    assert (h.graph.num_nodes, h.graph.num_edges) == union_counts(src, tgt)


@given(toy_systems())
def test_merge_properties(case):
    sys, src, tgt = case
    h = merge_highway(sys)
    n_expected = (len(sys.source.users) + len(sys.target.users) + len(sys.source.items)
                  + len(sys.target.items) - len(sys.shared_items))
    assert h.graph.num_nodes == n_expected
    assert (h.graph.num_nodes, h.graph.num_edges) == union_counts(src, tgt)
    assert merge_highway(sys) == h
    assert set(sys.source.edge_dict()) | set(sys.target.edge_dict()) == set(h.graph.edge_dict())


def test_single_structure_is_target_copy(tiny_system):
    s = single_structure(tiny_system)
    assert s.kind is StructureKind.SINGLE
    assert s.graph.nodes == tiny_system.target.nodes
    assert s.graph.edge_dict() == tiny_system.target.edge_dict()


def test_single_structure_of_empty_target():
    sys = CrossDomainSystem(dg(Domain.SOURCE, [("u", "a", 1.0)]), dg(Domain.TARGET, []))
    s = single_structure(sys)
    assert s.graph.num_nodes == 0 and s.graph.num_edges == 0
    assert stats(s).density == 0.0


def test_stats_formula():
    g = dg(Domain.TARGET, [("u1", "a", 1.0), ("u1", "b", 1.0), ("u2", "b", 1.0), ("u2", "c", 1.0)])
    r = stats(g)
    assert (r.users, r.items, r.edges) == (2, 3, 4)
    assert r.density == pytest.approx(4 / 6)
    empty = stats(dg(Domain.TARGET, []))
    assert (empty.users, empty.items, empty.edges, empty.density) == (0, 0, 0, 0.0)


def test_stats_of_scaled_target_matches_ingestion(tmp_path):
    from superhighway.data import SynthConfig, generate_synthetic, load_domain, write_tsv

    cfg = SynthConfig(users_s=50, users_t=699, items_s=60, items_t=107, interactions_per_user=8,
                      latent_dims=4, seed=2)
    sys, _ = generate_synthetic(cfg)
    path = tmp_path / "t.tsv"
    write_tsv(sys.target, path)
    reread = load_domain(path, Domain.TARGET)
    a, b = stats(single_structure(sys)), stats(reread)
    lines = path.read_text().splitlines()
    assert a.edges == b.edges == len(lines)
    assert a.users == b.users == len({ln.split("\t")[0] for ln in lines}) == 699
    assert b.items == len({ln.split("\t")[1] for ln in lines})
