"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
import logging
import math

import numpy as np
import pytest

from lib.core.core_graph import VIEW_NODE_KINDS, EdgeKind, KnowledgeGraph, Node, NodeKind, make_node_id
from lib.core.core_pagerank import (
    personalized_pagerank,
    reachable_nodes,
    rwr_sample,
    validate_personalization,
)
from lib.core.core_schemas_errors import InvalidPersonalizationError


def _dense_pagerank(graph: KnowledgeGraph, personalization: dict[str, float], damping: float) -> dict[str, float]:
    """Solve the PageRank fixed point exactly with a dense linear system."""
    order, adjacency = graph.to_undirected_adjacency()
    dense = adjacency.toarray()
    degree = dense.sum(axis=0)
    dangling = (degree == 0).astype(np.float64)
    transition = np.divide(dense, degree, out=np.zeros_like(dense), where=degree > 0)

    p = np.array([personalization.get(node_id, 0.0) for node_id in order])
    p = p / p.sum()
    system = np.eye(len(order)) - damping * transition - damping * np.outer(p, dangling)
    x = np.linalg.solve(system, (1.0 - damping) * p)
    return dict(zip(order, x / x.sum(), strict=True))


def _isolated(graph: KnowledgeGraph, text: str) -> str:
    node_id = make_node_id(text, NodeKind.ENTITY)
    graph.insert_node(Node(id=node_id, kind=NodeKind.ENTITY, text=text))
    return node_id


def _chain(length: int) -> KnowledgeGraph:
    graph = KnowledgeGraph()
    for index in range(length - 1):
        graph.add_triple(f"n{index}", "next", f"n{index + 1}", EdgeKind.ENTITY_ENTITY, f"p{index}")
    return graph


##################################################################################################################
#   PERSONALIZATION
##################################################################################################################

@pytest.mark.parametrize(
    "weights",
    [
        {},
        {"nowhere": 1.0},
        {"a": -1.0},
        {"a": math.nan},
        {"a": math.inf},
        {"a": 0.0, "b": 0.0},
    ],
)
def test_invalid_personalization(weights: dict[str, float]) -> None:
    with pytest.raises(InvalidPersonalizationError):
        validate_personalization(weights, ["a", "b"])


def test_personalization_is_normalized() -> None:
    assert validate_personalization({"a": 1.0, "b": 3.0}, ["a", "b", "c"]).tolist() == [0.25, 0.75, 0.0]


##################################################################################################################
#   PAGERANK
##################################################################################################################

@pytest.mark.parametrize("damping", [0.5, 0.85, 0.9])
def test_matches_the_dense_solution(line_graph: KnowledgeGraph, damping: float) -> None:
    a = line_graph.find_node("A", NodeKind.ENTITY)
    c = line_graph.find_node("C", NodeKind.ENTITY)
    personalization = {a: 1.0, c: 0.5}

    scores = personalized_pagerank(line_graph, personalization, damping=damping, tolerance=1e-13, max_iter=2000)
    expected = _dense_pagerank(line_graph, personalization, damping)

    assert scores.keys() == expected.keys()
    for node_id, score in expected.items():
        assert scores[node_id] == pytest.approx(score, abs=1e-9)
    assert sum(scores.values()) == pytest.approx(1.0)


def test_dangling_mass_returns_to_the_personalization(line_graph: KnowledgeGraph) -> None:
    lonely = _isolated(line_graph, "Lonely")
    a = line_graph.find_node("A", NodeKind.ENTITY)
    personalization = {a: 1.0, lonely: 1.0}

    scores = personalized_pagerank(line_graph, personalization, tolerance=1e-13, max_iter=2000)
    expected = _dense_pagerank(line_graph, personalization, 0.9)

    assert scores[lonely] == pytest.approx(expected[lonely], abs=1e-9)
    assert scores[lonely] == pytest.approx(1.0 / 11.0, abs=1e-9)


def test_all_mass_on_an_isolated_node_stays_there(line_graph: KnowledgeGraph) -> None:
    lonely = _isolated(line_graph, "Lonely")

    scores = personalized_pagerank(line_graph, {lonely: 2.0})

    assert scores[lonely] == pytest.approx(1.0)
    assert sum(score for node_id, score in scores.items() if node_id != lonely) == pytest.approx(0.0)


def test_seed_outranks_distant_nodes() -> None:
    graph = _chain(6)
    nodes = [graph.find_node(f"n{index}", NodeKind.ENTITY) for index in range(6)]

    scores = personalized_pagerank(graph, {nodes[0]: 1.0}, damping=0.5)

    assert max(scores, key=scores.__getitem__) == nodes[0]
    assert scores[nodes[1]] > scores[nodes[5]]


def test_restriction_to_a_subgraph(line_graph: KnowledgeGraph) -> None:
    a, b = (line_graph.find_node(text, NodeKind.ENTITY) for text in "AB")

    scores = personalized_pagerank(line_graph, {a: 1.0}, node_ids=[a, b])

    assert list(scores) == [a, b]
    assert sum(scores.values()) == pytest.approx(1.0)


def test_personalization_outside_the_subgraph_is_refused(line_graph: KnowledgeGraph) -> None:
    a, c = (line_graph.find_node(text, NodeKind.ENTITY) for text in "AC")

    with pytest.raises(InvalidPersonalizationError):
        personalized_pagerank(line_graph, {c: 1.0}, node_ids=[a])


def test_non_convergence_is_logged(line_graph: KnowledgeGraph, caplog: pytest.LogCaptureFixture) -> None:
    a = line_graph.find_node("A", NodeKind.ENTITY)

    with caplog.at_level(logging.WARNING, logger="lib.core.core_pagerank"):
        scores = personalized_pagerank(line_graph, {a: 1.0}, tolerance=0.0, max_iter=2)

    assert "did not converge" in caplog.text
    assert sum(scores.values()) == pytest.approx(1.0)


##################################################################################################################
#   SAMPLING
##################################################################################################################

def test_reachable_nodes_follow_every_edge_kind(line_graph: KnowledgeGraph) -> None:
    a = line_graph.find_node("A", NodeKind.ENTITY)
    lonely = _isolated(line_graph, "Lonely")

    reachable = reachable_nodes(line_graph, [a])

    assert reachable[0] == a
    assert set(reachable) == set(line_graph.node_ids()) - {lonely}
    assert reachable_nodes(line_graph, [lonely]) == [lonely]


def test_small_components_are_returned_whole(line_graph: KnowledgeGraph) -> None:
    a = line_graph.find_node("A", NodeKind.ENTITY)

    sample = rwr_sample(line_graph, [a], sampling_area=50, restart=0.15, rng=np.random.default_rng(0))

    assert sample == reachable_nodes(line_graph, [a])


def test_walk_collects_the_sampling_area() -> None:
    graph = _chain(60)
    seeds = [graph.find_node("n0", NodeKind.ENTITY), graph.find_node("n30", NodeKind.ENTITY)]

    sample = rwr_sample(graph, seeds, sampling_area=12, restart=0.15, rng=np.random.default_rng(1))
    again = rwr_sample(graph, seeds, sampling_area=12, restart=0.15, rng=np.random.default_rng(1))

    assert len(sample) == 12
    assert sample[:2] == seeds
    assert len(set(sample)) == 12
    assert sample == again


def test_walk_that_always_restarts_keeps_only_the_seeds() -> None:
    graph = _chain(60)
    seeds = [graph.find_node("n0", NodeKind.ENTITY)]

    assert rwr_sample(graph, seeds, sampling_area=5, restart=1.0, rng=np.random.default_rng(0)) == seeds


def test_no_seeds_no_sample(line_graph: KnowledgeGraph) -> None:
    assert rwr_sample(line_graph, [], sampling_area=5, restart=0.15, rng=np.random.default_rng(0)) == []


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_random_graphs_match_the_dense_solution(seed: int) -> None:
    rng = np.random.default_rng(seed)
    graph = KnowledgeGraph()
    for edge in range(60):
        head, tail = rng.choice(30, size=2, replace=False)
        graph.add_triple(f"n{head}", f"r{edge % 4}", f"n{tail}", EdgeKind.ENTITY_ENTITY, f"p{edge % 7}")
    order = graph.node_ids()
    personalization = {order[index]: float(rng.random()) for index in rng.choice(len(order), size=3, replace=False)}

    scores = personalized_pagerank(graph, personalization, tolerance=1e-13, max_iter=5000)
    expected = _dense_pagerank(graph, personalization, 0.9)

    for node_id, score in expected.items():
        assert scores[node_id] == pytest.approx(score, abs=1e-8)


@pytest.mark.parametrize(
    ("view", "texts"),
    [
        ("entity", {"Alice", "AcmeCorp", "p1"}),
        ("entity_event", {"Alice", "AcmeCorp", "the merger", "p1"}),
        ("full", {"Alice", "AcmeCorp", "the merger", "person", "p1"}),
    ],
)
def test_graph_views_bound_the_pagerank_nodes(layered_graph: KnowledgeGraph, view: str, texts: set[str]) -> None:
    alice = layered_graph.find_node("Alice", NodeKind.ENTITY)

    scores = personalized_pagerank(layered_graph, {alice: 1.0}, kinds=VIEW_NODE_KINDS[view])

    assert {layered_graph.text(node_id) for node_id in scores} == texts
    assert sum(scores.values()) == pytest.approx(1.0)


def test_event_nodes_outside_the_view_reject_personalization(layered_graph: KnowledgeGraph) -> None:
    merger = layered_graph.find_node("the merger", NodeKind.EVENT)

    with pytest.raises(InvalidPersonalizationError, match="outside the graph"):
        personalized_pagerank(layered_graph, {merger: 1.0}, kinds=VIEW_NODE_KINDS["entity"])


def test_walk_sample_stays_inside_the_view(layered_graph: KnowledgeGraph) -> None:
    alice = layered_graph.find_node("Alice", NodeKind.ENTITY)

    sample = rwr_sample(layered_graph, [alice], 10, 0.15, np.random.default_rng(0), VIEW_NODE_KINDS["entity"])

    assert {layered_graph.text(node_id) for node_id in sample} == {"Alice", "AcmeCorp", "p1"}
