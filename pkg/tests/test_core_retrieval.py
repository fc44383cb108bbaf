"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
import numpy as np
import pytest
from pydantic import ValidationError

from lib.core.core_config import LargeKGConfig, PPRConfig, RetrieveConfig, ToGConfig
from lib.core.core_gateway import MockGateway
from lib.core.core_graph import VIEW_EDGE_KINDS, EdgeKind, KnowledgeGraph, NodeKind
from lib.core.core_retrieval import (
    Path,
    RetrievalIndexes,
    RetrievalResult,
    aggregate_passage_scores,
    large_kg_retrieve,
    link_entities,
    ner,
    ppr_retrieve,
    query_to_edge_scores,
    rank_passages,
    retrieve,
    retrieve_seed_nodes,
    score_path,
    tog_answer,
    tog_prune,
    tog_search,
    view_indexes,
)
from lib.core.core_vector_index import VectorIndex, edge_id, edge_index, node_index, passage_index

from .conftest import unit


class FixedEmbeddingGateway(MockGateway):
    """Mock gateway whose embeddings come from a lookup table."""

    def __init__(self, vectors: dict[str, list[float]] | None = None, **kwargs) -> None:
        super().__init__(**kwargs)
        self.vectors = vectors or {}

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        return [unit(self.vectors[text]) for text in texts]


@pytest.fixture
def company_graph() -> KnowledgeGraph:
    """Alice -founded-> AcmeCorp -located in-> Ashville, one passage per edge."""
    graph = KnowledgeGraph()
    graph.add_passage("p1", "Alice founded AcmeCorp.")
    graph.add_passage("p2", "AcmeCorp is located in Ashville.")
    graph.add_triple("Alice", "founded", "AcmeCorp", EdgeKind.ENTITY_ENTITY, "p1")
    graph.add_triple("AcmeCorp", "located in", "Ashville", EdgeKind.ENTITY_ENTITY, "p2")
    return graph


@pytest.fixture
def line_indexes(line_graph: KnowledgeGraph) -> RetrievalIndexes:
    """Two-dimensional indexes over the A -> B -> C graph."""
    a, b, c = (line_graph.find_node(text, NodeKind.ENTITY) for text in "ABC")
    return RetrievalIndexes(
        nodes=VectorIndex.build([(a, unit([1.0, 0.0])), (b, unit([0.0, 1.0])), (c, unit([1.0, 1.0]))]),
        edges=VectorIndex.build([(edge_id(a, "r1", b), unit([1.0, 0.0])), (edge_id(b, "r2", c), unit([0.0, 1.0]))]),
        passages=VectorIndex.build([("p1", unit([1.0, 0.0])), ("p2", unit([0.0, 1.0]))]),
    )


def _node(graph: KnowledgeGraph, text: str) -> str:
    return graph.find_node(text, NodeKind.ENTITY)


##################################################################################################################
#   PATHS AND RESULTS
##################################################################################################################

def test_path_render_and_triples(company_graph: KnowledgeGraph) -> None:
    alice, acme = _node(company_graph, "Alice"), _node(company_graph, "AcmeCorp")

    path = Path.start(acme).extend("founded", alice, forward=False)

    assert path.render(company_graph) == "AcmeCorp <- founded <- Alice"
    assert path.triples(company_graph) == [("Alice", "founded", "AcmeCorp")]
    assert path.last == alice


def test_path_cannot_revisit_a_node(company_graph: KnowledgeGraph) -> None:
    alice, acme = _node(company_graph, "Alice"), _node(company_graph, "AcmeCorp")

    with pytest.raises(ValidationError, match="revisit"):
        Path.start(alice).extend("founded", acme, forward=True).extend("founded", alice, forward=False)


def test_result_scores_must_not_increase() -> None:
    with pytest.raises(ValidationError, match="non-increasing"):
        RetrievalResult(method="ppr", question="q", scores=[0.1, 0.2])


def test_result_json_is_stable() -> None:
    result = RetrievalResult.ranked("ppr", "q", [("p2", 0.5), ("p1", 0.25)], answer="x")

    assert result.to_json() == RetrievalResult.model_validate_json(result.to_json()).to_json()
    assert result.passage_ids == ["p2", "p1"]


def test_aggregate_passage_scores(line_graph: KnowledgeGraph) -> None:
    scores = {
        _node(line_graph, "A"): 0.2,
        _node(line_graph, "B"): 0.3,
        line_graph.passage_node("p2"): 0.1,
    }

    aggregated = aggregate_passage_scores(line_graph, scores)

    assert aggregated == pytest.approx({"p1": 0.5, "p2": 0.4})


def test_rank_passages_drops_zero_and_breaks_ties_by_id() -> None:
    ranking = rank_passages({"b": 0.5, "a": 0.5, "c": 0.0, "d": 0.7}, 3)

    assert ranking == [("d", 0.7), ("a", 0.5), ("b", 0.5)]


##################################################################################################################
#   ENTITIES
##################################################################################################################

def test_ner_drops_question_words(mock_gateway: MockGateway) -> None:
    assert ner("Who founded Black Mountain College?", mock_gateway) == ["Black Mountain College"]
    assert ner("what is this?", mock_gateway) == []


def test_link_entities_keeps_the_best_similarity(line_graph: KnowledgeGraph, line_indexes: RetrievalIndexes) -> None:
    gateway = FixedEmbeddingGateway({"x": [1.0, 0.0], "y": [1.0, 1.0]})

    linked = dict(link_entities(["x", "y"], line_indexes.nodes, gateway, k=3))

    assert linked[_node(line_graph, "A")] == pytest.approx(1.0)
    assert linked[_node(line_graph, "C")] == pytest.approx(1.0)
    assert _node(line_graph, "B") in linked


def test_link_entities_similarity_floor(line_indexes: RetrievalIndexes) -> None:
    gateway = FixedEmbeddingGateway({"x": [1.0, 0.0]})

    assert len(link_entities(["x"], line_indexes.nodes, gateway, k=3, min_similarity=0.5)) == 2
    assert link_entities([], line_indexes.nodes, gateway, k=3) == []


##################################################################################################################
#   PATH SEARCH
##################################################################################################################

def test_search_extends_forward_then_backward(company_graph: KnowledgeGraph) -> None:
    alice, acme, ashville = (_node(company_graph, text) for text in ("Alice", "AcmeCorp", "Ashville"))

    expanded = tog_search("q", [Path.start(acme)], company_graph)

    assert [path.nodes for path in expanded] == [(acme, ashville), (acme, alice)]
    assert [path.forward for path in expanded] == [(True,), (False,)]


def test_search_keeps_dead_ends(company_graph: KnowledgeGraph) -> None:
    alice, acme, ashville = (_node(company_graph, text) for text in ("Alice", "AcmeCorp", "Ashville"))
    full = Path.start(alice).extend("founded", acme, forward=True).extend("located in", ashville, forward=True)

    assert tog_search("q", [full], company_graph) == [full]


@pytest.mark.parametrize(("raw", "score"), [("4", 4), ("Score: 5 of 5", 5), ("great", 1), ("9", 1)])
def test_score_path_parses_the_first_digit(company_graph: KnowledgeGraph, raw: str, score: int) -> None:
    gateway = MockGateway(default=raw)

    assert score_path("q", Path.start(_node(company_graph, "Alice")), company_graph, gateway) == score


def test_score_path_failure_scores_lowest(company_graph: KnowledgeGraph) -> None:
    gateway = MockGateway(default="5")
    gateway.fail()

    assert score_path("q", Path.start(_node(company_graph, "Alice")), company_graph, gateway) == 1


def test_prune_keeps_the_best_and_input_order_on_ties(company_graph: KnowledgeGraph, mock_gateway: MockGateway) -> None:
    alice, acme, ashville = (_node(company_graph, text) for text in ("Alice", "AcmeCorp", "Ashville"))
    short_one, short_two = Path.start(alice), Path.start(ashville)
    long_path = Path.start(alice).extend("founded", acme, forward=True)

    pruned = tog_prune("q", [short_one, short_two, long_path], 2, mock_gateway, company_graph)

    assert pruned == [long_path, short_one]


def test_tog_answers_from_chained_paths(company_graph: KnowledgeGraph, mock_gateway: MockGateway) -> None:
    nodes = node_index(company_graph, mock_gateway)

    result = tog_answer("Where is the company founded by Alice?", company_graph, nodes, ToGConfig(k=1), mock_gateway)

    assert result.answer == "Ashville"
    assert result.paths == ["Alice -> founded -> AcmeCorp -> located in -> Ashville"]
    assert result.triples == [("Alice", "founded", "AcmeCorp"), ("AcmeCorp", "located in", "Ashville")]
    assert result.passage_ids == ["p1", "p2"]
    assert result.scores == [2.0, 2.0]


def test_tog_at_depth_zero_answers_from_the_initial_nodes(company_graph: KnowledgeGraph, mock_gateway: MockGateway) -> None:
    nodes = node_index(company_graph, mock_gateway)

    result = tog_answer("Who is Alice?", company_graph, nodes, ToGConfig(k=1, d_max=0), mock_gateway)

    assert result.answer == "Alice"
    assert result.triples == []
    assert result.paths == ["Alice"]
    assert result.passage_ids == ["p1"]


def test_tog_without_entities(company_graph: KnowledgeGraph, mock_gateway: MockGateway) -> None:
    nodes = node_index(company_graph, mock_gateway)

    result = tog_answer("what is this?", company_graph, nodes, ToGConfig(), mock_gateway)

    assert result.diagnostic == "no entities found in the question"
    assert result.passages == []
    assert result.answer is None


def test_tog_without_matching_nodes(company_graph: KnowledgeGraph, mock_gateway: MockGateway) -> None:
    nodes = node_index(company_graph, mock_gateway)

    result = tog_answer("Who is Zebulon?", company_graph, nodes, ToGConfig(min_similarity=0.99), mock_gateway)

    assert result.diagnostic == "no graph node matches the question entities"


##################################################################################################################
#   PERSONALIZED PAGERANK
##################################################################################################################

def test_edge_scores_follow_the_filter(line_graph: KnowledgeGraph, line_indexes: RetrievalIndexes) -> None:
    gateway = FixedEmbeddingGateway({"q": [1.0, 0.2]}, default="[1]")

    scores = query_to_edge_scores("q", line_graph, line_indexes.edges, PPRConfig(), gateway)

    assert scores == pytest.approx({_node(line_graph, "B"): 0.5, _node(line_graph, "C"): 0.5})


def test_edge_scores_with_no_positive_similarity(line_graph: KnowledgeGraph, line_indexes: RetrievalIndexes) -> None:
    gateway = FixedEmbeddingGateway({"q": [-1.0, 0.0]}, default="[0, 1]")

    scores = query_to_edge_scores("q", line_graph, line_indexes.edges, PPRConfig(), gateway)

    a, b, c = (_node(line_graph, text) for text in "ABC")
    assert scores == pytest.approx({a: 0.25, b: 0.5, c: 0.25})


def test_unparseable_edge_filter_keeps_every_edge(line_graph: KnowledgeGraph, line_indexes: RetrievalIndexes) -> None:
    gateway = FixedEmbeddingGateway({"q": [1.0, 1.0]}, default="I cannot decide")

    scores = query_to_edge_scores("q", line_graph, line_indexes.edges, PPRConfig(), gateway)

    assert len(scores) == 3


def test_empty_filter_falls_back_to_passage_similarity(line_graph: KnowledgeGraph, line_indexes: RetrievalIndexes) -> None:
    gateway = FixedEmbeddingGateway({"q": [1.0, 0.2]}, default="[]")

    result = ppr_retrieve("q", line_graph, line_indexes, PPRConfig(), gateway)

    expected = unit([1.0, 0.2])
    assert result.passage_ids == ["p1", "p2"]
    assert result.scores == pytest.approx([0.9 * expected[0], 0.9 * expected[1]])


def test_ppr_ranks_the_passage_of_the_kept_edge_first(line_graph: KnowledgeGraph, line_indexes: RetrievalIndexes) -> None:
    gateway = FixedEmbeddingGateway.from_yaml(vectors={"q": [1.0, 0.1]})

    result = ppr_retrieve("q", line_graph, line_indexes, PPRConfig(top_k_passages=1), gateway, generate=True)

    assert result.passage_ids == ["p1"]
    assert 0.0 < result.scores[0] <= 1.0
    assert result.answer == "A r1 B."


def test_ppr_ner_mode(line_graph: KnowledgeGraph, line_indexes: RetrievalIndexes) -> None:
    gateway = FixedEmbeddingGateway.from_yaml(vectors={"Where is C?": [0.0, 1.0], "C": [1.0, 1.0]})

    result = ppr_retrieve("Where is C?", line_graph, line_indexes, PPRConfig(mode="ner"), gateway)

    assert result.passage_ids[0] == "p2"
    assert result.scores == sorted(result.scores, reverse=True)


def test_ppr_with_zero_passages(line_graph: KnowledgeGraph, line_indexes: RetrievalIndexes) -> None:
    result = ppr_retrieve("q", line_graph, line_indexes, PPRConfig(top_k_passages=0), MockGateway())

    assert result.passages == []
    assert result.diagnostic == "top_k_passages is 0"


def test_ppr_needs_its_indexes(line_graph: KnowledgeGraph) -> None:
    with pytest.raises(ValueError, match="missing an index"):
        ppr_retrieve("q", line_graph, RetrievalIndexes(), PPRConfig(), MockGateway())


##################################################################################################################
#   LARGE-GRAPH RETRIEVAL
##################################################################################################################

def test_seed_nodes_are_capped(company_graph: KnowledgeGraph, mock_gateway: MockGateway) -> None:
    nodes = node_index(company_graph, mock_gateway)
    cfg = LargeKGConfig(number_of_source_nodes=1, sampling_area=1, top_k_per_entity=3)

    seeds = retrieve_seed_nodes("Who is Alice?", company_graph, nodes, cfg, mock_gateway, np.random.default_rng(0))

    assert len(seeds) == 1
    assert seeds[0] in nodes


def test_large_graph_retrieval_prefers_the_seed_passage(company_graph: KnowledgeGraph, mock_gateway: MockGateway) -> None:
    nodes = node_index(company_graph, mock_gateway)
    cfg = LargeKGConfig(top_k_per_entity=1)

    result = large_kg_retrieve("Who is Alice?", company_graph, nodes, cfg, mock_gateway, np.random.default_rng(0))

    assert result.passage_ids == ["p1", "p2"]
    assert result.scores[0] > result.scores[1]
    assert result.answer is None


def test_large_graph_retrieval_without_seeds(company_graph: KnowledgeGraph, mock_gateway: MockGateway) -> None:
    nodes = node_index(company_graph, mock_gateway)

    result = large_kg_retrieve("what is this?", company_graph, nodes, LargeKGConfig(), mock_gateway, np.random.default_rng(0))

    assert result.passages == []
    assert result.scores == [0.0]
    assert result.diagnostic == "no source node for the question"


##################################################################################################################
#   DISPATCH
##################################################################################################################

@pytest.fixture
def fixture_indexes(fixture_graph: KnowledgeGraph, mock_gateway: MockGateway) -> RetrievalIndexes:
    return RetrievalIndexes(
        nodes=node_index(fixture_graph, mock_gateway),
        edges=edge_index(fixture_graph, mock_gateway),
        passages=passage_index(fixture_graph, mock_gateway),
    )


@pytest.mark.parametrize("method", ["tog", "ppr", "large"])
def test_every_method_is_deterministic_on_the_fixture_graph(
    fixture_graph: KnowledgeGraph, fixture_indexes: RetrievalIndexes, mock_gateway: MockGateway, method: str
) -> None:
    first = retrieve("Who founded AcmeCorp?", method, fixture_graph, fixture_indexes, RetrieveConfig(), mock_gateway, seed=3)
    second = retrieve("Who founded AcmeCorp?", method, fixture_graph, fixture_indexes, RetrieveConfig(), mock_gateway, seed=3)

    assert first.to_json() == second.to_json()
    assert first.method == method
    assert set(first.passage_ids) <= set(fixture_graph.passages)
    assert first.answer is not None


def test_ppr_finds_the_founding_passage(
    fixture_graph: KnowledgeGraph, fixture_indexes: RetrievalIndexes, mock_gateway: MockGateway
) -> None:
    result = retrieve("Who founded AcmeCorp?", "ppr", fixture_graph, fixture_indexes, RetrieveConfig(), mock_gateway)

    assert "doc-00#0" in result.passage_ids
    assert len(result.passage_ids) == 5


def test_unknown_method_and_missing_node_index(line_graph: KnowledgeGraph) -> None:
    with pytest.raises(ValueError, match="Unknown retrieval method"):
        retrieve("q", "bm25", line_graph, RetrievalIndexes(), RetrieveConfig(), MockGateway())
    with pytest.raises(ValueError, match="node index"):
        retrieve("q", "tog", line_graph, RetrievalIndexes(), RetrieveConfig(), MockGateway())
    with pytest.raises(ValueError, match="node index"):
        retrieve("q", "large", line_graph, RetrievalIndexes(), RetrieveConfig(), MockGateway())


##################################################################################################################
#   GRAPH VIEWS
##################################################################################################################

def test_view_indexes_keep_visible_nodes_and_edges(layered_graph: KnowledgeGraph) -> None:
    alice, acme = _node(layered_graph, "Alice"), _node(layered_graph, "AcmeCorp")
    merger = layered_graph.find_node("the merger", NodeKind.EVENT)
    indexes = RetrievalIndexes(
        nodes=VectorIndex.build([(alice, unit([1.0, 0.0])), (acme, unit([0.0, 1.0])), (merger, unit([1.0, 1.0]))]),
        edges=VectorIndex.build(
            [(edge_id(alice, "founded", acme), unit([1.0, 0.0])), (edge_id(merger, "involved", acme), unit([0.0, 1.0]))]
        ),
        passages=VectorIndex.build([("p1", unit([1.0, 0.0]))]),
    )

    entity = view_indexes(layered_graph, indexes, "entity")
    assert entity.nodes.ids == sorted([alice, acme])
    assert entity.edges.ids == [edge_id(alice, "founded", acme)]
    assert entity.passages is indexes.passages
    assert entity.nodes.dim == 2

    assert view_indexes(layered_graph, indexes, "entity_event").nodes is indexes.nodes
    assert view_indexes(layered_graph, indexes, "full") is indexes


@pytest.mark.parametrize(
    ("view", "texts"),
    [
        ("entity", {"Alice", "AcmeCorp"}),
        ("entity_event", {"Alice", "AcmeCorp", "the merger"}),
        ("full", {"Alice", "AcmeCorp", "the merger", "person"}),
    ],
)
def test_search_follows_the_edge_kinds_of_the_view(layered_graph: KnowledgeGraph, view: str, texts: set[str]) -> None:
    starts = [Path.start(_node(layered_graph, "Alice")), Path.start(_node(layered_graph, "AcmeCorp"))]

    expanded = tog_search("q", starts, layered_graph, VIEW_EDGE_KINDS[view])

    assert {layered_graph.text(path.last) for path in expanded} == texts


def test_graph_view_is_validated() -> None:
    assert RetrieveConfig().graph_view == "full"
    with pytest.raises(ValidationError):
        RetrieveConfig(graph_view="concepts")
