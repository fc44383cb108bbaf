"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.

Query-time retrieval over a built graph: beam-style path search with model
scoring, personalized-PageRank passage retrieval and its sampled variant for
large graphs.
"""
import logging
import re
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from typing import Literal, Self

import numpy as np
import orjson
from pydantic import BaseModel, Field, model_validator

from lib.core.core_config import LargeKGConfig, PPRConfig, RetrieveConfig, ToGConfig
from lib.core.core_gateway import ChatRequest, Gateway
from lib.core.core_graph import (
    EXTRACTION_EDGE_KINDS,
    VIEW_EDGE_KINDS,
    VIEW_NODE_KINDS,
    EdgeKind,
    GraphView,
    KnowledgeGraph,
    NodeId,
    NodeKind,
)
from lib.core.core_json_repair import repair_json
from lib.core.core_pagerank import personalized_pagerank, rwr_sample
from lib.core.core_prompts import prompt_renderer
from lib.core.core_schemas_errors import GatewayError
from lib.core.core_utils import ordered_map, stable_rng
from lib.core.core_vector_index import VectorIndex


logger = logging.getLogger(__name__)

Method = Literal["tog", "ppr", "large"]
METHODS: tuple[Method, ...] = ("tog", "ppr", "large")

PATH_SCORE = re.compile(r"[1-5]")
LOWEST_PATH_SCORE = 1
FILTER_MAX_TOKENS = 256


class Path(BaseModel):
    """An alternating node/relation walk that never revisits a node.

    Attributes:
        nodes: Visited nodes, first is the initial node.
        relations: Relation of each hop.
        forward: Whether each hop follows the edge direction.
    """
    nodes: tuple[NodeId, ...]
    relations: tuple[str, ...] = ()
    forward: tuple[bool, ...] = ()

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check_walk(self) -> Self:
        if not self.nodes:
            error_message = "A path needs at least one node"
            raise ValueError(error_message)
        if not len(self.relations) == len(self.forward) == len(self.nodes) - 1:
            error_message = "A path needs one relation and one direction per hop"
            raise ValueError(error_message)
        if len(set(self.nodes)) != len(self.nodes):
            error_message = "A path cannot revisit a node"
            raise ValueError(error_message)
        return self

    @classmethod
    def start(cls, node_id: NodeId) -> "Path":
        """Return the single-node path of an initial node."""
        return cls(nodes=(node_id,))

    @property
    def last(self) -> NodeId:
        """Return the node the path ends at."""
        return self.nodes[-1]

    def extend(self, relation: str, node_id: NodeId, forward: bool) -> "Path":
        """Return the path with one more hop."""
        return Path(nodes=(*self.nodes, node_id), relations=(*self.relations, relation), forward=(*self.forward, forward))

    def triples(self, graph: KnowledgeGraph) -> list[tuple[str, str, str]]:
        """Return the hops as (head text, relation, tail text) in edge direction."""
        triples = []
        for index, (relation, forward) in enumerate(zip(self.relations, self.forward, strict=True)):
            source, target = graph.text(self.nodes[index]), graph.text(self.nodes[index + 1])
            triples.append((source, relation, target) if forward else (target, relation, source))
        return triples

    def render(self, graph: KnowledgeGraph) -> str:
        """Render as "A -> relation -> B <- relation <- C"."""
        parts = [graph.text(self.nodes[0])]
        for relation, forward, node_id in zip(self.relations, self.forward, self.nodes[1:], strict=True):
            arrow = "->" if forward else "<-"
            parts.append(f"{arrow} {relation} {arrow} {graph.text(node_id)}")
        return " ".join(parts)


class PassageScore(BaseModel):
    """A ranked passage."""
    id: str
    score: float


class RetrievalResult(BaseModel):
    """Outcome of one query.

    Attributes:
        method: Retriever used.
        question: The query.
        passages: Passages, best first.
        scores: Passage scores, non-increasing; [0.0] when large-graph
            retrieval found no seed.
        paths: Rendered supporting paths.
        triples: Supporting (head, relation, tail) triples.
        answer: Generated answer, when requested.
        diagnostic: Why the result is empty, if it is.
    """
    method: Method
    question: str
    passages: list[PassageScore] = Field(default_factory=list)
    scores: list[float] = Field(default_factory=list)
    paths: list[str] = Field(default_factory=list)
    triples: list[tuple[str, str, str]] = Field(default_factory=list)
    answer: str | None = None
    diagnostic: str | None = None

    @model_validator(mode="after")
    def _check_scores(self) -> Self:
        if any(later > earlier for earlier, later in zip(self.scores, self.scores[1:], strict=False)):
            error_message = "Retrieval scores must be non-increasing"
            raise ValueError(error_message)
        return self

    @classmethod
    def ranked(cls, method: Method, question: str, ranking: Sequence[tuple[str, float]], **kwargs: object) -> "RetrievalResult":
        """Build a result from (passage id, score) pairs, best first."""
        return cls(
            method=method,
            question=question,
            passages=[PassageScore(id=passage_id, score=score) for passage_id, score in ranking],
            scores=[score for _, score in ranking],
            **kwargs,
        )

    @property
    def passage_ids(self) -> list[str]:
        return [passage.id for passage in self.passages]

    def to_json(self) -> bytes:
        """Serialize with sorted keys; equal results give equal bytes."""
        return orjson.dumps(self.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS)


class RetrievalIndexes(BaseModel):
    """Vector indexes a retriever may need."""
    nodes: VectorIndex | None = None
    edges: VectorIndex | None = None
    passages: VectorIndex | None = None

    model_config = {"arbitrary_types_allowed": True}


def view_indexes(graph: KnowledgeGraph, indexes: RetrievalIndexes, view: GraphView) -> RetrievalIndexes:
    """Restrict the node and edge indexes to the node kinds of a graph view.

    Node ids and both endpoints of an edge id must exist in the graph with a
    kind the view keeps. Passage indexes are shared by every view.
    """
    if view == "full":
        return indexes
    kinds = VIEW_NODE_KINDS[view]

    def visible(node_id: NodeId) -> bool:
        return node_id in graph and graph.kind(node_id) in kinds

    def visible_edge(item_id: str) -> bool:
        head, _, tail = _split_edge_id(item_id)
        return visible(head) and visible(tail)

    return RetrievalIndexes(
        nodes=indexes.nodes.subset(visible) if indexes.nodes is not None else None,
        edges=indexes.edges.subset(visible_edge) if indexes.edges is not None else None,
        passages=indexes.passages,
    )


##################################################################################################################
#   SHARED STEPS
##################################################################################################################

def _chat(gateway: Gateway, template: str, data: dict[str, object], max_tokens: int) -> str:
    """Render a prompt template and send it with the reader profile."""
    prompt = prompt_renderer.render(template, data)
    return gateway.chat(ChatRequest.build(prompt, max_tokens=max_tokens, profile="reader"))


def _selected_indices(raw: str, count: int, what: str) -> list[int]:
    """Parse a JSON list of indices; a failed parse selects everything."""
    result = repair_json(raw)
    if result.status == "failed":
        logger.warning("Could not parse the %s output, keeping all %d candidates", what, count)
        return list(range(count))
    selected: dict[int, None] = {}
    for value in result.value:
        if isinstance(value, int) and not isinstance(value, bool) and 0 <= value < count:
            selected[value] = None
    return list(selected)


def ner(question: str, gateway: Gateway, max_tokens: int = FILTER_MAX_TOKENS) -> list[str]:
    """Extract the named entities of a question through the gateway.

    Returns:
        Distinct entity strings in answer order; empty when nothing parses.
    """
    raw = _chat(gateway, "prompts/ner.j2", {"question": question}, max_tokens)
    entities = [value.strip() for value in repair_json(raw).value if isinstance(value, str) and value.strip()]
    return list(dict.fromkeys(entities))


def link_entities(
    entities: Sequence[str],
    node_index: VectorIndex,
    gateway: Gateway,
    k: int,
    min_similarity: float | None = None,
) -> list[tuple[NodeId, float]]:
    """Map entity strings to graph nodes by embedding similarity.

    Args:
        entities: Entity strings.
        node_index: Index over entity and event nodes.
        gateway: Embedder.
        k: Candidates kept per entity.
        min_similarity: Drop candidates at or below this similarity.

    Returns:
        (node id, best similarity) pairs, in entity order then rank order.
    """
    if not entities or not len(node_index):
        return []
    best: dict[NodeId, float] = {}
    for vector in gateway.embed(list(entities)):
        for node_id, score in node_index.top_k(vector, k):
            if min_similarity is not None and score <= min_similarity:
                continue
            best[node_id] = max(score, best.get(node_id, score))
    return list(best.items())


def aggregate_passage_scores(graph: KnowledgeGraph, node_scores: Mapping[NodeId, float]) -> dict[str, float]:
    """Sum node scores into the passages that mention the nodes.

    A passage also receives the score of its own passage node.
    """
    passage_scores: dict[str, float] = defaultdict(float)
    for node_id, score in node_scores.items():
        if graph.kind(node_id) is NodeKind.PASSAGE:
            passage_scores[graph.text(node_id)] += score
            continue
        for passage_id in graph.mentions(node_id):
            passage_scores[passage_id] += score
    return dict(passage_scores)


def rank_passages(scores: Mapping[str, float], top_k: int) -> list[tuple[str, float]]:
    """Return the top_k positive scores ordered by score, then id."""
    ranking = sorted(((passage_id, score) for passage_id, score in scores.items() if score > 0), key=lambda item: (-item[1], item[0]))
    return ranking[:top_k]


def generate_answer(question: str, knowledge: Sequence[str], gateway: Gateway, max_tokens: int) -> str:
    """Answer the question from knowledge lines with the reader template."""
    raw = _chat(gateway, "prompts/reader_answer.j2", {"question": question, "knowledge": list(knowledge)}, max_tokens)
    return raw.strip()


def _passage_knowledge(graph: KnowledgeGraph, ranking: Sequence[tuple[str, float]]) -> list[str]:
    """Return the texts of ranked passages, the id standing in for a missing text."""
    return [graph.passages.get(passage_id) or passage_id for passage_id, _ in ranking]


##################################################################################################################
#   PATH SEARCH
##################################################################################################################

def tog_search(
    question: str,
    paths: Sequence[Path],
    graph: KnowledgeGraph,
    kinds: Iterable[EdgeKind] = EXTRACTION_EDGE_KINDS,
) -> list[Path]:
    """Extend every path by one hop to an unvisited node.

    Forward hops come first, then backward hops, each ordered by (relation,
    node). A path with no unvisited neighbor is kept unchanged. Only edges
    of the given kinds are followed. Mention edges are never among them, so
    passage nodes never enter a path.

    Args:
        question: The query (the expansion itself does not depend on it).
        paths: Current paths.
        graph: Graph.
        kinds: Edge kinds to follow; extraction edges by default.

    Returns:
        The expanded paths.
    """
    expanded: list[Path] = []
    for path in paths:
        visited = set(path.nodes)
        forward = [(relation, node_id) for relation, node_id in graph.successors(path.last, kinds) if node_id not in visited]
        backward = [(relation, node_id) for relation, node_id in graph.predecessors(path.last, kinds) if node_id not in visited]
        if not forward and not backward:
            expanded.append(path)
            continue
        expanded.extend(path.extend(relation, node_id, forward=True) for relation, node_id in forward)
        expanded.extend(path.extend(relation, node_id, forward=False) for relation, node_id in backward)
    logger.debug("Path search for %r expanded %d paths into %d", question, len(paths), len(expanded))
    return expanded


def score_path(question: str, path: Path, graph: KnowledgeGraph, gateway: Gateway, max_tokens: int = 8) -> int:
    """Ask the gateway for a 1-5 relevance score; anything unusable scores 1."""
    try:
        raw = _chat(gateway, "prompts/path_score.j2", {"question": question, "path": path.render(graph)}, max_tokens)
    except GatewayError as e:
        logger.warning("Path scoring failed, scoring 1: %s", e)
        return LOWEST_PATH_SCORE
    found = PATH_SCORE.search(raw)
    return int(found.group()) if found else LOWEST_PATH_SCORE


def tog_prune(
    question: str,
    paths: Sequence[Path],
    n: int,
    gateway: Gateway,
    graph: KnowledgeGraph,
    max_in_flight: int = 1,
) -> list[Path]:
    """Keep the n best paths by model score; ties keep input order."""
    scores = ordered_map(lambda path: score_path(question, path, graph, gateway), paths, max_in_flight)
    order = sorted(range(len(paths)), key=lambda index: -scores[index])
    return [paths[index] for index in order[:n]]


def tog_reasoning(question: str, triples: Sequence[tuple[str, str, str]], gateway: Gateway) -> bool:
    """Ask whether the triples suffice to answer the question."""
    raw = _chat(gateway, "prompts/path_reasoning.j2", {"question": question, "triples": list(triples)}, max_tokens=8)
    return raw.strip().casefold().startswith("yes")


def _path_triples(paths: Sequence[Path], graph: KnowledgeGraph) -> list[tuple[str, str, str]]:
    """Return the distinct triples of the paths in path order."""
    seen: dict[tuple[str, str, str], None] = {}
    for path in paths:
        for triple in path.triples(graph):
            seen[triple] = None
    return list(seen)


def tog_answer(
    question: str,
    graph: KnowledgeGraph,
    node_index: VectorIndex,
    cfg: ToGConfig,
    gateway: Gateway,
    max_in_flight: int = 1,
    edge_kinds: Iterable[EdgeKind] = EXTRACTION_EDGE_KINDS,
) -> RetrievalResult:
    """Answer a question by iterative path search over the graph.

    The question's entities are linked to the k most similar nodes, which
    seed single-node paths. Each round extends the paths by one hop and keeps
    the top_n best scored ones, up to d_max rounds. After every round that
    yields triples the model is asked whether they suffice; a "yes" stops the
    search. The answer is generated from the final triples, or from the
    initial node texts when no hop was made.

    Args:
        question: The query.
        graph: Graph.
        node_index: Index over entity and event nodes.
        cfg: Search settings.
        gateway: Model gateway.
        max_in_flight: Concurrent path-scoring calls.
        edge_kinds: Edge kinds the paths may follow.

    Returns:
        Result with the final paths, their triples, the passages mentioning
        path nodes and the answer; a diagnostic when nothing could be linked.
    """
    entities = ner(question, gateway)
    if not entities:
        return RetrievalResult(method="tog", question=question, diagnostic="no entities found in the question")

    initial = link_entities(entities, node_index, gateway, cfg.k, cfg.min_similarity)
    initial = sorted(initial, key=lambda item: -item[1])[:cfg.k]
    if not initial:
        return RetrievalResult(method="tog", question=question, diagnostic="no graph node matches the question entities")

    paths = [Path.start(node_id) for node_id, _ in initial]
    triples: list[tuple[str, str, str]] = []
    for depth in range(cfg.d_max + 1):
        if depth > 0:
            paths = tog_prune(question, tog_search(question, paths, graph, edge_kinds), cfg.top_n, gateway, graph, max_in_flight)
        triples = _path_triples(paths, graph)
        if triples and tog_reasoning(question, triples, gateway):
            logger.info("Paths judged sufficient at depth %d", depth)
            break

    knowledge = [" | ".join(triple) for triple in triples] or [graph.text(path.nodes[0]) for path in paths]
    answer = generate_answer(question, knowledge, gateway, cfg.max_tokens)

    counts: dict[str, float] = defaultdict(float)
    for node_id in dict.fromkeys(node_id for path in paths for node_id in path.nodes):
        for passage_id in graph.mentions(node_id):
            counts[passage_id] += 1.0
    return RetrievalResult.ranked(
        "tog",
        question,
        rank_passages(counts, len(counts)),
        paths=[path.render(graph) for path in paths],
        triples=triples,
        answer=answer,
    )


##################################################################################################################
#   PERSONALIZED PAGERANK
##################################################################################################################

def _split_edge_id(item_id: str) -> tuple[NodeId, str, NodeId]:
    """Split a "head|relation|tail" index id; the relation may contain "|"."""
    head, rest = item_id.split("|", 1)
    relation, tail = rest.rsplit("|", 1)
    return head, relation, tail


def query_to_edge_scores(
    question: str,
    graph: KnowledgeGraph,
    edge_index: VectorIndex,
    cfg: PPRConfig,
    gateway: Gateway,
    query_vector: np.ndarray | None = None,
) -> dict[NodeId, float]:
    """Turn the edges most similar to the question into node weights.

    The top_n_edges edges by similarity go through the model filter. Every
    kept edge adds its (non-negative) similarity to both endpoints; when all
    kept similarities are zero each edge adds 1. Weights are normalized to
    sum to 1.

    Returns:
        Node weights; empty when the filter keeps nothing.
    """
    if query_vector is None:
        query_vector = gateway.embed([question])[0]
    hits = edge_index.top_k(query_vector, cfg.top_n_edges)
    if not hits:
        return {}

    edges = [_split_edge_id(item_id) for item_id, _ in hits]
    facts = [(graph.text(head), relation, graph.text(tail)) for head, relation, tail in edges]
    raw = _chat(gateway, "prompts/edge_filter.j2", {"question": question, "facts": facts}, FILTER_MAX_TOKENS)
    kept = _selected_indices(raw, len(hits), "edge filter")
    if not kept:
        return {}

    weights = [max(hits[index][1], 0.0) for index in kept]
    if sum(weights) <= 0:
        weights = [1.0] * len(kept)

    node_scores: dict[NodeId, float] = defaultdict(float)
    for index, weight in zip(kept, weights, strict=True):
        head, _, tail = edges[index]
        node_scores[head] += weight
        node_scores[tail] += weight
    total = sum(node_scores.values())
    return {node_id: score / total for node_id, score in node_scores.items()}


def query_to_passage_scores(query_vector: np.ndarray, passage_index: VectorIndex, weight_adjust: float) -> dict[str, float]:
    """Return the similarity of every passage to the query, scaled by weight_adjust."""
    return {passage_id: weight_adjust * score for passage_id, score in passage_index.scores(query_vector).items()}


def _ner_node_scores(question: str, node_index: VectorIndex, cfg: PPRConfig, gateway: Gateway) -> dict[NodeId, float]:
    """Weight the nodes linked to the question entities, normalized to sum to 1."""
    linked = link_entities(ner(question, gateway), node_index, gateway, cfg.ner_top_k)
    weights = {node_id: max(score, 0.0) for node_id, score in linked}
    total = sum(weights.values())
    if total <= 0:
        return dict.fromkeys(weights, 1.0 / len(weights)) if weights else {}
    return {node_id: weight / total for node_id, weight in weights.items()}


def ppr_retrieve(
    question: str,
    graph: KnowledgeGraph,
    indexes: RetrievalIndexes,
    cfg: PPRConfig,
    gateway: Gateway,
    generate: bool = False,
    view: GraphView = "full",
) -> RetrievalResult:
    """Rank passages by personalized PageRank seeded from edges and passages.

    Node weights come from filtered edges ("edges" mode) or from question
    entities ("ner" mode). When there are none, passages are ranked by
    query similarity alone. Otherwise node weights and positive passage
    similarities form the personalization, and passages are ranked by the
    aggregated PageRank mass of their nodes.

    Args:
        question: The query.
        graph: Graph.
        indexes: Edge and passage indexes; the node index too in "ner" mode.
        cfg: Retriever settings.
        gateway: Model gateway.
        generate: Also generate an answer from the top passages.
        view: Node kinds the walk runs over; indexes must already be restricted to it.

    Returns:
        The top_k_passages passages.
    """
    if cfg.top_k_passages == 0:
        return RetrievalResult(method="ppr", question=question, diagnostic="top_k_passages is 0")
    if indexes.passages is None or (cfg.mode == "edges" and indexes.edges is None) or (cfg.mode == "ner" and indexes.nodes is None):
        error_message = f"Passage retrieval in '{cfg.mode}' mode is missing an index"
        raise ValueError(error_message)

    query_vector = gateway.embed([question])[0]
    if cfg.mode == "ner":
        node_scores = _ner_node_scores(question, indexes.nodes, cfg, gateway)
    else:
        node_scores = query_to_edge_scores(question, graph, indexes.edges, cfg, gateway, query_vector)
    passage_scores = query_to_passage_scores(query_vector, indexes.passages, cfg.weight_adjust)

    if not node_scores:
        logger.info("No node weights for %r, ranking passages by similarity", question)
        ranking = sorted(passage_scores.items(), key=lambda item: (-item[1], item[0]))[:cfg.top_k_passages]
    else:
        personalization = dict(node_scores)
        for passage_id, score in passage_scores.items():
            if score > 0:
                node_id = graph.passage_node(passage_id)
                personalization[node_id] = personalization.get(node_id, 0.0) + score
        node_ranks = personalized_pagerank(
            graph, personalization, cfg.damping, cfg.tolerance, cfg.max_iter, kinds=VIEW_NODE_KINDS[view]
        )
        ranking = rank_passages(aggregate_passage_scores(graph, node_ranks), cfg.top_k_passages)

    answer = generate_answer(question, _passage_knowledge(graph, ranking), gateway, cfg.max_tokens) if generate else None
    return RetrievalResult.ranked("ppr", question, ranking, answer=answer)


##################################################################################################################
#   LARGE-GRAPH RETRIEVAL
##################################################################################################################

def retrieve_seed_nodes(
    question: str,
    graph: KnowledgeGraph,
    node_index: VectorIndex,
    cfg: LargeKGConfig,
    gateway: Gateway,
    rng: np.random.Generator,
) -> list[NodeId]:
    """Find the source nodes of a question.

    Question entities are matched against the node index, the candidates are
    filtered by the model to drop common words, and at most
    number_of_source_nodes of the survivors are drawn uniformly.
    """
    entities = ner(question, gateway)
    candidates = [node_id for node_id, _ in link_entities(entities, node_index, gateway, cfg.top_k_per_entity)]
    if not candidates:
        return []

    texts = [graph.text(node_id) for node_id in candidates]
    raw = _chat(gateway, "prompts/keyword_filter.j2", {"question": question, "entities": entities, "candidates": texts}, FILTER_MAX_TOKENS)
    selected = [candidates[index] for index in _selected_indices(raw, len(candidates), "keyword filter")]
    if len(selected) > cfg.number_of_source_nodes:
        chosen = rng.choice(len(selected), size=cfg.number_of_source_nodes, replace=False)
        selected = [selected[int(index)] for index in sorted(chosen)]
    return selected


def large_kg_retrieve(
    question: str,
    graph: KnowledgeGraph,
    node_index: VectorIndex,
    cfg: LargeKGConfig,
    gateway: Gateway,
    rng: np.random.Generator,
    generate: bool = False,
    max_tokens: int = 256,
    view: GraphView = "full",
) -> RetrievalResult:
    """Rank passages by PageRank on a random-walk sample around the seeds.

    Args:
        question: The query.
        graph: Graph.
        node_index: Index over entity and event nodes.
        cfg: Retriever settings.
        gateway: Model gateway.
        rng: Per-query generator for seed choice and sampling.
        generate: Also generate an answer from the top passages.
        max_tokens: Answer budget.
        view: Node kinds the walk may visit.

    Returns:
        The top_n passages, or no passage and scores [0.0] without seeds.
    """
    seeds = retrieve_seed_nodes(question, graph, node_index, cfg, gateway, rng)
    if not seeds:
        return RetrievalResult(method="large", question=question, scores=[0.0], diagnostic="no source node for the question")

    personalization = dict.fromkeys(seeds, 1.0 / len(seeds))
    kinds = VIEW_NODE_KINDS[view]
    sample = rwr_sample(graph, seeds, cfg.sampling_area, cfg.restart, rng, kinds)
    logger.debug("Sampled %d nodes around %d seeds", len(sample), len(seeds))
    node_ranks = personalized_pagerank(
        graph, personalization, cfg.damping, cfg.tolerance, cfg.max_iter, node_ids=sample, kinds=kinds
    )
    ranking = rank_passages(aggregate_passage_scores(graph, node_ranks), cfg.top_n)

    answer = generate_answer(question, _passage_knowledge(graph, ranking), gateway, max_tokens) if generate else None
    return RetrievalResult.ranked("large", question, ranking, answer=answer)


##################################################################################################################
#   DISPATCH
##################################################################################################################

def retrieve(
    question: str,
    method: Method,
    graph: KnowledgeGraph,
    indexes: RetrievalIndexes,
    cfg: RetrieveConfig,
    gateway: Gateway,
    seed: int = 42,
    generate: bool = True,
    max_in_flight: int = 1,
) -> RetrievalResult:
    """Run one query with the chosen retriever.

    The graph view of cfg restricts the node and edge indexes, the nodes
    the PageRank walks visit and the edge kinds path search follows.

    Args:
        question: The query.
        method: "tog", "ppr" or "large".
        graph: Graph.
        indexes: Vector indexes.
        cfg: Retrieval settings.
        gateway: Model gateway.
        seed: Run seed; the large-graph retriever derives its generator from it and the question.
        generate: Generate an answer (path search always does).
        max_in_flight: Concurrent path-scoring calls.

    Raises:
        ValueError: If the method is unknown or a needed index is missing.
    """
    view = cfg.graph_view
    indexes = view_indexes(graph, indexes, view)
    match method:
        case "tog":
            if indexes.nodes is None:
                error_message = "Path search needs the node index"
                raise ValueError(error_message)
            return tog_answer(question, graph, indexes.nodes, cfg.tog, gateway, max_in_flight, VIEW_EDGE_KINDS[view])
        case "ppr":
            return ppr_retrieve(question, graph, indexes, cfg.ppr, gateway, generate, view)
        case "large":
            if indexes.nodes is None:
                error_message = "Large-graph retrieval needs the node index"
                raise ValueError(error_message)
            rng = stable_rng(seed, question)
            return large_kg_retrieve(
                question, graph, indexes.nodes, cfg.large, gateway, rng, generate, cfg.ppr.max_tokens, view
            )
    error_message = f"Unknown retrieval method '{method}', expected one of {list(METHODS)}"
    raise ValueError(error_message)
