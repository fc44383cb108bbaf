"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
import hashlib
import logging
import re
from collections import Counter
from collections.abc import Iterable, Iterator
from enum import StrEnum
from typing import Literal

import networkx as nx
import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy import sparse

from lib.core import HAS_CONCEPT, INDUCED, MENTIONED_IN
from lib.core.core_schemas_errors import (
    FrozenGraphError,
    NotFoundError,
    RejectedTripleError,
)


logger = logging.getLogger(__name__)

NodeId = str

WHITESPACE = re.compile(r"\s+")


class NodeKind(StrEnum):
    """Partition of the node set."""
    ENTITY = "Entity"
    EVENT = "Event"
    CONCEPT = "Concept"
    PASSAGE = "Passage"


class EdgeKind(StrEnum):
    """Kinds of edges."""
    ENTITY_ENTITY = "EntityEntity"
    EVENT_ENTITY = "EventEntity"
    EVENT_EVENT = "EventEvent"
    CONCEPTUALIZATION = "Conceptualization"
    MENTION = "Mention"


EXTRACTION_EDGE_KINDS = frozenset({EdgeKind.ENTITY_ENTITY, EdgeKind.EVENT_ENTITY, EdgeKind.EVENT_EVENT})
SCHEMA_NODE_KINDS = frozenset({NodeKind.ENTITY, NodeKind.EVENT})

GraphView = Literal["entity", "entity_event", "full"]
GRAPH_VIEWS: tuple[GraphView, ...] = ("entity", "entity_event", "full")

# Node kinds and traversable edge kinds visible to retrieval under each view.
VIEW_NODE_KINDS: dict[GraphView, frozenset[NodeKind]] = {
    "entity": frozenset({NodeKind.ENTITY, NodeKind.PASSAGE}),
    "entity_event": frozenset({NodeKind.ENTITY, NodeKind.EVENT, NodeKind.PASSAGE}),
    "full": frozenset(NodeKind),
}
VIEW_EDGE_KINDS: dict[GraphView, frozenset[EdgeKind]] = {
    "entity": frozenset({EdgeKind.ENTITY_ENTITY}),
    "entity_event": EXTRACTION_EDGE_KINDS,
    "full": EXTRACTION_EDGE_KINDS | {EdgeKind.CONCEPTUALIZATION},
}


class Node(BaseModel):
    """A graph node.

    Attributes:
        id: Stable identifier derived from normalized text and kind.
        kind: Node kind.
        text: Surface text (first seen), whitespace-collapsed.
        source_refs: Passage ids the node was extracted from.
    """
    id: NodeId
    kind: NodeKind
    text: str
    source_refs: list[str] = Field(default_factory=list)

    model_config = {"frozen": True}


class Edge(BaseModel):
    """A directed, typed edge with provenance."""
    head: NodeId
    relation: str
    tail: NodeId
    kind: EdgeKind
    provenance: str

    model_config = {"frozen": True}


def collapse_whitespace(text: str) -> str:
    """Collapse runs of whitespace into single spaces and strip the ends."""
    return WHITESPACE.sub(" ", text).strip()


def dedup_key(text: str) -> str:
    """Return the case-folded, whitespace-collapsed form used for node dedup."""
    return collapse_whitespace(text).casefold()


def make_node_id(text: str, kind: NodeKind) -> NodeId:
    """Derive the node id of a (text, kind) pair.

    Passage ids are used verbatim; every other kind is case-folded first.

    Args:
        text: Node text.
        kind: Node kind.

    Returns:
        An id of the form "<kind>:<hex digest>".
    """
    key = collapse_whitespace(text) if kind is NodeKind.PASSAGE else dedup_key(text)
    digest = hashlib.blake2b(f"{kind.value}\x1f{key}".encode(), digest_size=8).hexdigest()
    return f"{kind.value.lower()}:{digest}"


def _edge_key(relation: str, provenance: str) -> str:
    """Return the multigraph key of an edge."""
    return f"{relation}\x1f{provenance}"


# Endpoint kinds allowed per edge kind
EDGE_ENDPOINTS: dict[EdgeKind, set[tuple[NodeKind, NodeKind]]] = {
    EdgeKind.ENTITY_ENTITY: {(NodeKind.ENTITY, NodeKind.ENTITY)},
    EdgeKind.EVENT_ENTITY: {(NodeKind.EVENT, NodeKind.ENTITY), (NodeKind.ENTITY, NodeKind.EVENT)},
    EdgeKind.EVENT_EVENT: {(NodeKind.EVENT, NodeKind.EVENT)},
    EdgeKind.CONCEPTUALIZATION: {(NodeKind.ENTITY, NodeKind.CONCEPT), (NodeKind.EVENT, NodeKind.CONCEPT)},
    EdgeKind.MENTION: {(NodeKind.ENTITY, NodeKind.PASSAGE), (NodeKind.EVENT, NodeKind.PASSAGE)},
}


class KnowledgeGraph:
    """Typed node/edge store with concept mappings and passage linkage.

    Nodes and edges live in a networkx MultiDiGraph, which keeps forward and
    backward adjacency in sync. The concept mappings `phi` (node to concepts)
    and `psi` (relation to concepts) are plain ordered maps.
    """

    def __init__(self) -> None:
        """Create an empty graph."""
        self._graph = nx.MultiDiGraph()
        self.phi: dict[NodeId, list[NodeId]] = {}
        self.psi: dict[str, list[NodeId]] = {}
        self.passages: dict[str, str] = {}
        self._relations: Counter[str] = Counter()
        self._frozen = False

    ##################################################################################################################
    #   MUTATION
    ##################################################################################################################

    def add_passage(self, passage_id: str, text: str) -> NodeId:
        """Register a passage and its node.

        Args:
            passage_id: Passage (chunk) id; also the passage node text.
            text: Passage text.

        Returns:
            The passage node id.
        """
        self._ensure_mutable()
        passage_id = collapse_whitespace(passage_id)
        if not passage_id:
            raise RejectedTripleError("provenance", passage_id)
        if text or passage_id not in self.passages:
            self.passages[passage_id] = text
        return self._upsert_node(passage_id, NodeKind.PASSAGE, None)

    def add_triple(
        self,
        head_text: str,
        relation: str,
        tail_text: str,
        kind: EdgeKind,
        provenance: str,
        head_kind: NodeKind | None = None,
    ) -> tuple[NodeId, NodeId]:
        """Insert an extracted triple.

        Nodes are created or deduplicated by normalized text and kind. The edge
        is inserted once per (head, relation, tail, provenance). Both endpoints
        receive a Mention edge to the provenance passage.

        Args:
            head_text: Head node text.
            relation: Relation string, kept verbatim apart from whitespace collapse.
            tail_text: Tail node text.
            kind: One of the three extraction edge kinds.
            provenance: Passage id.
            head_kind: Head orientation of an EventEntity edge; defaults to Event.

        Returns:
            The head and tail node ids.

        Raises:
            - RejectedTripleError: If a field is empty after normalization.
            - ValueError: If the kind is not an extraction kind or head_kind does not fit it.
        """
        self._ensure_mutable()
        kind = EdgeKind(kind)
        if kind not in EXTRACTION_EDGE_KINDS:
            error_message = f"add_triple accepts extraction edges only, got {kind}"
            raise ValueError(error_message)

        for field, value in (("head", head_text), ("relation", relation), ("tail", tail_text), ("provenance", provenance)):
            if not collapse_whitespace(value or ""):
                raise RejectedTripleError(field, value)

        head_kind, tail_kind = self._endpoint_kinds(kind, head_kind)
        relation = collapse_whitespace(relation)
        provenance = collapse_whitespace(provenance)

        passage_node = self.add_passage(provenance, "")
        head = self._upsert_node(head_text, head_kind, provenance)
        tail = self._upsert_node(tail_text, tail_kind, provenance)

        if self._insert_edge(head, relation, tail, kind, provenance):
            self._relations[relation] += 1

        self._insert_edge(head, MENTIONED_IN, passage_node, EdgeKind.MENTION, provenance)
        self._insert_edge(tail, MENTIONED_IN, passage_node, EdgeKind.MENTION, provenance)
        return head, tail

    def attach_concept(self, element: str, phrase: str) -> NodeId:
        """Attach a concept phrase to a node id or a relation string.

        Args:
            element: An Entity/Event node id, or a relation used by an extraction edge.
            phrase: Concept phrase.

        Returns:
            The concept node id.

        Raises:
            - NotFoundError: If the element is unknown.
            - RejectedTripleError: If the phrase is empty after normalization.
        """
        self._ensure_mutable()
        if not collapse_whitespace(phrase):
            raise RejectedTripleError("phrase", phrase)

        if element in self._graph:
            node_kind = self._graph.nodes[element]["kind"]
            if node_kind not in SCHEMA_NODE_KINDS:
                error_message = f"Concepts attach to entities and events, not to {node_kind} node '{element}'"
                raise NotFoundError(error_message)
            concept = self._upsert_node(phrase, NodeKind.CONCEPT, None)
            self._append_unique(self.phi.setdefault(element, []), concept)
            self._insert_edge(element, HAS_CONCEPT, concept, EdgeKind.CONCEPTUALIZATION, INDUCED)
            return concept

        relation = collapse_whitespace(element)
        if self._relations.get(relation, 0) > 0:
            concept = self._upsert_node(phrase, NodeKind.CONCEPT, None)
            self._append_unique(self.psi.setdefault(relation, []), concept)
            return concept

        error_message = f"Unknown node or relation: '{element}'"
        raise NotFoundError(error_message)

    def insert_node(self, node: Node) -> None:
        """Insert a fully specified node; used when restoring a saved graph."""
        self._ensure_mutable()
        self._graph.add_node(node.id, kind=node.kind, text=node.text, source_refs=list(node.source_refs))

    def insert_edge(self, edge: Edge) -> None:
        """Insert a fully specified edge between existing nodes; used when restoring a saved graph.

        Raises:
            NotFoundError: If an endpoint does not exist.
        """
        self._ensure_mutable()
        for endpoint in (edge.head, edge.tail):
            if endpoint not in self._graph:
                error_message = f"Edge endpoint '{endpoint}' is not a node"
                raise NotFoundError(error_message)
        if self._insert_edge(edge.head, edge.relation, edge.tail, edge.kind, edge.provenance) and (
            edge.kind in EXTRACTION_EDGE_KINDS
        ):
            self._relations[edge.relation] += 1

    def freeze(self) -> "KnowledgeGraph":
        """Make the graph read-only and return it."""
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        """Whether the graph rejects mutations."""
        return self._frozen

    ##################################################################################################################
    #   READ ACCESS
    ##################################################################################################################

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._graph

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self.structure() == other.structure()

    __hash__ = None  # type: ignore[assignment]

    @property
    def node_count(self) -> int:
        """Number of nodes of every kind."""
        return self._graph.number_of_nodes()

    @property
    def edge_count(self) -> int:
        """Number of edges of every kind."""
        return self._graph.number_of_edges()

    def node(self, node_id: NodeId) -> Node:
        """Return a node by id.

        Raises:
            NotFoundError: If the id is unknown.
        """
        if node_id not in self._graph:
            error_message = f"Unknown node: '{node_id}'"
            raise NotFoundError(error_message)
        data = self._graph.nodes[node_id]
        return Node(id=node_id, kind=data["kind"], text=data["text"], source_refs=list(data["source_refs"]))

    def text(self, node_id: NodeId) -> str:
        """Return the text of a node."""
        return str(self._graph.nodes[node_id]["text"])

    def kind(self, node_id: NodeId) -> NodeKind:
        """Return the kind of a node."""
        return NodeKind(self._graph.nodes[node_id]["kind"])

    def find_node(self, text: str, kind: NodeKind) -> NodeId | None:
        """Return the id of the node with this text and kind, if present."""
        node_id = make_node_id(text, kind)
        return node_id if node_id in self._graph else None

    def nodes(self) -> Iterator[Node]:
        """Iterate over all nodes in insertion order."""
        for node_id in self._graph.nodes:
            yield self.node(node_id)

    def node_ids(self, kinds: Iterable[NodeKind] | None = None) -> list[NodeId]:
        """Return node ids, optionally restricted to some kinds, in insertion order."""
        if kinds is None:
            return list(self._graph.nodes)
        wanted = set(kinds)
        return [node_id for node_id, kind in self._graph.nodes(data="kind") if kind in wanted]

    def nodes_of_kind(self, kind: NodeKind) -> list[Node]:
        """Return the nodes of one kind."""
        return [self.node(node_id) for node_id in self.node_ids([kind])]

    def edges(self) -> Iterator[Edge]:
        """Iterate over all edges."""
        for head, tail, data in self._graph.edges(data=True):
            yield Edge(head=head, relation=data["relation"], tail=tail, kind=data["kind"], provenance=data["provenance"])

    def edges_of_kind(self, *kinds: EdgeKind) -> list[Edge]:
        """Return the edges of the given kinds."""
        wanted = set(kinds)
        return [edge for edge in self.edges() if edge.kind in wanted]

    def successors(self, node_id: NodeId, kinds: Iterable[EdgeKind] = EXTRACTION_EDGE_KINDS) -> list[tuple[str, NodeId]]:
        """Return distinct (relation, successor) pairs over edges of the given kinds, sorted."""
        wanted = set(kinds)
        pairs = {
            (data["relation"], tail)
            for _, tail, data in self._graph.out_edges(node_id, data=True)
            if data["kind"] in wanted
        }
        return sorted(pairs)

    def predecessors(self, node_id: NodeId, kinds: Iterable[EdgeKind] = EXTRACTION_EDGE_KINDS) -> list[tuple[str, NodeId]]:
        """Return distinct (relation, predecessor) pairs over edges of the given kinds, sorted."""
        wanted = set(kinds)
        pairs = {
            (data["relation"], head)
            for head, _, data in self._graph.in_edges(node_id, data=True)
            if data["kind"] in wanted
        }
        return sorted(pairs)

    def neighbors(self, node_id: NodeId, kinds: Iterable[NodeKind] | None = None) -> list[NodeId]:
        """Return the sorted undirected neighbors of a node over every edge kind, self excluded.

        Args:
            node_id: Node.
            kinds: Keep only neighbors of these node kinds.
        """
        linked = set(self._graph.successors(node_id)) | set(self._graph.predecessors(node_id))
        linked.discard(node_id)
        if kinds is not None:
            wanted = set(kinds)
            linked = {neighbor for neighbor in linked if self._graph.nodes[neighbor]["kind"] in wanted}
        return sorted(linked)

    def mentions(self, node_id: NodeId) -> list[str]:
        """Return the passage ids a node is mentioned in."""
        return sorted(
            self.text(tail)
            for _, tail, kind in self._graph.out_edges(node_id, data="kind")
            if kind == EdgeKind.MENTION
        )

    def passage_node(self, passage_id: str) -> NodeId:
        """Return the node id of a passage."""
        return make_node_id(passage_id, NodeKind.PASSAGE)

    def passage_text(self, passage_id: str) -> str:
        """Return the stored text of a passage.

        Raises:
            NotFoundError: If the passage is unknown.
        """
        if passage_id not in self.passages:
            error_message = f"Unknown passage: '{passage_id}'"
            raise NotFoundError(error_message)
        return self.passages[passage_id]

    def relations(self) -> list[str]:
        """Return the distinct relation strings of extraction edges, sorted."""
        return sorted(relation for relation, count in self._relations.items() if count > 0)

    def triples(self, *kinds: EdgeKind, provenance: str | None = None) -> list[tuple[str, str, str]]:
        """Return (head text, relation, tail text) for edges of the given kinds.

        Args:
            *kinds: Edge kinds; defaults to the extraction kinds.
            provenance: Restrict to edges extracted from this passage.

        Returns:
            Distinct triples in edge order.
        """
        wanted = set(kinds) or EXTRACTION_EDGE_KINDS
        seen: dict[tuple[str, str, str], None] = {}
        for edge in self.edges():
            if edge.kind in wanted and (provenance is None or edge.provenance == provenance):
                seen[(self.text(edge.head), edge.relation, self.text(edge.tail))] = None
        return list(seen)

    def to_undirected_adjacency(
        self,
        node_ids: list[NodeId] | None = None,
        kinds: Iterable[NodeKind] | None = None,
    ) -> tuple[list[NodeId], sparse.csr_matrix]:
        """Build the symmetric unit-weight adjacency matrix used by PageRank.

        Every pair of distinct adjacent nodes gets weight 1 regardless of edge
        multiplicity or direction; self-loops are ignored.

        Args:
            node_ids: Restrict to the induced subgraph over these nodes (order kept).
            kinds: Further restrict to nodes of these kinds.

        Returns:
            The node order and the CSR adjacency matrix.
        """
        order = list(self._graph.nodes) if node_ids is None else list(node_ids)
        if kinds is not None:
            wanted = set(kinds)
            order = [node_id for node_id in order if self._graph.nodes[node_id]["kind"] in wanted]
        position = {node_id: index for index, node_id in enumerate(order)}

        pairs: set[tuple[int, int]] = set()
        for head, tail in self._graph.edges():
            if head == tail or head not in position or tail not in position:
                continue
            i, j = position[head], position[tail]
            pairs.add((min(i, j), max(i, j)))

        size = len(order)
        if not pairs:
            return order, sparse.csr_matrix((size, size), dtype=np.float64)

        rows, cols = np.array(sorted(pairs), dtype=np.int64).T
        data = np.ones(2 * len(rows), dtype=np.float64)
        matrix = sparse.coo_matrix(
            (data, (np.concatenate([rows, cols]), np.concatenate([cols, rows]))), shape=(size, size)
        )
        return order, matrix.tocsr()

    def structure(self) -> dict[str, object]:
        """Return a comparable description of nodes, edges, concept maps and passages."""
        return {
            "nodes": {node.id: (node.kind, node.text, tuple(node.source_refs)) for node in self.nodes()},
            "edges": sorted((e.head, e.relation, e.tail, e.kind, e.provenance) for e in self.edges()),
            "phi": {key: list(value) for key, value in self.phi.items()},
            "psi": {key: list(value) for key, value in self.psi.items()},
            "passages": dict(self.passages),
        }

    ##################################################################################################################
    #   CHECKS AND STATISTICS
    ##################################################################################################################

    def check_definition(self, require_schema: bool = True) -> list[str]:
        """Check the structural constraints of the graph.

        Args:
            require_schema: Also require every entity/event node and every
                extraction relation to carry at least one concept.

        Returns:
            Human-readable violations; empty when the graph conforms.
        """
        violations: list[str] = []

        for node_id, data in self._graph.nodes(data=True):
            kind = NodeKind(data["kind"])
            if node_id != make_node_id(data["text"], kind):
                violations.append(f"node {node_id}: id does not match its text and kind {kind}")
            if not collapse_whitespace(data["text"]):
                violations.append(f"node {node_id}: empty text")

        for head, tail, data in self._graph.edges(data=True):
            pair = (self.kind(head), self.kind(tail))
            if pair not in EDGE_ENDPOINTS[EdgeKind(data["kind"])]:
                violations.append(f"edge {head} -[{data['relation']}]-> {tail}: kind {data['kind']} contradicts endpoints {pair}")

        counted = Counter(
            data["relation"] for _, _, data in self._graph.edges(data=True) if data["kind"] in EXTRACTION_EDGE_KINDS
        )
        for relation in sorted(set(counted) | {relation for relation, count in self._relations.items() if count > 0}):
            if counted[relation] != self._relations[relation]:
                violations.append(
                    f"relation {relation!r}: index counts {self._relations[relation]} edges, the graph holds {counted[relation]}"
                )

        passage_nodes = {self.text(node_id) for node_id in self.node_ids([NodeKind.PASSAGE])}
        violations.extend(f"passage node '{passage_id}' has no stored text entry" for passage_id in sorted(passage_nodes - self.passages.keys()))
        violations.extend(f"passage '{passage_id}' has no passage node" for passage_id in sorted(self.passages.keys() - passage_nodes))
        for mapping_name, mapping in (("phi", self.phi), ("psi", self.psi)):
            for element, concepts in mapping.items():
                for concept in concepts:
                    if concept not in self._graph or self.kind(concept) is not NodeKind.CONCEPT:
                        violations.append(f"{mapping_name}({element}) contains non-concept '{concept}'")

        for node_id, concepts in self.phi.items():
            linked = {tail for _, tail, kind in self._graph.out_edges(node_id, data="kind") if kind == EdgeKind.CONCEPTUALIZATION}
            if linked != set(concepts):
                violations.append(f"phi({node_id}) disagrees with its conceptualization edges")

        if require_schema:
            violations.extend(
                f"phi({node_id}) is empty"
                for node_id in self.node_ids(SCHEMA_NODE_KINDS)
                if not self.phi.get(node_id)
            )
            violations.extend(f"psi({relation!r}) is empty" for relation in self.relations() if not self.psi.get(relation))

        return violations

    def is_valid(self, require_schema: bool = True) -> bool:
        """Return True when check_definition finds no violation."""
        return not self.check_definition(require_schema)

    def stats(self) -> dict[str, int]:
        """Count nodes and edges by kind, in the row order of the statistics report."""
        node_kinds = Counter(kind for _, kind in self._graph.nodes(data="kind"))
        edge_kinds = Counter(kind for _, _, kind in self._graph.edges(data="kind"))
        extraction_edges = sum(edge_kinds[kind] for kind in EXTRACTION_EDGE_KINDS)
        return {
            "Text chunks": len(self.passages),
            "Entities": node_kinds[NodeKind.ENTITY],
            "Events": node_kinds[NodeKind.EVENT],
            "Concepts": node_kinds[NodeKind.CONCEPT],
            "Nodes": node_kinds[NodeKind.ENTITY] + node_kinds[NodeKind.EVENT] + node_kinds[NodeKind.CONCEPT],
            "Entity-entity edges": edge_kinds[EdgeKind.ENTITY_ENTITY],
            "Event-entity edges": edge_kinds[EdgeKind.EVENT_ENTITY],
            "Event-event edges": edge_kinds[EdgeKind.EVENT_EVENT],
            "Conceptualization edges": edge_kinds[EdgeKind.CONCEPTUALIZATION],
            "Edges": extraction_edges + edge_kinds[EdgeKind.CONCEPTUALIZATION],
            "Passage nodes": node_kinds[NodeKind.PASSAGE],
            "Mention edges": edge_kinds[EdgeKind.MENTION],
        }

    def stats_report(self) -> str:
        """Render stats() as an aligned two-column text table."""
        series = pd.Series(self.stats(), name="count")
        return series.to_string()

    ##################################################################################################################
    #   PRIVATE METHODS
    ##################################################################################################################

    def _ensure_mutable(self) -> None:
        """Refuse changes to a frozen graph."""
        if self._frozen:
            error_message = "The graph is frozen and cannot be modified"
            raise FrozenGraphError(error_message)

    @staticmethod
    def _endpoint_kinds(kind: EdgeKind, head_kind: NodeKind | None) -> tuple[NodeKind, NodeKind]:
        """Return the (head, tail) node kinds of an extraction edge kind.

        Raises:
            ValueError: If head_kind does not fit the edge kind.
        """
        if kind is EdgeKind.ENTITY_ENTITY:
            default = (NodeKind.ENTITY, NodeKind.ENTITY)
        elif kind is EdgeKind.EVENT_EVENT:
            default = (NodeKind.EVENT, NodeKind.EVENT)
        elif head_kind in (None, NodeKind.EVENT):
            return NodeKind.EVENT, NodeKind.ENTITY
        elif head_kind is NodeKind.ENTITY:
            return NodeKind.ENTITY, NodeKind.EVENT
        else:
            error_message = f"head_kind {head_kind} does not fit {kind}"
            raise ValueError(error_message)

        if head_kind not in (None, default[0]):
            error_message = f"head_kind {head_kind} does not fit {kind}"
            raise ValueError(error_message)
        return default

    def _upsert_node(self, text: str, kind: NodeKind, source_ref: str | None) -> NodeId:
        """Add a node unless present and record the passage it came from."""
        node_id = make_node_id(text, kind)
        if node_id not in self._graph:
            self._graph.add_node(node_id, kind=kind, text=collapse_whitespace(text), source_refs=[])
        if source_ref is not None:
            self._append_unique(self._graph.nodes[node_id]["source_refs"], source_ref)
        return node_id

    def _insert_edge(self, head: NodeId, relation: str, tail: NodeId, kind: EdgeKind, provenance: str) -> bool:
        """Add an edge unless present; return whether it was new."""
        key = _edge_key(relation, provenance)
        if self._graph.has_edge(head, tail, key=key):
            return False
        self._graph.add_edge(head, tail, key=key, relation=relation, kind=EdgeKind(kind), provenance=provenance)
        return True

    @staticmethod
    def _append_unique(values: list[str], value: str) -> None:
        if value not in values:
            values.append(value)
