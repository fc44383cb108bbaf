"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
from pathlib import Path

import numpy as np
import pytest

from lib.core.core_config import PipelineConfig
from lib.core.core_extraction import load_batches, read_corpus, run_extraction, triples_to_graph
from lib.core.core_gateway import MockGateway
from lib.core.core_graph import EdgeKind, KnowledgeGraph
from lib.core.core_schemas import Document


FIXTURES = Path(__file__).resolve().parent.parent / "data" / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def mock_gateway() -> MockGateway:
    """Gateway with the bundled rule table."""
    return MockGateway.from_yaml()


@pytest.fixture
def corpus() -> list[Document]:
    return [doc for doc in read_corpus(FIXTURES / "corpus.jsonl") if isinstance(doc, Document)]


@pytest.fixture
def fixture_graph(corpus: list[Document], mock_gateway: MockGateway, tmp_path: Path) -> KnowledgeGraph:
    """Graph built from the fixture corpus through the mock extraction pipeline."""
    run_extraction(corpus, PipelineConfig(batch_size=8), mock_gateway, tmp_path / "batches", max_in_flight=1)
    graph, _ = triples_to_graph(load_batches(tmp_path / "batches"))
    return graph


@pytest.fixture
def line_graph() -> KnowledgeGraph:
    """A -> B -> C, each edge from its own passage."""
    graph = KnowledgeGraph()
    graph.add_passage("p1", "A r1 B.")
    graph.add_passage("p2", "B r2 C.")
    graph.add_triple("A", "r1", "B", EdgeKind.ENTITY_ENTITY, "p1")
    graph.add_triple("B", "r2", "C", EdgeKind.ENTITY_ENTITY, "p2")
    return graph


@pytest.fixture
def layered_graph() -> KnowledgeGraph:
    """One passage holding an entity relation, an event relation and a concept."""
    graph = KnowledgeGraph()
    graph.add_passage("p1", "Alice founded AcmeCorp after the merger.")
    alice, _ = graph.add_triple("Alice", "founded", "AcmeCorp", EdgeKind.ENTITY_ENTITY, "p1")
    graph.add_triple("the merger", "involved", "AcmeCorp", EdgeKind.EVENT_ENTITY, "p1")
    graph.attach_concept(alice, "person")
    return graph


def unit(values: list[float]) -> np.ndarray:
    vector = np.asarray(values, dtype=np.float64)
    return vector / np.linalg.norm(vector)
