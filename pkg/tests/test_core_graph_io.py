"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
import struct
from pathlib import Path

import pytest

from lib.core.core_graph import EdgeKind, KnowledgeGraph, NodeKind
from lib.core.core_graph_io import GRAPH_MAGIC, load_graph, save_graph
from lib.core.core_schemas_errors import GraphFormatError


@pytest.fixture
def schema_graph(line_graph: KnowledgeGraph) -> KnowledgeGraph:
    for node_id in line_graph.node_ids([NodeKind.ENTITY]):
        line_graph.attach_concept(node_id, "letter")
        line_graph.attach_concept(node_id, "symbol")
    line_graph.attach_concept("r1", "link")
    return line_graph


def test_round_trip_keeps_the_graph(line_graph: KnowledgeGraph, tmp_path: Path) -> None:
    path = tmp_path / "graph.kgfg"
    save_graph(line_graph, path)

    loaded = load_graph(path)

    assert loaded == line_graph
    assert loaded.passages == {"p1": "A r1 B.", "p2": "B r2 C."}
    assert loaded.relations() == ["r1", "r2"]


def test_round_trip_keeps_concept_maps_exactly(schema_graph: KnowledgeGraph, tmp_path: Path) -> None:
    path = tmp_path / "graph.kgfg"
    save_graph(schema_graph, path)

    loaded = load_graph(path)

    assert loaded.phi == schema_graph.phi
    assert loaded.psi == schema_graph.psi
    assert loaded.check_definition(require_schema=False) == []


def test_loaded_graph_accepts_new_triples(line_graph: KnowledgeGraph, tmp_path: Path) -> None:
    path = tmp_path / "graph.kgfg"
    save_graph(line_graph, path)
    loaded = load_graph(path)

    loaded.add_triple("C", "r3", "D", EdgeKind.ENTITY_ENTITY, "p3")

    assert loaded.relations() == ["r1", "r2", "r3"]


def test_save_is_deterministic(line_graph: KnowledgeGraph, tmp_path: Path) -> None:
    save_graph(line_graph, tmp_path / "one.kgfg")
    save_graph(load_graph(tmp_path / "one.kgfg"), tmp_path / "two.kgfg")

    assert (tmp_path / "one.kgfg").read_bytes() == (tmp_path / "two.kgfg").read_bytes()


def test_truncated_file_is_rejected(line_graph: KnowledgeGraph, tmp_path: Path) -> None:
    path = tmp_path / "graph.kgfg"
    save_graph(line_graph, path)
    path.write_bytes(path.read_bytes()[:-10])

    with pytest.raises(GraphFormatError, match="truncated"):
        load_graph(path)


def test_corrupt_payload_fails_the_checksum(line_graph: KnowledgeGraph, tmp_path: Path) -> None:
    path = tmp_path / "graph.kgfg"
    save_graph(line_graph, path)
    data = bytearray(path.read_bytes())
    data[20] ^= 0xFF
    path.write_bytes(bytes(data))

    with pytest.raises(GraphFormatError, match="checksum"):
        load_graph(path)


def test_trailing_bytes_are_rejected(line_graph: KnowledgeGraph, tmp_path: Path) -> None:
    path = tmp_path / "graph.kgfg"
    save_graph(line_graph, path)
    path.write_bytes(path.read_bytes() + b"\x00")

    with pytest.raises(GraphFormatError, match="trailing"):
        load_graph(path)


def test_other_versions_are_rejected(tmp_path: Path) -> None:
    path = tmp_path / "graph.kgfg"
    path.write_bytes(struct.pack("<4sH", GRAPH_MAGIC, 99))

    with pytest.raises(GraphFormatError, match="version 99"):
        load_graph(path)


def test_foreign_files_are_rejected(tmp_path: Path) -> None:
    path = tmp_path / "graph.kgfg"
    path.write_bytes(b"PK\x03\x04 not a graph")

    with pytest.raises(GraphFormatError, match="not a graph file"):
        load_graph(path)


def test_save_creates_missing_folders_without_leftovers(line_graph: KnowledgeGraph, tmp_path: Path) -> None:
    path = tmp_path / "run" / "graph" / "graph.kgfg"

    save_graph(line_graph, path)

    assert load_graph(path) == line_graph
    assert [item.name for item in path.parent.iterdir()] == ["graph.kgfg"]
