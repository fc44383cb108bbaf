"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.

Binary graph file layout (little endian):

    magic    4 bytes   b"KGFG"
    version  u16
    then five sections, in order nodes, edges, phi, psi, passages:
        length   u64     payload size in bytes
        payload  bytes   orjson document
        crc      u32     CRC32 of the payload

The file ends right after the last section.
"""
import struct
import zlib
from pathlib import Path
from typing import Any

import orjson
from pydantic import ValidationError

from lib.core import GRAPH_FORMAT_VERSION
from lib.core.core_graph import Edge, KnowledgeGraph, Node
from lib.core.core_schemas_errors import GraphFormatError, KGForgeError
from lib.core.core_utils import atomic_write_bytes


GRAPH_MAGIC = b"KGFG"
SECTIONS = ("nodes", "edges", "phi", "psi", "passages")

_HEADER = struct.Struct("<4sH")
_LENGTH = struct.Struct("<Q")
_CRC = struct.Struct("<I")


def save_graph(graph: KnowledgeGraph, path: Path) -> None:
    """Write a graph to a versioned binary file.

    The file is written next to its destination and moved into place, so an
    interrupted save never leaves a truncated file behind.

    Args:
        graph: Graph to persist.
        path: Destination file.

    Returns:
        None.
    """
    payloads: dict[str, Any] = {
        "nodes": [[node.id, node.kind.value, node.text, node.source_refs] for node in graph.nodes()],
        "edges": [[e.head, e.relation, e.tail, e.kind.value, e.provenance] for e in graph.edges()],
        "phi": [[key, value] for key, value in graph.phi.items()],
        "psi": [[key, value] for key, value in graph.psi.items()],
        "passages": [[key, value] for key, value in graph.passages.items()],
    }

    blob = bytearray(_HEADER.pack(GRAPH_MAGIC, GRAPH_FORMAT_VERSION))
    for name in SECTIONS:
        payload = orjson.dumps(payloads[name])
        blob += _LENGTH.pack(len(payload))
        blob += payload
        blob += _CRC.pack(zlib.crc32(payload))

    atomic_write_bytes(path, bytes(blob))


def load_graph(path: Path) -> KnowledgeGraph:
    """Read a graph written by save_graph.

    Args:
        path: Graph file.

    Returns:
        The restored graph.

    Raises:
        GraphFormatError: On a wrong magic or version, a truncated or corrupt
            section, trailing bytes, or inconsistent content. No partial graph
            is ever returned.
    """
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        error_message = f"{path}: file too short for a graph header"
        raise GraphFormatError(error_message)

    magic, version = _HEADER.unpack_from(data, 0)
    if magic != GRAPH_MAGIC:
        error_message = f"{path}: not a graph file"
        raise GraphFormatError(error_message)
    if version != GRAPH_FORMAT_VERSION:
        error_message = f"{path}: graph format version {version}, expected {GRAPH_FORMAT_VERSION}"
        raise GraphFormatError(error_message)

    offset = _HEADER.size
    sections: dict[str, Any] = {}
    for name in SECTIONS:
        sections[name], offset = _read_section(data, offset, name, path)

    if offset != len(data):
        error_message = f"{path}: {len(data) - offset} unexpected trailing bytes"
        raise GraphFormatError(error_message)

    try:
        return _build_graph(sections)
    except (KGForgeError, ValidationError, ValueError, TypeError) as e:
        error_message = f"{path}: inconsistent graph content: {e}"
        raise GraphFormatError(error_message) from e


def _read_section(data: bytes, offset: int, name: str, path: Path) -> tuple[Any, int]:
    """Read one length-prefixed section and check its CRC32.

    Returns:
        The decoded payload and the offset after the section.

    Raises:
        GraphFormatError: On truncation, a checksum mismatch or a payload that is not JSON.
    """
    if offset + _LENGTH.size > len(data):
        error_message = f"{path}: truncated before section '{name}'"
        raise GraphFormatError(error_message)
    (length,) = _LENGTH.unpack_from(data, offset)
    offset += _LENGTH.size

    end = offset + length
    if end + _CRC.size > len(data):
        error_message = f"{path}: section '{name}' is truncated"
        raise GraphFormatError(error_message)

    payload = data[offset:end]
    (crc,) = _CRC.unpack_from(data, end)
    if zlib.crc32(payload) != crc:
        error_message = f"{path}: checksum mismatch in section '{name}'"
        raise GraphFormatError(error_message)

    try:
        return orjson.loads(payload), end + _CRC.size
    except orjson.JSONDecodeError as e:
        error_message = f"{path}: section '{name}' is not valid JSON"
        raise GraphFormatError(error_message) from e


def _build_graph(sections: dict[str, Any]) -> KnowledgeGraph:
    """Restore a graph from decoded sections."""
    graph = KnowledgeGraph()

    for passage_id, text in sections["passages"]:
        graph.passages[passage_id] = text

    for node_id, kind, text, source_refs in sections["nodes"]:
        graph.insert_node(Node(id=node_id, kind=kind, text=text, source_refs=source_refs))

    for head, relation, tail, kind, provenance in sections["edges"]:
        graph.insert_edge(Edge(head=head, relation=relation, tail=tail, kind=kind, provenance=provenance))

    graph.phi.update({key: list(value) for key, value in sections["phi"]})
    graph.psi.update({key: list(value) for key, value in sections["psi"]})
    return graph
