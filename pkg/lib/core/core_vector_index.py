"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.

Exact dot-product index over unit vectors.

Index file layout (little endian):

    magic    4 bytes   b"KGFV"
    version  u16
    dim      u32
    count    u64
    ids      count x (u32 byte length + utf-8 bytes)
    vectors  count x dim float64, row-major
"""
import logging
import struct
from collections.abc import Callable, Iterable, Sequence
from pathlib import Path

import numpy as np

from lib.core import INDEX_FORMAT_VERSION
from lib.core.core_gateway import Gateway
from lib.core.core_graph import EXTRACTION_EDGE_KINDS, KnowledgeGraph, NodeKind
from lib.core.core_schemas_errors import (
    DimensionMismatchError,
    GraphFormatError,
    IndexBuildError,
)
from lib.core.core_utils import atomic_write_bytes


logger = logging.getLogger(__name__)

INDEX_MAGIC = b"KGFV"
NORM_TOLERANCE = 1e-6

_HEADER = struct.Struct("<4sHIQ")
_ID_LENGTH = struct.Struct("<I")


class VectorIndex:
    """Immutable exact top-k index.

    Items are stored sorted by id, so the insertion order never affects results.

    Attributes:
        ids: Item ids, ascending.
        matrix: One unit row per item.
        dim: Vector dimension (0 for an empty index built without vectors).
    """

    def __init__(self, ids: list[str], matrix: np.ndarray) -> None:
        """Wrap prepared ids and rows; use build() to validate raw items."""
        self.ids = ids
        self.matrix = matrix
        self.matrix.setflags(write=False)
        self.dim = int(matrix.shape[1]) if matrix.ndim == 2 else 0  # noqa: PLR2004
        self._position = {item_id: index for index, item_id in enumerate(ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, item_id: object) -> bool:
        return item_id in self._position

    def vector(self, item_id: str) -> np.ndarray:
        """Return the stored vector of an item."""
        return self.matrix[self._position[item_id]]

    @classmethod
    def build(cls, items: Iterable[tuple[str, Sequence[float] | np.ndarray]]) -> "VectorIndex":
        """Build an index from (id, unit vector) pairs.

        Raises:
            IndexBuildError: On a duplicate id, mixed dimensions or a vector that is not unit-norm.
        """
        pairs = sorted(((item_id, np.asarray(vector, dtype=np.float64)) for item_id, vector in items), key=lambda pair: pair[0])
        if not pairs:
            return cls([], np.zeros((0, 0), dtype=np.float64))

        ids = [item_id for item_id, _ in pairs]
        for previous, current in zip(ids, ids[1:], strict=False):
            if previous == current:
                error_message = f"Duplicate index id '{current}'"
                raise IndexBuildError(error_message)

        dims = {vector.shape for _, vector in pairs}
        if len(dims) != 1 or len(next(iter(dims))) != 1:
            error_message = f"Index vectors have mixed shapes {sorted(dims)}"
            raise IndexBuildError(error_message)

        matrix = np.vstack([vector for _, vector in pairs])
        norms = np.linalg.norm(matrix, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOLERANCE)
        if bad.size:
            error_message = f"Index vector '{ids[int(bad[0])]}' is not unit-norm (norm {norms[bad[0]]:.6f})"
            raise IndexBuildError(error_message)

        return cls(ids, matrix)

    def subset(self, keep: Callable[[str], bool]) -> "VectorIndex":
        """Return an index over the items whose id satisfies `keep`; the dimension is kept."""
        rows = [index for index, item_id in enumerate(self.ids) if keep(item_id)]
        if len(rows) == len(self.ids):
            return self
        return VectorIndex([self.ids[index] for index in rows], self.matrix[rows].copy())

    def top_k(self, query: Sequence[float] | np.ndarray, k: int) -> list[tuple[str, float]]:
        """Return the k items with the largest dot product, best first.

        Ties keep ascending id order.

        Raises:
            - ValueError: If k is negative.
            - DimensionMismatchError: If the query dimension differs from the index.
        """
        if k < 0:
            error_message = f"k must be non-negative, got {k}"
            raise ValueError(error_message)
        if not self.ids or k == 0:
            return []

        vector = np.asarray(query, dtype=np.float64)
        if vector.shape != (self.dim,):
            error_message = f"Query has shape {vector.shape}, index dimension is {self.dim}"
            raise DimensionMismatchError(error_message)

        scores = self.matrix @ vector
        order = np.argsort(-scores, kind="stable")[:k]
        return [(self.ids[int(index)], float(scores[index])) for index in order]

    def scores(self, query: Sequence[float] | np.ndarray) -> dict[str, float]:
        """Return the dot product of the query with every item."""
        return dict(self.top_k(query, len(self.ids)))

    ##################################################################################################################
    #   PERSISTENCE
    ##################################################################################################################

    def save(self, path: Path) -> None:
        """Write the index file."""
        blob = bytearray(_HEADER.pack(INDEX_MAGIC, INDEX_FORMAT_VERSION, self.dim, len(self.ids)))
        for item_id in self.ids:
            encoded = item_id.encode("utf-8")
            blob += _ID_LENGTH.pack(len(encoded)) + encoded
        blob += np.ascontiguousarray(self.matrix, dtype="<f8").tobytes()
        atomic_write_bytes(path, bytes(blob))

    @classmethod
    def load(cls, path: Path) -> "VectorIndex":
        """Read an index file.

        Raises:
            GraphFormatError: On a wrong magic or version, truncation or trailing bytes.
        """
        data = path.read_bytes()
        if len(data) < _HEADER.size:
            error_message = f"{path}: file too short for an index header"
            raise GraphFormatError(error_message)

        magic, version, dim, count = _HEADER.unpack_from(data, 0)
        if magic != INDEX_MAGIC:
            error_message = f"{path}: not an index file"
            raise GraphFormatError(error_message)
        if version != INDEX_FORMAT_VERSION:
            error_message = f"{path}: index format version {version}, expected {INDEX_FORMAT_VERSION}"
            raise GraphFormatError(error_message)

        offset = _HEADER.size
        ids: list[str] = []
        for _ in range(count):
            if offset + _ID_LENGTH.size > len(data):
                error_message = f"{path}: truncated id table"
                raise GraphFormatError(error_message)
            (length,) = _ID_LENGTH.unpack_from(data, offset)
            offset += _ID_LENGTH.size
            if offset + length > len(data):
                error_message = f"{path}: truncated id table"
                raise GraphFormatError(error_message)
            try:
                ids.append(data[offset:offset + length].decode("utf-8"))
            except UnicodeDecodeError as e:
                error_message = f"{path}: id is not valid utf-8"
                raise GraphFormatError(error_message) from e
            offset += length

        expected = count * dim * 8
        if len(data) - offset != expected:
            error_message = f"{path}: vector block has {len(data) - offset} bytes, expected {expected}"
            raise GraphFormatError(error_message)

        matrix = np.frombuffer(data, dtype="<f8", offset=offset).astype(np.float64).reshape(count, dim)
        if count == 0:
            matrix = np.zeros((0, dim), dtype=np.float64)
        return cls(ids, matrix)


##################################################################################################################
#   BUILDERS
##################################################################################################################

def embed_items(gateway: Gateway, items: Sequence[tuple[str, str]], batch_size: int = 64) -> VectorIndex:
    """Embed (id, text) pairs in batches and build an index."""
    vectors: list[tuple[str, np.ndarray]] = []
    for start in range(0, len(items), batch_size):
        chunk = items[start:start + batch_size]
        embedded = gateway.embed([text for _, text in chunk])
        vectors.extend((item_id, vector) for (item_id, _), vector in zip(chunk, embedded, strict=True))
    return VectorIndex.build(vectors)


def edge_id(head: str, relation: str, tail: str) -> str:
    """Return the index id of an edge given its endpoint texts."""
    return f"{head}|{relation}|{tail}"


def node_index(graph: KnowledgeGraph, gateway: Gateway, batch_size: int = 64) -> VectorIndex:
    """Index entity and event nodes by their text; ids are node ids."""
    items = [(node_id, graph.text(node_id)) for node_id in graph.node_ids([NodeKind.ENTITY, NodeKind.EVENT])]
    return embed_items(gateway, items, batch_size)


def edge_index(graph: KnowledgeGraph, gateway: Gateway, batch_size: int = 64) -> VectorIndex:
    """Index extraction edges by "head relation tail"; ids are "head|relation|tail" node ids."""
    seen: dict[str, str] = {}
    for edge in graph.edges():
        if edge.kind in EXTRACTION_EDGE_KINDS:
            item_id = edge_id(edge.head, edge.relation, edge.tail)
            seen.setdefault(item_id, f"{graph.text(edge.head)} {edge.relation} {graph.text(edge.tail)}")
    return embed_items(gateway, sorted(seen.items()), batch_size)


def passage_index(graph: KnowledgeGraph, gateway: Gateway, batch_size: int = 64) -> VectorIndex:
    """Index passages by their text; ids are passage ids."""
    items = [(passage_id, text or passage_id) for passage_id, text in sorted(graph.passages.items())]
    return embed_items(gateway, items, batch_size)
