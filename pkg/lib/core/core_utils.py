"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
import zlib
from collections.abc import Callable, Iterable, Iterator
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np
import orjson

from lib.core.core_schemas import LineError


def ordered_map[T, R](func: Callable[[T], R], items: Iterable[T], max_in_flight: int) -> list[R]:
    """Apply func to items on a thread pool and return results in input order.

    Args:
        func: Function applied to each item.
        items: Inputs.
        max_in_flight: Maximum number of concurrent calls.

    Returns:
        Results, one per item, in input order regardless of completion order.
    """
    items = list(items)
    if max_in_flight <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_in_flight) as executor:
        return list(executor.map(func, items))


def stable_rng(seed: int, key: str) -> np.random.Generator:
    """Return a generator seeded by a run seed and a string key.

    The same (seed, key) pair gives the same stream in every process.
    """
    return np.random.default_rng((seed, zlib.crc32(key.encode("utf-8"))))


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write bytes next to the destination and move them into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    temporary = path.with_name(path.name + ".tmp")
    temporary.write_bytes(data)
    temporary.replace(path)


def dumps_line(record: Any) -> bytes:
    """Serialize one JSON-lines record with sorted keys and a trailing newline."""
    return orjson.dumps(record, option=orjson.OPT_SORT_KEYS | orjson.OPT_APPEND_NEWLINE)


def write_jsonl(path: Path, records: Iterable[Any]) -> None:
    """Write records as a JSON-lines file, atomically."""
    atomic_write_bytes(path, b"".join(dumps_line(record) for record in records))


def append_jsonl(path: Path, record: Any) -> None:
    """Append one record to a JSON-lines file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("ab") as file:
        file.write(dumps_line(record))


def read_jsonl(path: Path) -> Iterator[tuple[int, Any] | LineError]:
    """Decode a JSON-lines file line by line.

    Blank lines are skipped. A line that is not valid JSON yields a LineError
    and reading goes on with the next line.

    Args:
        path: File to read.

    Yields:
        (line number, decoded value) pairs, or LineError records.
    """
    with path.open("rb") as file:
        for line_no, line in enumerate(file, start=1):
            if not line.strip():
                continue
            try:
                yield line_no, orjson.loads(line)
            except orjson.JSONDecodeError as e:
                yield LineError(path=str(path), line_no=line_no, message=str(e))
