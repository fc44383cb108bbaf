"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.

Schema induction: every event, entity and relation of the graph is mapped to
short concept phrases, which become Concept nodes through attach_concept.
"""
import logging
from collections import defaultdict
from collections.abc import Iterable
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
import orjson
import pandas as pd
from pydantic import ValidationError

from lib.core.core_config import InductionConfig
from lib.core.core_gateway import ChatRequest, Gateway, Message
from lib.core.core_graph import KnowledgeGraph, NodeId, NodeKind, dedup_key
from lib.core.core_prompts import fill_slots, golden_prompt
from lib.core.core_schemas import ConceptRecord, ElementKind
from lib.core.core_schemas_errors import ConfigError, DataFormatError, GatewayError
from lib.core.core_utils import atomic_write_bytes, ordered_map, stable_rng


logger = logging.getLogger(__name__)

CSV_COLUMNS = ["element", "kind", "phrases", "context"]
FALLBACK_COLUMN = "fallback"
PHRASE_SEPARATOR = ";"
MAX_PHRASE_WORDS = 2
CHECKPOINT_NAME = "induction_checkpoint.json"

KIND_OF_NODE: dict[ElementKind, NodeKind] = {"event": NodeKind.EVENT, "entity": NodeKind.ENTITY}


class SchemaElement(NamedTuple):
    """An element to conceptualize: a node (key is its id) or a relation (key is the relation)."""
    kind: ElementKind
    key: str
    text: str


def schema_elements(graph: KnowledgeGraph) -> list[SchemaElement]:
    """List events, then entities, then relations, each sorted by text and key."""
    events = sorted(
        (SchemaElement("event", node.id, node.text) for node in graph.nodes_of_kind(NodeKind.EVENT)),
        key=lambda element: (element.text, element.key),
    )
    entities = sorted(
        (SchemaElement("entity", node.id, node.text) for node in graph.nodes_of_kind(NodeKind.ENTITY)),
        key=lambda element: (element.text, element.key),
    )
    relations = [SchemaElement("relation", relation, relation) for relation in graph.relations()]
    return events + entities + relations


def slice_elements[T](elements: list[T], s_total: int, s_slice: int) -> list[T]:
    """Return the s_slice-th of s_total contiguous, near-equal slices."""
    bounds = np.array_split(np.arange(len(elements)), s_total)[s_slice]
    return [elements[int(index)] for index in bounds]


def sample_entity_context(
    graph: KnowledgeGraph,
    entity: NodeId,
    n_ctx: int,
    rng: np.random.Generator,
) -> list[str]:
    """Sample up to n_ctx neighbors of an entity as context pieces.

    Up to ceil(n_ctx/2) predecessors ("neighbor relation") and floor(n_ctx/2)
    successors ("relation neighbor") are drawn; a side with too few neighbors
    leaves its share to the other side. Pieces keep predecessor-then-successor
    order.

    Args:
        graph: Graph.
        entity: Entity node id.
        n_ctx: Maximum number of neighbors.
        rng: Random generator.

    Returns:
        Context pieces; empty for an isolated node or n_ctx == 0.
    """
    if n_ctx <= 0:
        return []

    predecessors = graph.predecessors(entity)
    successors = graph.successors(entity)

    n_succ = min(len(successors), n_ctx // 2)
    n_pred = min(len(predecessors), n_ctx - n_succ)
    n_succ = min(len(successors), n_ctx - n_pred)

    def draw(pairs: list[tuple[str, NodeId]], count: int) -> list[tuple[str, NodeId]]:
        if count == 0:
            return []
        picked = np.sort(rng.choice(len(pairs), size=count, replace=False))
        return [pairs[int(index)] for index in picked]

    pieces = [f"{graph.text(node)} {relation}" for relation, node in draw(predecessors, n_pred)]
    pieces += [f"{relation} {graph.text(node)}" for relation, node in draw(successors, n_succ)]
    return pieces


def build_concept_prompt(kind: ElementKind, element_text: str, context: str = "") -> list[Message]:
    """Return the conceptualization prompt of one element, slots filled.

    Args:
        kind: event, entity or relation.
        element_text: Element text.
        context: Entity context; ignored for the other kinds.

    Returns:
        A single system message.
    """
    marker = {"event": "[EVENT]", "entity": "[ENTITY]", "relation": "[RELATION]"}[kind]
    slots = {marker: element_text}
    if kind == "entity":
        slots["[CONTEXT]"] = context
    return [Message(role="system", content=fill_slots(golden_prompt(kind), slots))]


def parse_phrases(raw: str, element: str | None = None) -> list[str]:
    """Split a comma-separated answer into clean concept phrases.

    Only the first non-empty line is read. Phrases are trimmed; empty ones,
    case-folded duplicates, phrases longer than two words, phrases equal to the
    element and phrases containing the CSV separator are dropped.

    Args:
        raw: Model answer.
        element: Element text the phrases describe.

    Returns:
        Phrases in answer order.
    """
    lines = [line for line in raw.splitlines() if line.strip()]
    if not lines:
        return []

    element_key = dedup_key(element) if element else None
    seen: set[str] = set()
    phrases: list[str] = []
    for candidate in lines[0].split(","):
        phrase = " ".join(candidate.split()).strip(" .\"'")
        key = phrase.casefold()
        if (
            not phrase
            or key in seen
            or len(phrase.split()) > MAX_PHRASE_WORDS
            or key == element_key
            or PHRASE_SEPARATOR in phrase
        ):
            continue
        seen.add(key)
        phrases.append(phrase)
    return phrases


def _fit_context(
    kind: ElementKind, text: str, pieces: list[str], cfg: InductionConfig, gateway: Gateway
) -> tuple[list[Message], str]:
    """Drop trailing context pieces until the prompt fits l_tok."""
    while True:
        context = ", ".join(pieces)
        messages = build_concept_prompt(kind, text, context)
        if not pieces or gateway.token_count(messages[0].content) <= cfg.l_tok:
            return messages, context
        pieces = pieces[:-1]


def conceptualize(
    graph: KnowledgeGraph,
    element: SchemaElement,
    cfg: InductionConfig,
    gateway: Gateway,
) -> ConceptRecord:
    """Ask the gateway for the concept phrases of one element.

    An element without usable phrases gets its kind name as the only phrase.
    """
    pieces: list[str] = []
    if element.kind == "entity":
        rng = stable_rng(cfg.rng_seed, element.key)
        pieces = sample_entity_context(graph, element.key, cfg.n_ctx, rng)

    messages, context = _fit_context(element.kind, element.text, pieces, cfg, gateway)
    request = ChatRequest(
        messages=messages,
        max_tokens=cfg.max_tokens,
        temperature=cfg.tau,
        top_p=cfg.p,
        profile="constructor",
    )

    try:
        phrases = parse_phrases(gateway.chat(request), element.text)
    except GatewayError as e:
        logger.warning("Conceptualization of %s '%s' failed: %s", element.kind, element.text, e)
        phrases = []

    if not phrases:
        logger.warning("No concept phrases for %s '%s'; using the fallback concept", element.kind, element.text)
        return ConceptRecord(element=element.text, kind=element.kind, phrases=[element.kind], context=context, fallback=True)

    return ConceptRecord(element=element.text, kind=element.kind, phrases=phrases, context=context)


##################################################################################################################
#   CHECKPOINT
##################################################################################################################

def _load_checkpoint(path: Path, cfg: InductionConfig) -> dict[int, list[ConceptRecord]]:
    """Load the records of batches completed in an earlier run of the same slice.

    Raises:
        - ConfigError: If the checkpoint belongs to another slice.
        - DataFormatError: If the file is not a valid checkpoint.
    """
    if not path.exists():
        return {}
    try:
        data = orjson.loads(path.read_bytes())
        if (data["s_total"], data["s_slice"]) != (cfg.s_total, cfg.s_slice):
            error_message = f"{path} belongs to slice {data['s_slice']}/{data['s_total']}"
            raise ConfigError(error_message)
        return {
            int(index): [ConceptRecord.model_validate(record) for record in records]
            for index, records in data["batches"].items()
        }
    except (orjson.JSONDecodeError, KeyError, TypeError, ValidationError) as e:
        error_message = f"{path} is not a valid induction checkpoint"
        raise DataFormatError(error_message) from e


def _save_checkpoint(path: Path, cfg: InductionConfig, done: dict[int, list[ConceptRecord]]) -> None:
    """Write the completed batches of the slice."""
    data = {
        "s_total": cfg.s_total,
        "s_slice": cfg.s_slice,
        "batches": {str(index): [record.model_dump(mode="json") for record in records] for index, records in done.items()},
    }
    atomic_write_bytes(path, orjson.dumps(data, option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2))


##################################################################################################################
#   INDUCTION
##################################################################################################################

def induction_batches(elements: list[SchemaElement], cfg: InductionConfig) -> list[tuple[int, list[SchemaElement]]]:
    """Return the (batch index, elements) pairs processed for the configured slice.

    With n_sample set, that many batches are drawn without replacement and kept in index order.
    """
    sliced = slice_elements(elements, cfg.s_total, cfg.s_slice)
    batches = [sliced[index:index + cfg.batch_size] for index in range(0, len(sliced), cfg.batch_size)]
    indices = list(range(len(batches)))

    if cfg.n_sample is not None and cfg.n_sample < len(batches):
        rng = np.random.default_rng(cfg.rng_seed)
        indices = sorted(int(index) for index in rng.choice(len(batches), size=cfg.n_sample, replace=False))

    return [(index, batches[index]) for index in indices]


def apply_records(graph: KnowledgeGraph, records: Iterable[ConceptRecord]) -> int:
    """Attach the phrases of concept records to their elements.

    Returns:
        Number of records applied; records of elements absent from the graph are skipped.
    """
    applied = 0
    for record in records:
        if record.kind == "relation":
            element: str | None = record.element
        else:
            element = graph.find_node(record.element, KIND_OF_NODE[record.kind])
        if element is None:
            logger.warning("Concept record for unknown %s '%s'", record.kind, record.element)
            continue
        for phrase in record.phrases:
            graph.attach_concept(element, phrase)
        applied += 1
    return applied


def induce_schema(
    graph: KnowledgeGraph,
    cfg: InductionConfig,
    gateway: Gateway,
    out_dir: Path | None = None,
    max_in_flight: int = 8,
) -> tuple[KnowledgeGraph, list[ConceptRecord]]:
    """Conceptualize the elements of one slice and attach the concepts to the graph.

    Elements of a batch are conceptualized concurrently; the graph is only
    written from the calling thread. With out_dir set, completed batches are
    checkpointed after each batch and not queried again on resume.

    Args:
        graph: Graph built from the extraction records.
        cfg: Induction settings.
        gateway: Model gateway.
        out_dir: Directory of the checkpoint file.
        max_in_flight: Maximum concurrent requests.

    Returns:
        The graph and the records, in element order.
    """
    checkpoint = out_dir / CHECKPOINT_NAME if out_dir is not None else None
    done = _load_checkpoint(checkpoint, cfg) if checkpoint is not None else {}

    batches = induction_batches(schema_elements(graph), cfg)
    logger.info("Inducing concepts for %d batches (%d already done)", len(batches), len(done))

    for batch_idx, elements in batches:
        if batch_idx in done:
            continue
        done[batch_idx] = ordered_map(lambda element: conceptualize(graph, element, cfg, gateway), elements, max_in_flight)
        if checkpoint is not None:
            _save_checkpoint(checkpoint, cfg, done)

    records = [record for batch_idx, _ in batches for record in done[batch_idx]]
    apply_records(graph, records)
    return graph, records


##################################################################################################################
#   CSV
##################################################################################################################

def write_concept_csv(records: Iterable[ConceptRecord], path: Path) -> None:
    """Write concept records as CSV (element, kind, phrases, context, fallback).

    Raises:
        OSError: If the file cannot be written; the message names the path.
    """
    rows = [
        {
            "element": record.element,
            "kind": record.kind,
            "phrases": PHRASE_SEPARATOR.join(record.phrases),
            "context": record.context,
            FALLBACK_COLUMN: "1" if record.fallback else "0",
        }
        for record in records
    ]
    frame = pd.DataFrame(rows, columns=[*CSV_COLUMNS, FALLBACK_COLUMN])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, lineterminator="\r\n", encoding="utf-8")
    except OSError as e:
        error_message = f"Cannot write concept CSV {path}: {e}"
        raise OSError(error_message) from e


def read_concept_csv(path: Path) -> list[ConceptRecord]:
    """Read a file written by write_concept_csv.

    The fallback column is optional; rows of files without it are read as
    model answers.

    Raises:
        DataFormatError: If columns are missing or a row does not validate.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        error_message = f"{path} is empty"
        raise DataFormatError(error_message) from e

    missing = [column for column in CSV_COLUMNS if column not in frame.columns]
    if missing:
        error_message = f"{path} lacks columns {missing}"
        raise DataFormatError(error_message)

    records: list[ConceptRecord] = []
    for row_no, row in enumerate(frame.to_dict(orient="records"), start=2):
        phrases = [phrase for phrase in row["phrases"].split(PHRASE_SEPARATOR) if phrase]
        try:
            records.append(
                ConceptRecord(
                    element=row["element"],
                    kind=row["kind"],
                    phrases=phrases,
                    context=row["context"],
                    fallback=row.get(FALLBACK_COLUMN, "0"),
                )
            )
        except ValidationError as e:
            error_message = f"{path}:{row_no}: {e.errors()[0]['msg']}"
            raise DataFormatError(error_message) from e
    return records


def concept_statistics(records: Iterable[ConceptRecord]) -> dict[str, Any]:
    """Count elements, distinct concept phrases and fallbacks per kind."""
    elements: dict[str, int] = defaultdict(int)
    types: dict[str, set[str]] = defaultdict(set)
    fallbacks: dict[str, int] = defaultdict(int)

    for record in records:
        elements[record.kind] += 1
        types[record.kind].update(phrase.casefold() for phrase in record.phrases)
        fallbacks[record.kind] += int(record.fallback)

    return {
        kind: {"elements": elements[kind], "types": len(types[kind]), "fallbacks": fallbacks[kind]}
        for kind in ("event", "entity", "relation")
    }
