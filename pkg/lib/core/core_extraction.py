"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.

Three-stage triple extraction: corpus filtering, chunking, batching, prompt
assembly, output parsing and batch files.

Batch files live under <out>/<stage>/<batch_idx>.jsonl, one TripleBatch
record per chunk of the batch.
"""
import logging
import re
from collections.abc import Callable, Iterable, Iterator
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, ValidationError

from lib.core import INVOLVES, PARTICIPATES_IN, VV_RELATIONS
from lib.core.core_config import PipelineConfig
from lib.core.core_gateway import ChatRequest, Gateway, Message
from lib.core.core_graph import EdgeKind, KnowledgeGraph, NodeKind, collapse_whitespace
from lib.core.core_json_repair import ParseStatus, repair_json
from lib.core.core_prompts import golden_prompt
from lib.core.core_schemas import (
    STAGES,
    Document,
    LineError,
    Stage,
    TextChunk,
    TripleBatch,
)
from lib.core.core_schemas_errors import ConfigError, GatewayError, RejectedTripleError
from lib.core.core_utils import append_jsonl, ordered_map, read_jsonl, write_jsonl


logger = logging.getLogger(__name__)

PIECE = re.compile(r"\S+\s*")
SENTENCE_END = re.compile(r"[.!?][\"')\]]*\s+$")
PARAGRAPH_END = re.compile(r"\n\s*\n\s*$")

TRIPLE_KEYS = ("Head", "Relation", "Tail")

TokenCounter = Callable[[str], int]


##################################################################################################################
#   CORPUS
##################################################################################################################

def read_corpus(path: Path) -> Iterator[Document | LineError]:
    """Read a JSON-lines corpus of {id, text, metadata} records.

    Args:
        path: Corpus file.

    Yields:
        Documents, and LineError records for lines that fail to decode or validate.
    """
    for item in read_jsonl(path):
        if isinstance(item, LineError):
            yield item
            continue
        line_no, value = item
        try:
            yield Document.model_validate(value)
        except ValidationError as e:
            yield LineError(path=str(path), line_no=line_no, message=str(e.errors()[0]["msg"]))


def filter_corpus(docs: Iterable[Document]) -> Iterator[Document]:
    """Keep English and untagged documents, in order."""
    for doc in docs:
        if doc.is_english:
            yield doc
        else:
            logger.debug("Skipping document %s tagged '%s'", doc.id, doc.language)


##################################################################################################################
#   CHUNKING
##################################################################################################################

def instruction_budget(gateway: Gateway, cfg: PipelineConfig) -> int:
    """Return the instruction budget: the configured one, or the largest measured stage prompt."""
    measured = max(gateway.token_count(golden_prompt(stage)) for stage in STAGES)
    return max(cfg.l_inst, measured)


def chunk_budget(gateway: Gateway, cfg: PipelineConfig) -> int:
    """Return the chunk budget left by the instruction budget.

    Raises:
        ConfigError: If the stage prompts alone fill the context.
    """
    budget = cfg.l_max - instruction_budget(gateway, cfg)
    if budget <= 0:
        error_message = f"l_max ({cfg.l_max}) leaves no room for text after the stage prompts"
        raise ConfigError(error_message)
    return budget


def _largest_fitting(limit: int, fits: Callable[[int], bool]) -> int:
    """Return the largest n in [0, limit] with fits(n), assuming fits is monotone."""
    low, high = 0, limit
    while low < high:
        middle = (low + high + 1) // 2
        if fits(middle):
            low = middle
        else:
            high = middle - 1
    return low


def _is_break(piece: str) -> bool:
    """Whether a piece ends a sentence or a paragraph."""
    return bool(SENTENCE_END.search(piece) or PARAGRAPH_END.search(piece))


def chunk_document(
    doc: Document,
    cfg: PipelineConfig,
    token_count: TokenCounter,
    c_max: int | None = None,
) -> list[TextChunk]:
    """Split a document into chunks of at most c_max tokens.

    Chunks grow greedily over whitespace-delimited pieces. When a chunk has to
    stop before the end of the document, the split moves back to the last
    sentence or paragraph break inside the lookback window, if there is one.
    A single piece longer than the budget is split by characters.

    Args:
        doc: Document to split.
        cfg: Pipeline settings.
        token_count: Tokenizer of the active gateway.
        c_max: Chunk budget; defaults to cfg.c_max.

    Returns:
        Chunks with dense sequence numbers; none for an empty document.
    """
    budget = cfg.c_max if c_max is None else c_max
    pieces = PIECE.findall(doc.text.strip())
    chunks: list[str] = []

    def fits(text: str) -> bool:
        return token_count(text.strip()) <= budget

    start = 0
    while start < len(pieces):
        remaining = len(pieces) - start
        taken = _largest_fitting(remaining, lambda n: fits("".join(pieces[start:start + n])))

        if taken == 0:
            piece = pieces[start]
            cut = max(1, _largest_fitting(len(piece), lambda n: fits(piece[:n])))
            chunks.append(piece[:cut])
            pieces[start] = piece[cut:]
            if not pieces[start].strip():
                start += 1
            continue

        end = start + taken
        if end < len(pieces):
            window_start = max(start + 1, end - cfg.lookback_tokens)
            for candidate in range(end, window_start - 1, -1):
                if _is_break(pieces[candidate - 1]):
                    end = candidate
                    break

        chunks.append("".join(pieces[start:end]))
        start = end

    metadata = {"language": doc.language, "source": doc.metadata.get("source", doc.id)}
    return [
        TextChunk(
            chunk_id=f"{doc.id}#{seq_no}",
            doc_id=doc.id,
            seq_no=seq_no,
            text=text.strip(),
            token_count=token_count(text.strip()),
            metadata=metadata,
        )
        for seq_no, text in enumerate(chunk for chunk in chunks if chunk.strip())
    ]


def group_batches(chunks: Iterable[TextChunk], batch_size: int) -> list[list[TextChunk]]:
    """Group chunks into consecutive batches of batch_size."""
    chunks = list(chunks)
    return [chunks[index:index + batch_size] for index in range(0, len(chunks), batch_size)]


##################################################################################################################
#   PROMPTS AND PARSING
##################################################################################################################

def build_stage_prompt(stage: Stage, chunk_text: str) -> list[Message]:
    """Return the chat messages of one extraction stage.

    The system message is the stage prompt verbatim; the chunk follows as the user message.
    """
    return [
        Message(role="system", content=golden_prompt(stage)),
        Message(role="user", content=chunk_text),
    ]


def _lookup(item: dict[str, Any], key: str) -> Any:
    """Get a key case-insensitively."""
    for candidate, value in item.items():
        if isinstance(candidate, str) and candidate.strip().casefold() == key.casefold():
            return value
    return None


def _clean_text(value: Any) -> str:
    return collapse_whitespace(value) if isinstance(value, str) else ""


def _validate_item(stage: Stage, item: Any) -> dict[str, Any] | None:
    """Normalize one parsed item of a stage; None when required fields are missing."""
    if not isinstance(item, dict):
        return None

    if stage == "EV":
        event = _clean_text(_lookup(item, "Event"))
        entities = _lookup(item, "Entity")
        if isinstance(entities, str):
            entities = [entities]
        if not isinstance(entities, list):
            return None
        cleaned = [_clean_text(entity) for entity in entities]
        cleaned = [entity for entity in cleaned if entity and entity != "..."]
        if not event or not cleaned:
            return None
        return {"Event": event, "Entity": cleaned}

    values = {key: _clean_text(_lookup(item, key)) for key in TRIPLE_KEYS}
    if not all(values.values()):
        return None
    return values


def parse_stage_output(
    stage: Stage,
    raw: str,
    t_start: str = "",
    chunk: TextChunk | None = None,
    batch_idx: int = 0,
) -> TripleBatch:
    """Parse one model response into a TripleBatch. Never raises.

    Only the text after the last answer-start marker is parsed. Items missing
    a required key are dropped, which marks the batch "repaired".

    Args:
        stage: Extraction stage.
        raw: Full model response.
        t_start: Answer-start marker.
        chunk: Chunk the response belongs to, copied into the record.
        batch_idx: Batch index of the chunk.

    Returns:
        The parsed record.
    """
    answer = raw.rsplit(t_start, 1)[-1] if t_start and t_start in raw else raw
    result = repair_json(answer)

    status: ParseStatus = result.status
    triples: list[dict[str, Any]] = []
    for item in result.value:
        valid = _validate_item(stage, item)
        if valid is None:
            status = "repaired"
        else:
            triples.append(valid)

    if status == "failed":
        logger.warning("Unparseable %s output for chunk %s", stage, chunk.chunk_id if chunk else "?")
    elif status == "repaired":
        logger.debug("Repaired %s output for chunk %s", stage, chunk.chunk_id if chunk else "?")

    return TripleBatch(
        stage=stage,
        chunk_id=chunk.chunk_id if chunk else "",
        doc_id=chunk.doc_id if chunk else "",
        batch_idx=batch_idx,
        text=chunk.text if chunk else "",
        metadata=chunk.metadata if chunk else {},
        raw_output=raw,
        triples=triples,
        parse_status=status,
    )


def off_vocabulary(batch: TripleBatch) -> int:
    """Count event-event triples whose relation is outside the temporal/causal vocabulary."""
    if batch.stage != "VV":
        return 0
    count = 0
    for triple in batch.triples:
        if triple["Relation"].casefold() not in VV_RELATIONS:
            logger.debug("Relation '%s' of chunk %s is outside the event-event vocabulary", triple["Relation"], batch.chunk_id)
            count += 1
    return count


##################################################################################################################
#   BATCH FILES
##################################################################################################################

def batch_path(out_dir: Path, stage: Stage, batch_idx: int) -> Path:
    """Return the file holding one stage of one batch."""
    return out_dir / stage / f"{batch_idx}.jsonl"


def serialize_batch(batch: TripleBatch, path: Path) -> None:
    """Append one record to a batch file."""
    append_jsonl(path, batch.model_dump(mode="json"))


def write_batch_file(batches: list[TripleBatch], path: Path) -> None:
    """Write all records of one stage of one batch, replacing the file."""
    write_jsonl(path, [batch.model_dump(mode="json") for batch in batches])


def _batch_order(path: Path) -> tuple[bool, int, str]:
    """Sort key of batch files: numeric names first, by number."""
    stem = path.stem
    return (not stem.isdigit(), int(stem) if stem.isdigit() else 0, path.name)


def load_batches(directory: Path) -> Iterator[TripleBatch | LineError]:
    """Read every batch file of a run, stage by stage and in batch order.

    Args:
        directory: Run output directory.

    Yields:
        TripleBatch records, and LineError records for undecodable lines.
    """
    for stage in STAGES:
        stage_dir = directory / stage
        if not stage_dir.is_dir():
            continue
        for path in sorted(stage_dir.glob("*.jsonl"), key=_batch_order):
            for item in read_jsonl(path):
                if isinstance(item, LineError):
                    yield item
                    continue
                line_no, value = item
                try:
                    yield TripleBatch.model_validate(value)
                except ValidationError as e:
                    yield LineError(path=str(path), line_no=line_no, message=str(e.errors()[0]["msg"]))


##################################################################################################################
#   RUN
##################################################################################################################

class ExtractionSummary(BaseModel):
    """Counters of an extraction run.

    Attributes:
        documents: Documents kept by the language filter.
        chunks: Chunks produced.
        batches: Batches in the run.
        skipped_batches: Batches already completed by an earlier run.
        statuses: Parse statuses per stage.
        vv_off_vocabulary: Event-event triples outside the relation vocabulary.
    """
    documents: int = 0
    chunks: int = 0
    batches: int = 0
    skipped_batches: int = 0
    statuses: dict[str, dict[str, int]] = Field(
        default_factory=lambda: {stage: {"ok": 0, "repaired": 0, "failed": 0} for stage in STAGES}
    )
    vv_off_vocabulary: int = 0

    def record(self, batch: TripleBatch) -> None:
        """Count one parsed record."""
        self.statuses[batch.stage][batch.parse_status] += 1
        self.vv_off_vocabulary += off_vocabulary(batch)


def _stage_budget(stage: Stage, cfg: PipelineConfig) -> int:
    """Return the generation budget of a stage."""
    if stage == "VV":
        return cfg.l_ext
    return min(cfg.l_max, cfg.max_output_tokens)


def _extract_chunk(chunk: TextChunk, batch_idx: int, cfg: PipelineConfig, gateway: Gateway) -> list[TripleBatch]:
    """Run the three stages on one chunk, in order."""
    records: list[TripleBatch] = []
    for stage in STAGES:
        request = ChatRequest(
            messages=build_stage_prompt(stage, chunk.text),
            max_tokens=_stage_budget(stage, cfg),
            t_chat=cfg.t_chat,
            profile="constructor",
        )
        try:
            raw = gateway.chat(request)
        except GatewayError as e:
            logger.warning("Stage %s failed for chunk %s: %s", stage, chunk.chunk_id, e)
            records.append(
                TripleBatch(
                    stage=stage,
                    chunk_id=chunk.chunk_id,
                    doc_id=chunk.doc_id,
                    batch_idx=batch_idx,
                    text=chunk.text,
                    metadata=chunk.metadata,
                    raw_output="",
                    parse_status="failed",
                )
            )
            continue
        records.append(parse_stage_output(stage, raw, cfg.t_start, chunk, batch_idx))
    return records


def run_extraction(
    corpus: Iterable[Document],
    cfg: PipelineConfig,
    gateway: Gateway,
    out_dir: Path,
    max_in_flight: int = 8,
    completed: set[int] | None = None,
    on_batch_done: Callable[[int], None] | None = None,
) -> ExtractionSummary:
    """Run the three extraction stages over a corpus and write the batch files.

    Chunks of a batch are processed concurrently; the stages of one chunk run
    in order EE, EV, VV on the same text. A batch's files are written once all
    its chunks are done.

    Args:
        corpus: Documents (unfiltered).
        cfg: Pipeline settings.
        gateway: Model gateway.
        out_dir: Run output directory.
        max_in_flight: Maximum concurrent chunks.
        completed: Batch indices to skip (resume).
        on_batch_done: Called with each batch index once its files are written.

    Returns:
        Run counters.
    """
    completed = completed or set()
    summary = ExtractionSummary()
    c_max = chunk_budget(gateway, cfg)

    chunks: list[TextChunk] = []
    for doc in filter_corpus(corpus):
        summary.documents += 1
        chunks.extend(chunk_document(doc, cfg, gateway.token_count, c_max))
    summary.chunks = len(chunks)

    batches = group_batches(chunks, cfg.batch_size)
    summary.batches = len(batches)
    logger.info("Extracting %d chunks in %d batches", len(chunks), len(batches))

    for batch_idx, batch in enumerate(batches):
        if batch_idx in completed:
            summary.skipped_batches += 1
            continue

        results = ordered_map(lambda chunk, idx=batch_idx: _extract_chunk(chunk, idx, cfg, gateway), batch, max_in_flight)

        for stage_index, stage in enumerate(STAGES):
            records = [chunk_records[stage_index] for chunk_records in results]
            for record in records:
                summary.record(record)
            write_batch_file(records, batch_path(out_dir, stage, batch_idx))

        if on_batch_done is not None:
            on_batch_done(batch_idx)

    return summary


##################################################################################################################
#   GRAPH BUILDING
##################################################################################################################

class BuildSummary(BaseModel):
    """Counters of a graph build."""
    records: int = 0
    failed_records: int = 0
    triples: int = 0
    rejected: int = 0
    line_errors: int = 0


def triples_to_graph(
    batches: Iterable[TripleBatch | LineError],
    graph: KnowledgeGraph | None = None,
    ev_orientation: str = "event_entity",
) -> tuple[KnowledgeGraph, BuildSummary]:
    """Build (or extend) a graph from extraction records.

    Entity-entity and event-event items become edges of their kind. Each
    event-entity item yields one edge per entity: (event, "involves", entity),
    or (entity, "participates_in", event) with the entity_event orientation.
    Chunk texts are registered as passages.

    Args:
        batches: Records, as yielded by load_batches.
        graph: Graph to extend; a new one by default.
        ev_orientation: "event_entity" or "entity_event".

    Returns:
        The graph and the build counters.
    """
    graph = graph or KnowledgeGraph()
    summary = BuildSummary()

    for batch in batches:
        if isinstance(batch, LineError):
            logger.warning("Skipping undecodable record %s", batch)
            summary.line_errors += 1
            continue

        summary.records += 1
        if batch.text:
            graph.add_passage(batch.chunk_id, batch.text)
        if batch.parse_status == "failed":
            summary.failed_records += 1
            continue

        for item in batch.triples:
            for head, relation, tail, kind, head_kind in _edges_of(batch.stage, item, ev_orientation):
                try:
                    graph.add_triple(head, relation, tail, kind, batch.chunk_id, head_kind=head_kind)
                    summary.triples += 1
                except RejectedTripleError as e:
                    logger.debug("Rejected triple from %s: %s", batch.chunk_id, e)
                    summary.rejected += 1

    return graph, summary


def _edges_of(
    stage: Stage, item: dict[str, Any], ev_orientation: str
) -> Iterator[tuple[str, str, str, EdgeKind, NodeKind | None]]:
    if stage == "EE":
        yield item["Head"], item["Relation"], item["Tail"], EdgeKind.ENTITY_ENTITY, None
    elif stage == "VV":
        yield item["Head"], item["Relation"], item["Tail"], EdgeKind.EVENT_EVENT, None
    else:
        for entity in item["Entity"]:
            if ev_orientation == "entity_event":
                yield entity, PARTICIPATES_IN, item["Event"], EdgeKind.EVENT_ENTITY, NodeKind.ENTITY
            else:
                yield item["Event"], INVOLVES, entity, EdgeKind.EVENT_ENTITY, None
