"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.

Record schemas shared by the pipeline stages and their files.
"""
from typing import Any, Literal, Self

from pydantic import BaseModel, Field, model_validator

from lib.core.core_json_repair import ParseStatus


Stage = Literal["EE", "EV", "VV"]
STAGES: tuple[Stage, ...] = ("EE", "EV", "VV")

ElementKind = Literal["event", "entity", "relation"]

ENGLISH_TAGS = frozenset({"en", "eng", "english"})


class Document(BaseModel):
    """A corpus document.

    Attributes:
        id: Document id.
        text: Raw text.
        metadata: Free-form metadata; "language" drives corpus filtering.
    """
    id: str = Field(min_length=1)
    text: str
    metadata: dict[str, Any] = Field(default_factory=dict)

    @property
    def language(self) -> str | None:
        """Language tag, or None when the document is untagged."""
        value = self.metadata.get("language")
        return str(value).strip() or None if value is not None else None

    @property
    def is_english(self) -> bool:
        """English or untagged."""
        tag = self.language
        if tag is None:
            return True
        tag = tag.casefold().replace("_", "-")
        return tag in ENGLISH_TAGS or tag.startswith("en-")


class TextChunk(BaseModel):
    """A chunk of a document that fits the model context.

    Attributes:
        chunk_id: "<doc_id>#<seq_no>".
        doc_id: Source document id.
        seq_no: Position of the chunk in its document, from 0.
        text: Chunk text.
        token_count: Tokens of the text under the active tokenizer.
        metadata: Language tag and source of the document.
    """
    chunk_id: str
    doc_id: str
    seq_no: int = Field(ge=0)
    text: str
    token_count: int = Field(ge=0)
    metadata: dict[str, Any] = Field(default_factory=dict)


class TripleBatch(BaseModel):
    """Parsed output of one extraction stage over one chunk.

    Attributes:
        stage: EE, EV or VV.
        chunk_id: Chunk (passage) id.
        doc_id: Source document id.
        batch_idx: Index of the batch file holding the record.
        text: Chunk text.
        metadata: Chunk metadata.
        raw_output: Full model response.
        triples: Parsed items; {"Head", "Relation", "Tail"} or {"Event", "Entity"}.
        parse_status: ok, repaired or failed.
    """
    stage: Stage
    chunk_id: str
    doc_id: str = ""
    batch_idx: int = Field(default=0, ge=0)
    text: str = ""
    metadata: dict[str, Any] = Field(default_factory=dict)
    raw_output: str
    triples: list[dict[str, Any]] = Field(default_factory=list)
    parse_status: ParseStatus

    @model_validator(mode="after")
    def _check_failed_is_empty(self) -> Self:
        if self.parse_status == "failed" and self.triples:
            error_message = "a failed batch cannot carry triples"
            raise ValueError(error_message)
        return self


class LineError(BaseModel):
    """A JSON-lines record that could not be decoded.

    Attributes:
        path: File name.
        line_no: 1-based line number.
        message: Decoder or validation message.
    """
    path: str
    line_no: int
    message: str

    def __str__(self) -> str:
        return f"{self.path}:{self.line_no}: {self.message}"


class ConceptRecord(BaseModel):
    """Induced concept phrases of one schema element.

    Attributes:
        element: Element text (node text or relation string).
        kind: event, entity or relation.
        phrases: Cleaned phrases; the kind name when induction failed.
        context: Neighbor context of entities; empty for other kinds.
        fallback: True when the phrases are the kind-name fallback.
    """
    element: str
    kind: ElementKind
    phrases: list[str]
    context: str = ""
    fallback: bool = False
