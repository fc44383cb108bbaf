"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.

Multiple-choice information-preservation protocol: questions are generated
from each passage, then answered with different context (nothing, the
passage itself, or graph triples extracted from it). Accuracy under triple
context, relative to the no-context and passage bounds, tells how much of the
passage the graph kept.
"""
import logging
import re
from collections.abc import Mapping, Sequence
from typing import Literal

from pydantic import BaseModel, Field, ValidationError, field_validator

from lib.core.core_gateway import ChatRequest, Exchange, ExchangeHook, Gateway
from lib.core.core_graph import EdgeKind, KnowledgeGraph
from lib.core.core_json_repair import repair_json
from lib.core.core_prompts import fill_slots, golden_prompt
from lib.core.core_schemas_errors import GatewayError, UndefinedMetricError
from lib.core.core_utils import ordered_map


logger = logging.getLogger(__name__)

Condition = Literal["none", "passage", "entity", "event", "event+entity"]
CONDITIONS: tuple[Condition, ...] = ("none", "passage", "entity", "event", "event+entity")

OPTION_PREFIX = re.compile(r"^\s*[ABCD]\s*[:.)]\s*")
ANSWER_LETTER = re.compile(r"^\s*\(?([ABCD])\b")

CONDITION_EDGES: dict[Condition, tuple[EdgeKind, ...]] = {
    "entity": (EdgeKind.ENTITY_ENTITY,),
    "event": (EdgeKind.EVENT_ENTITY, EdgeKind.EVENT_EVENT),
    "event+entity": (EdgeKind.ENTITY_ENTITY, EdgeKind.EVENT_ENTITY, EdgeKind.EVENT_EVENT),
}


class McqItem(BaseModel):
    """A four-option question generated from a passage.

    Options are stored without their "A: " style labels.
    """
    question: str = Field(min_length=1)
    options: list[str] = Field(min_length=4, max_length=4)
    answer: Literal["A", "B", "C", "D"]
    passage_id: str

    @field_validator("options")
    @classmethod
    def _strip_labels(cls, options: list[str]) -> list[str]:
        return [OPTION_PREFIX.sub("", str(option), count=1).strip() for option in options]

    @field_validator("answer", mode="before")
    @classmethod
    def _clean_answer(cls, answer: object) -> object:
        if isinstance(answer, str):
            found = ANSWER_LETTER.match(answer.upper())
            return found.group(1) if found else answer
        return answer


class McqOutcome(BaseModel):
    """Accuracy of one condition."""
    condition: Condition
    accuracy: float
    total: int
    correct: int
    non_letter: int
    dropped: int


def parse_mcqs(raw: str, passage_id: str) -> tuple[list[McqItem], int]:
    """Parse the generator output into items.

    Returns:
        The valid items and the number of dropped entries.
    """
    result = repair_json(raw)
    if result.status == "failed":
        logger.warning("Dropped the question list of passage '%s': output is not a JSON list", passage_id)
        return [], 1

    items: list[McqItem] = []
    dropped = 0
    for index, entry in enumerate(result.value):
        if not isinstance(entry, dict):
            dropped += 1
            logger.warning("Dropped question %d of passage '%s': not an object", index, passage_id)
            continue
        try:
            items.append(McqItem.model_validate({**{key.lower(): value for key, value in entry.items()}, "passage_id": passage_id}))
        except ValidationError as e:
            dropped += 1
            logger.warning("Dropped question %d of passage '%s': %s", index, passage_id, e.errors()[0]["msg"])
    return items, dropped


def generate_mcqs(
    passage_id: str,
    text: str,
    gateway: Gateway,
    per_passage: int = 5,
    max_tokens: int = 2048,
) -> tuple[list[McqItem], int]:
    """Generate up to per_passage questions from one passage.

    Returns:
        The items and the number of dropped entries; a gateway failure drops the passage.
    """
    prompt = fill_slots(golden_prompt("mcq_generation"), {"{passage}": text})
    try:
        raw = gateway.chat(ChatRequest.build(prompt, max_tokens=max_tokens, profile="mcq_generator"))
    except GatewayError as e:
        logger.warning("Question generation failed for passage '%s': %s", passage_id, e)
        return [], 1
    items, dropped = parse_mcqs(raw, passage_id)
    return items[:per_passage], dropped


def generate_items(passages: Mapping[str, str], gateway: Gateway, per_passage: int = 5) -> tuple[list[McqItem], int]:
    """Generate questions for every passage, in passage id order.

    Returns:
        All items and the total number of dropped entries.
    """
    items: list[McqItem] = []
    dropped = 0
    for passage_id, text in sorted(passages.items()):
        passage_items, passage_dropped = generate_mcqs(passage_id, text, gateway, per_passage)
        items.extend(passage_items)
        dropped += passage_dropped
    return items, dropped


def build_context(condition: Condition, passage_id: str, graph: KnowledgeGraph, passage_text: str | None = None) -> str:
    """Assemble the answering context of one passage.

    Args:
        condition: "none", "passage", or the triple families to list.
        passage_id: Source passage.
        graph: Graph holding the passage's triples.
        passage_text: Passage text; read from the graph when omitted.

    Returns:
        The context block; triples are written one per line as "head relation tail".
    """
    if condition == "none":
        return ""
    if condition == "passage":
        return passage_text if passage_text is not None else graph.passage_text(passage_id)
    triples = graph.triples(*CONDITION_EDGES[condition], provenance=passage_id)
    return "\n".join(f"{head} {relation} {tail}" for head, relation, tail in triples)


def answering_prompt(item: McqItem, context: str) -> str:
    """Fill the answering prompt with a question and its context."""
    slots = {"{contexts}": context, "{question}": item.question}
    slots.update({f"{{options_{index}}}": option for index, option in enumerate(item.options)})
    return fill_slots(golden_prompt("mcq_answering"), slots)


def read_letter(response: str) -> str | None:
    """Return the answered letter, or None when the response does not start with one."""
    found = ANSWER_LETTER.match(response)
    return found.group(1) if found else None


def mcq_protocol(
    passages: Mapping[str, str],
    graph: KnowledgeGraph,
    gateway: Gateway,
    condition: Condition,
    items: Sequence[McqItem] | None = None,
    per_passage: int = 5,
    max_in_flight: int = 8,
    max_tokens: int = 8,
    on_exchange: ExchangeHook | None = None,
) -> McqOutcome:
    """Answer passage questions under one context condition.

    Args:
        passages: Passage id to text.
        graph: Graph built from the passages.
        gateway: Model gateway.
        condition: Context condition.
        items: Pre-generated questions; generated from the passages when None.
        per_passage: Questions kept per passage when generating.
        max_in_flight: Concurrent answering calls.
        max_tokens: Answer budget.
        on_exchange: Receives every answering exchange.

    Returns:
        The outcome; responses not starting with a letter count as wrong.

    Raises:
        UndefinedMetricError: If there is no question to answer.
    """
    dropped = 0
    if items is None:
        items, dropped = generate_items(passages, gateway, per_passage)
    if not items:
        error_message = "No multiple-choice question to answer"
        raise UndefinedMetricError(error_message)

    def answer(item: McqItem) -> str | None:
        context = build_context(condition, item.passage_id, graph, passages.get(item.passage_id))
        request = ChatRequest.build(answering_prompt(item, context), max_tokens=max_tokens, profile="reader")
        try:
            response = gateway.chat(request)
        except GatewayError as e:
            logger.warning("Answering failed for a question of passage '%s': %s", item.passage_id, e)
            response = ""
        if on_exchange is not None:
            on_exchange(Exchange(kind="chat", request=request, response=response))
        return read_letter(response)

    letters = ordered_map(answer, items, max_in_flight)
    correct = sum(letter == item.answer for letter, item in zip(letters, items, strict=True))
    non_letter = sum(letter is None for letter in letters)
    if non_letter:
        logger.info("%d of %d responses did not start with a letter", non_letter, len(items))

    return McqOutcome(
        condition=condition,
        accuracy=correct / len(items),
        total=len(items),
        correct=correct,
        non_letter=non_letter,
        dropped=dropped,
    )
