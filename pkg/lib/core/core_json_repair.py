"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.

Repair of JSON lists produced by language models.

Repairs are applied in a fixed order, and the text is parsed again after
each step, so only the repairs that are needed take effect:

1. strip markdown code fences;
2. keep the substring from the first "[" to the last "]";
3. remove trailing commas before "]" or "}";
4. balance unclosed brackets and strings by appending closers;
5. turn single-quoted strings into double-quoted ones, outside string bodies.

Steps 1 and 2 isolate the answer; a value parsed right after them is "ok".
Any later step marks the result "repaired".
"""
import logging
import re
from typing import Any, Literal

import orjson
from pydantic import BaseModel


logger = logging.getLogger(__name__)

ParseStatus = Literal["ok", "repaired", "failed"]

CODE_FENCE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n?(.*?)```", re.DOTALL)
CLOSERS = {"[": "]", "{": "}"}


class RepairResult(BaseModel):
    """Outcome of repair_json.

    Attributes:
        value: Parsed list (empty when parsing failed).
        status: "ok", "repaired" or "failed".
    """
    value: list[Any]
    status: ParseStatus


def strip_code_fences(text: str) -> str:
    """Return the body of the last markdown code fence, or the text unchanged."""
    bodies = CODE_FENCE.findall(text)
    if bodies:
        return str(bodies[-1])
    # An opening fence without a closing one
    if text.lstrip().startswith("```"):
        return text.lstrip()[3:].split("\n", 1)[-1]
    return text


def isolate_list(text: str) -> str | None:
    """Return the substring from the first "[" to the last "]".

    When no "]" follows the first "[", the tail from "[" is returned so that
    bracket balancing can close it. A lone object is returned as is.

    Returns:
        The isolated candidate, or None when the text has no JSON container.
    """
    start = text.find("[")
    if start >= 0:
        end = text.rfind("]")
        return text[start:end + 1] if end > start else text[start:]

    start = text.find("{")
    if start >= 0:
        end = text.rfind("}")
        return text[start:end + 1] if end > start else text[start:]

    return None


def remove_trailing_commas(text: str) -> str:
    """Drop commas directly followed (modulo whitespace) by "]" or "}", outside strings."""
    out: list[str] = []
    in_string = False
    escaped = False
    length = len(text)

    for index, char in enumerate(text):
        if in_string:
            out.append(char)
            if escaped:
                escaped = False
            elif char == "\\":
                escaped = True
            elif char == '"':
                in_string = False
            continue

        if char == '"':
            in_string = True
        elif char == ",":
            lookahead = index + 1
            while lookahead < length and text[lookahead].isspace():
                lookahead += 1
            if lookahead < length and text[lookahead] in "]}":
                continue
        out.append(char)

    return "".join(out)


def balance_brackets(text: str) -> str:
    """Close an unterminated string and every unclosed bracket.

    Returns:
        The text with closers appended; unchanged when a closer does not match
        its opener (that text cannot be fixed by appending).
    """
    stack: list[str] = []
    in_string = False
    escaped = False

    for char in text:
        if in_string:
            if escaped:
                escaped = False
            elif char == "\\":
                escaped = True
            elif char == '"':
                in_string = False
            continue

        if char == '"':
            in_string = True
        elif char in CLOSERS:
            stack.append(CLOSERS[char])
        elif char in "]}":
            if not stack or stack.pop() != char:
                return text

    if not stack and not in_string:
        return text

    repaired = text + ('"' if in_string else "")
    repaired = repaired.rstrip()
    while repaired.endswith(","):
        repaired = repaired[:-1].rstrip()
    return repaired + "".join(reversed(stack))


def normalize_quotes(text: str) -> str:
    """Convert single-quoted strings to double-quoted ones.

    Apostrophes inside double-quoted strings are left alone; double quotes
    inside a converted string are escaped.
    """
    out: list[str] = []
    mode: str | None = None
    escaped = False

    for char in text:
        if mode is None:
            if char == '"':
                mode = '"'
                out.append(char)
            elif char == "'":
                mode = "'"
                out.append('"')
            else:
                out.append(char)
            continue

        if escaped:
            escaped = False
            if mode == "'" and char == "'":
                # \' is not a JSON escape
                out[-1] = "'"
            else:
                out.append(char)
            continue

        if char == "\\":
            escaped = True
            out.append(char)
        elif char == mode:
            mode = None
            out.append('"')
        elif mode == "'" and char == '"':
            out.append('\\"')
        else:
            out.append(char)

    return "".join(out)


def _loads(text: str) -> tuple[bool, Any]:
    """Try to parse JSON; return (parsed, value)."""
    try:
        return True, orjson.loads(text)
    except orjson.JSONDecodeError:
        return False, None


def repair_json(text: str) -> RepairResult:
    """Parse a JSON list out of model output, repairing it when needed.

    A lone JSON object is wrapped into a one-element list. Never raises.

    Args:
        text: Raw model output (already cut after the answer-start marker).

    Returns:
        The parsed list and its status.
    """
    candidate = isolate_list(strip_code_fences(text))
    if candidate is None:
        return RepairResult(value=[], status="failed")

    status: ParseStatus = "ok"
    parsed, value = _loads(candidate)

    steps = (remove_trailing_commas, balance_brackets, normalize_quotes)
    for step in steps:
        if parsed:
            break
        candidate = step(candidate)
        status = "repaired"
        parsed, value = _loads(candidate)
        if parsed:
            logger.debug("JSON repaired by %s", step.__name__)

    if not parsed:
        return RepairResult(value=[], status="failed")

    if isinstance(value, dict):
        return RepairResult(value=[value], status="repaired")
    if not isinstance(value, list):
        return RepairResult(value=[], status="failed")
    return RepairResult(value=value, status=status)
