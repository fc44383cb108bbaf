"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
import logging
from collections.abc import Iterable, Sequence
from functools import cache
from importlib import resources
from pathlib import Path
from typing import Any, Self

import numpy as np
import orjson
import pandas as pd
import yaml
from pydantic import BaseModel, Field, ValidationError, model_validator

from lib.core.core_mcq import McqOutcome
from lib.core.core_metrics import (
    ConfusionCounts,
    Embedder,
    TokenVectors,
    balanced_accuracy,
    bs_coverage,
    bs_recall,
    exact_match,
    felm_f1,
    pr_at_k,
    token_f1,
)
from lib.core.core_schemas import LineError
from lib.core.core_schemas_errors import DataFormatError
from lib.core.core_utils import read_jsonl


logger = logging.getLogger(__name__)


class MetricReport(BaseModel):
    """Named metric values of one suite.

    Attributes:
        suite: Suite name.
        metrics: Metric name to value.
        counts: Record counts behind the metrics.
    """
    suite: str
    metrics: dict[str, float]
    counts: dict[str, int] = Field(default_factory=dict)

    def to_json(self) -> bytes:
        return orjson.dumps(self.model_dump(), option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2)

    def to_text(self) -> str:
        """Render metrics then counts as two aligned columns."""
        rows = [(name, f"{value:.4f}") for name, value in self.metrics.items()]
        rows += [(name, str(value)) for name, value in self.counts.items()]
        frame = pd.DataFrame(rows, columns=[self.suite, "value"])
        return frame.to_string(index=False, justify="left")


##################################################################################################################
#   INPUT RECORDS
##################################################################################################################

class QaRecord(BaseModel):
    """One answered question."""
    id: str
    prediction: str
    answers: list[str] = Field(min_length=1)
    retrieved: list[str] = Field(default_factory=list)
    supporting: list[str] = Field(default_factory=list)


class FelmRecord(BaseModel):
    """A response split into segments, each labelled true or false.

    Attributes:
        segments: Segment texts.
        labels: Ground truth, True for a factually correct segment.
        predicted_false: Indices of the segments the judge flagged as false.
    """
    id: str
    segments: list[str]
    labels: list[bool]
    predicted_false: list[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_lengths(self) -> Self:
        if len(self.segments) != len(self.labels):
            error_message = "segments and labels must have the same length"
            raise ValueError(error_message)
        if any(index < 0 or index >= len(self.segments) for index in self.predicted_false):
            error_message = "predicted_false names a segment that does not exist"
            raise ValueError(error_message)
        return self

    def confusion(self) -> ConfusionCounts:
        flagged = set(self.predicted_false)
        return ConfusionCounts.from_labels(self.labels, [index not in flagged for index in range(len(self.labels))])


class SchemaRecord(BaseModel):
    """Ground-truth types and induced phrases of one instance."""
    id: str
    truth: list[str] = Field(min_length=1)
    induced: list[str] = Field(min_length=1)


class MmluRecord(BaseModel):
    """One answered MMLU question."""
    subject: str
    correct: bool


def load_records[M: BaseModel](path: Path, model: type[M]) -> list[M]:
    """Read a JSON-lines file of evaluation records.

    Raises:
        DataFormatError: On the first line that is not valid JSON or does not match the record model.
    """
    records: list[M] = []
    for item in read_jsonl(path):
        if isinstance(item, LineError):
            raise DataFormatError(str(item))
        line_no, value = item
        try:
            records.append(model.model_validate(value))
        except ValidationError as e:
            error_message = f"{path}:{line_no}: {e.errors()[0]['msg']}"
            raise DataFormatError(error_message) from e
    return records


##################################################################################################################
#   SUITES
##################################################################################################################

def qa_suite(records: Sequence[QaRecord], ks: Iterable[int] = (2, 5)) -> MetricReport:
    """Exact match and F1 (best over gold answers), plus PR@k.

    PR@k averages only over records that list supporting ids.

    Raises:
        DataFormatError: If there is no record.
    """
    if not records:
        error_message = "The QA suite needs at least one record"
        raise DataFormatError(error_message)

    metrics = {
        "em": float(np.mean([max(exact_match(record.prediction, gold) for gold in record.answers) for record in records])),
        "f1": float(np.mean([max(token_f1(record.prediction, gold) for gold in record.answers) for record in records])),
    }
    with_support = [record for record in records if record.supporting]
    for k in ks:
        if with_support:
            metrics[f"pr@{k}"] = float(np.mean([pr_at_k(record.retrieved, record.supporting, k) for record in with_support]))
    return MetricReport(suite="qa", metrics=metrics, counts={"records": len(records), "with_supporting": len(with_support)})


def felm_suite(records: Sequence[FelmRecord], as_sum: bool = False) -> MetricReport:
    """Balanced accuracy and false-segment F1 over all segments."""
    total = ConfusionCounts()
    for record in records:
        counts = record.confusion()
        total = ConfusionCounts(tp=total.tp + counts.tp, fp=total.fp + counts.fp, tn=total.tn + counts.tn, fn=total.fn + counts.fn)
    return MetricReport(
        suite="felm",
        metrics={"balanced_accuracy": balanced_accuracy(total, as_sum), "f1": felm_f1(total)},
        counts={"records": len(records), **total.model_dump()},
    )


def schema_suite(records: Sequence[SchemaRecord], embedder: Embedder) -> MetricReport:
    """Mean per-instance BS-R and BS-C over the whole set."""
    if not records:
        error_message = "The schema suite needs at least one record"
        raise DataFormatError(error_message)
    vectors = TokenVectors(embedder)
    recalls = [bs_recall(record.truth, record.induced, vectors) for record in records]
    coverage = bs_coverage([record.truth for record in records], [record.induced for record in records], vectors)
    return MetricReport(suite="schema", metrics={"bs_r": float(np.mean(recalls)), "bs_c": coverage}, counts={"records": len(records)})


def mcq_suite(outcomes: Sequence[McqOutcome], dropped: int = 0) -> MetricReport:
    """Accuracy per context condition.

    Args:
        outcomes: One outcome per condition, all over the same questions.
        dropped: Generated entries dropped before answering, when not already in the outcomes.
    """
    return MetricReport(
        suite="mcq",
        metrics={f"accuracy[{outcome.condition}]": outcome.accuracy for outcome in outcomes},
        counts={
            "questions": max((outcome.total for outcome in outcomes), default=0),
            "non_letter": sum(outcome.non_letter for outcome in outcomes),
            "dropped": dropped + max((outcome.dropped for outcome in outcomes), default=0),
        },
    )


@cache
def load_subject_mapping() -> dict[str, str]:
    """Return the MMLU subject to category mapping shipped with the package."""
    resource = resources.files("lib.core") / "templates" / "config" / "mmlu_subjects.yaml"
    categories: dict[str, list[str]] = yaml.safe_load(resource.read_text(encoding="utf-8"))
    return {subject: category for category, subjects in categories.items() for subject in subjects}


def mmlu_suite(records: Sequence[MmluRecord]) -> MetricReport:
    """Accuracy per subject category; unmapped subjects fall under "Other"."""
    mapping = load_subject_mapping()
    frame = pd.DataFrame(
        {"category": [mapping.get(record.subject, "Other") for record in records], "correct": [record.correct for record in records]},
    )
    if frame.empty:
        error_message = "The MMLU suite needs at least one record"
        raise DataFormatError(error_message)
    by_category = frame.groupby("category")["correct"].agg(["mean", "size"]).sort_index()
    metrics: dict[str, Any] = {f"accuracy[{category}]": float(row["mean"]) for category, row in by_category.iterrows()}
    metrics["accuracy"] = float(frame["correct"].mean())
    return MetricReport(suite="mmlu", metrics=metrics, counts={"records": len(frame)})
