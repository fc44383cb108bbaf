"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
from pathlib import Path

import numpy as np
import orjson
import pytest

from lib.core.core_evaluation import (
    FelmRecord,
    MetricReport,
    MmluRecord,
    QaRecord,
    SchemaRecord,
    felm_suite,
    load_records,
    load_subject_mapping,
    mcq_suite,
    mmlu_suite,
    qa_suite,
    schema_suite,
)
from lib.core.core_mcq import McqOutcome
from lib.core.core_schemas_errors import DataFormatError


VOCABULARY = ["company", "organization", "business", "city", "place"]


def one_hot(tokens: list[str]) -> list[np.ndarray]:
    return [np.eye(len(VOCABULARY))[VOCABULARY.index(token)] for token in tokens]


##################################################################################################################
#   RECORDS
##################################################################################################################

def test_load_records(fixtures_dir: Path) -> None:
    records = load_records(fixtures_dir / "qa_predictions.jsonl", QaRecord)

    assert [record.id for record in records] == ["q1", "q2", "q3"]
    assert records[2].retrieved == []


def test_load_records_reports_the_bad_line(tmp_path: Path) -> None:
    path = tmp_path / "qa.jsonl"
    path.write_text('{"id": "q1", "prediction": "x", "answers": ["x"]}\n{"id": "q2", "prediction": "x", "answers": []}\n')

    with pytest.raises(DataFormatError, match="qa.jsonl:2"):
        load_records(path, QaRecord)


def test_load_records_refuses_broken_json(tmp_path: Path) -> None:
    path = tmp_path / "qa.jsonl"
    path.write_text('{"id": "q1", "prediction": \n')

    with pytest.raises(DataFormatError):
        load_records(path, QaRecord)


@pytest.mark.parametrize(
    "payload",
    [
        {"id": "r", "segments": ["a", "b"], "labels": [True]},
        {"id": "r", "segments": ["a"], "labels": [True], "predicted_false": [1]},
    ],
)
def test_felm_record_checks(payload: dict) -> None:
    with pytest.raises(ValueError):
        FelmRecord.model_validate(payload)


##################################################################################################################
#   SUITES
##################################################################################################################

def test_qa_suite_on_the_fixture(fixtures_dir: Path) -> None:
    report = qa_suite(load_records(fixtures_dir / "qa_predictions.jsonl", QaRecord))

    assert report.metrics["em"] == pytest.approx(2 / 3)
    assert report.metrics["f1"] == pytest.approx(8 / 9)
    assert report.metrics["pr@2"] == pytest.approx(0.75)
    assert report.metrics["pr@5"] == pytest.approx(0.75)
    assert report.counts == {"records": 3, "with_supporting": 2}


def test_qa_suite_takes_the_best_gold_answer() -> None:
    report = qa_suite([QaRecord(id="q", prediction="Clayville", answers=["Clay", "clayville"])], ks=())

    assert report.metrics == {"em": 1.0, "f1": 1.0}


def test_qa_suite_without_supporting_ids_skips_pr() -> None:
    report = qa_suite([QaRecord(id="q", prediction="x", answers=["y"])])

    assert "pr@2" not in report.metrics
    assert report.counts["with_supporting"] == 0


def test_qa_suite_needs_records() -> None:
    with pytest.raises(DataFormatError):
        qa_suite([])


def test_felm_suite_on_the_fixture(fixtures_dir: Path) -> None:
    records = load_records(fixtures_dir / "felm.jsonl", FelmRecord)

    report = felm_suite(records)
    summed = felm_suite(records, as_sum=True)

    assert report.metrics["balanced_accuracy"] == pytest.approx(0.625)
    assert report.metrics["f1"] == pytest.approx(4 / 7)
    assert summed.metrics["balanced_accuracy"] == pytest.approx(1.25)
    assert report.counts == {"records": 2, "tp": 3, "fp": 2, "tn": 2, "fn": 1}


def test_schema_suite_on_the_fixture(fixtures_dir: Path) -> None:
    report = schema_suite(load_records(fixtures_dir / "schema.jsonl", SchemaRecord), one_hot)

    assert report.metrics["bs_r"] == pytest.approx(0.5)
    assert report.metrics["bs_c"] == pytest.approx(0.5)
    assert report.counts == {"records": 2}


def test_schema_suite_needs_records() -> None:
    with pytest.raises(DataFormatError):
        schema_suite([], one_hot)


def test_mmlu_suite_groups_by_category(fixtures_dir: Path) -> None:
    report = mmlu_suite(load_records(fixtures_dir / "mmlu.jsonl", MmluRecord))

    assert report.metrics == {
        "accuracy[Formal Logic]": pytest.approx(0.5),
        "accuracy[History]": pytest.approx(1.0),
        "accuracy[Other]": pytest.approx(1.0),
        "accuracy": pytest.approx(0.75),
    }
    assert report.counts == {"records": 4}


def test_subject_mapping_is_bundled() -> None:
    mapping = load_subject_mapping()

    assert mapping["prehistory"] == "History"
    assert "astrology" not in mapping


def test_mmlu_suite_needs_records() -> None:
    with pytest.raises(DataFormatError):
        mmlu_suite([])


def test_mcq_suite_reports_each_condition() -> None:
    outcomes = [
        McqOutcome(condition="none", accuracy=0.25, total=4, correct=1, non_letter=1, dropped=2),
        McqOutcome(condition="passage", accuracy=1.0, total=4, correct=4, non_letter=0, dropped=2),
    ]

    report = mcq_suite(outcomes, dropped=1)

    assert report.metrics == {"accuracy[none]": 0.25, "accuracy[passage]": 1.0}
    assert report.counts == {"questions": 4, "non_letter": 1, "dropped": 3}


##################################################################################################################
#   REPORTS
##################################################################################################################

def test_report_renderings() -> None:
    report = MetricReport(suite="qa", metrics={"em": 0.5}, counts={"records": 2})

    assert orjson.loads(report.to_json()) == {"suite": "qa", "metrics": {"em": 0.5}, "counts": {"records": 2}}
    text = report.to_text()
    assert text.splitlines()[0].split() == ["qa", "value"]
    assert "0.5000" in text
