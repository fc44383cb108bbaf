"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
import argparse
import hashlib
import logging
from pathlib import Path
from typing import Any

import orjson
from pydantic import BaseModel, Field, ValidationError

from lib.core.core_config import AppConfig, PPRConfig, apply_ppr_preset
from lib.core.core_evaluation import (
    FelmRecord,
    MetricReport,
    MmluRecord,
    QaRecord,
    SchemaRecord,
    felm_suite,
    load_records,
    mcq_suite,
    mmlu_suite,
    qa_suite,
    schema_suite,
)
from lib.core.core_extraction import (
    BuildSummary,
    ExtractionSummary,
    load_batches,
    read_corpus,
    run_extraction,
    triples_to_graph,
)
from lib.core.core_gateway import ChatRequest, Exchange, Gateway, make_gateway
from lib.core.core_graph import KnowledgeGraph
from lib.core.core_graph_io import load_graph, save_graph
from lib.core.core_induction import concept_statistics, induce_schema, read_concept_csv, write_concept_csv
from lib.core.core_mcq import McqItem, generate_items, mcq_protocol
from lib.core.core_retrieval import RetrievalIndexes, RetrievalResult, retrieve
from lib.core.core_schemas import Document, LineError
from lib.core.core_schemas_errors import ConfigError, DataFormatError
from lib.core.core_utils import atomic_write_bytes, read_jsonl, write_jsonl
from lib.core.core_vector_index import VectorIndex, edge_index, node_index, passage_index
from lib.interfaces.terminal.terminal_errors import InvalidArgumentError, RunFolderError
from lib.interfaces.terminal.terminal_logger import logger_decorator


logger = logging.getLogger(__name__)

STAGE_ORDER = ("extract", "build", "induce", "index")

# Config sections whose values shape the run artifacts
ARTIFACT_SECTIONS = {"extract", "induce", "gateway"}

MANIFEST_NAME = "manifest.json"
BATCHES_DIR = "batches"
BASE_GRAPH_NAME = "graph_base.kgfg"
GRAPH_NAME = "graph.kgfg"
CONCEPTS_NAME = "concepts.csv"
INDEX_DIR = "index"
INDEX_NAMES = {"nodes": "nodes.kgfv", "edges": "edges.kgfv", "passages": "passages.kgfv"}


class RunManifest(BaseModel):
    """Progress record of a run folder.

    Attributes:
        run_id: Identifier derived from the config hash.
        config_hash: Hash of the artifact-shaping config sections.
        stages: Completion flag per pipeline stage.
        completed_batches: Extraction batches already written.
        files: Relative path to sha256 of every artifact of the folder.
    """
    run_id: str
    config_hash: str
    stages: dict[str, bool] = Field(default_factory=lambda: dict.fromkeys(STAGE_ORDER, False))
    completed_batches: list[int] = Field(default_factory=list)
    files: dict[str, str] = Field(default_factory=dict)

    @classmethod
    def open(cls, run_dir: Path, config_hash: str) -> "RunManifest":
        """Load the manifest of a run folder, or start a new one.

        Raises:
            - DataFormatError: If the manifest file is corrupt.
            - ConfigError: If the configuration changed since the run started.
        """
        path = run_dir / MANIFEST_NAME
        if not path.exists():
            return cls(run_id=config_hash[:12], config_hash=config_hash)

        try:
            manifest = cls.model_validate_json(path.read_bytes())
        except ValidationError as e:
            error_message = f"{path} is not a valid run manifest"
            raise DataFormatError(error_message) from e

        if manifest.config_hash != config_hash:
            error_message = (
                f"The configuration changed since run {manifest.run_id} started "
                f"(hash {manifest.config_hash[:12]} != {config_hash[:12]}); use a new run folder"
            )
            raise ConfigError(error_message)
        return manifest

    def require(self, stage: str) -> None:
        """Check that every stage before `stage` is complete.

        Raises:
            RunFolderError: Naming the first missing stage.
        """
        for previous in STAGE_ORDER[:STAGE_ORDER.index(stage)]:
            if not self.stages.get(previous):
                error_message = f"Stage '{stage}' needs stage '{previous}' to be completed first"
                raise RunFolderError(error_message)

    def complete(self, stage: str) -> None:
        """Mark a stage complete and every later stage stale."""
        self.stages[stage] = True
        for later in STAGE_ORDER[STAGE_ORDER.index(stage) + 1:]:
            self.stages[later] = False

    def save(self, run_dir: Path) -> None:
        """Refresh the file inventory and write the manifest."""
        self.files = {
            path.relative_to(run_dir).as_posix(): hashlib.sha256(path.read_bytes()).hexdigest()
            for path in sorted(run_dir.rglob("*"))
            if path.is_file() and path.name != MANIFEST_NAME and not path.name.endswith(".tmp")
        }
        atomic_write_bytes(run_dir / MANIFEST_NAME, orjson.dumps(self.model_dump(), option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2))


class TerminalMain:
    """Runs the pipeline stages, retrieval and evaluation on a run folder."""

    def __init__(self, args: argparse.Namespace, config: AppConfig, gateway: Gateway | None = None) -> None:
        """Initialize with parsed arguments and the effective configuration.

        Args:
            args: Parsed command line arguments; `run` names the run folder when the command needs one.
            config: Effective configuration.
            gateway: Gateway to use instead of the configured one.
        """
        self.args = args
        self.config = config
        self.run_dir = Path(args.run) if getattr(args, "run", None) else None
        self._gateway = gateway

    @property
    def gateway(self) -> Gateway:
        """Return the model gateway, built on first use."""
        if self._gateway is None:
            self._gateway = make_gateway(self.config.gateway)
        return self._gateway

    ##################################################################################################################
    #   PIPELINE STAGES
    ##################################################################################################################

    @logger_decorator
    def extract(self, corpus_path: Path) -> ExtractionSummary:
        """Run triple extraction over a corpus into the run folder.

        Batches recorded in the manifest are not processed again.
        """
        if not corpus_path.is_file():
            error_message = f"Corpus file not found: {corpus_path}"
            raise InvalidArgumentError(error_message)

        run_dir, manifest = self._open_run()
        completed = set(manifest.completed_batches)

        def on_batch_done(batch_idx: int) -> None:
            manifest.completed_batches = sorted({*manifest.completed_batches, batch_idx})
            manifest.save(run_dir)

        summary = run_extraction(
            self._documents(corpus_path),
            self.config.extract,
            self.gateway,
            run_dir / BATCHES_DIR,
            max_in_flight=self.config.runtime.max_in_flight,
            completed=completed,
            on_batch_done=on_batch_done,
        )
        if summary.batches > summary.skipped_batches or not manifest.stages["extract"]:
            manifest.complete("extract")
        manifest.save(run_dir)
        return summary

    @logger_decorator
    def build_graph(self) -> BuildSummary:
        """Build the graph from the extraction records of the run folder."""
        run_dir, manifest = self._open_run()
        manifest.require("build")

        graph, summary = triples_to_graph(load_batches(run_dir / BATCHES_DIR), ev_orientation=self.config.extract.ev_orientation)
        save_graph(graph, run_dir / BASE_GRAPH_NAME)
        manifest.complete("build")
        manifest.save(run_dir)
        return summary

    @logger_decorator
    def induce(self) -> dict[str, Any]:
        """Induce the concept schema of the built graph.

        Returns:
            Concept counters per element kind.
        """
        run_dir, manifest = self._open_run()
        manifest.require("induce")

        graph = load_graph(run_dir / BASE_GRAPH_NAME)
        graph, records = induce_schema(
            graph,
            self.config.induce,
            self.gateway,
            out_dir=run_dir,
            max_in_flight=self.config.runtime.max_in_flight,
        )
        write_concept_csv(records, run_dir / CONCEPTS_NAME)
        save_graph(graph, run_dir / GRAPH_NAME)

        violations = graph.check_definition()
        if violations:
            logger.warning("The induced graph has %d schema violations, first: %s", len(violations), violations[0])
        manifest.complete("induce")
        manifest.save(run_dir)
        return concept_statistics(records)

    @logger_decorator
    def index(self) -> dict[str, int]:
        """Embed nodes, edges and passages of the induced graph.

        Returns:
            Item count per index.
        """
        run_dir, manifest = self._open_run()
        manifest.require("index")

        graph = load_graph(run_dir / GRAPH_NAME)
        builders = {"nodes": node_index, "edges": edge_index, "passages": passage_index}
        counts = {}
        for name, builder in builders.items():
            built = builder(graph, self.gateway)
            built.save(run_dir / INDEX_DIR / INDEX_NAMES[name])
            counts[name] = len(built)
        manifest.complete("index")
        manifest.save(run_dir)
        return counts

    ##################################################################################################################
    #   QUERIES
    ##################################################################################################################

    @logger_decorator
    def retrieve(self) -> list[RetrievalResult]:
        """Answer the question(s) of the command line and write JSON lines.

        Results go to --output when given, else they are only returned.
        """
        graph, indexes = self._load_retrieval_inputs()
        config = self.config.retrieve.model_copy(update={"ppr": self._ppr_config()})

        results = [
            retrieve(
                question,
                self.args.method,
                graph,
                indexes,
                config,
                self.gateway,
                seed=self.config.runtime.seed,
                generate=not self.args.no_answer,
                max_in_flight=self.config.runtime.max_in_flight,
            )
            for question in self._questions()
        ]
        if self.args.output:
            atomic_write_bytes(Path(self.args.output), b"".join(result.to_json() + b"\n" for result in results))
        return results

    @logger_decorator
    def evaluate(self) -> MetricReport:
        """Compute one metric suite over an input file."""
        suite = self.args.suite
        input_path = Path(self.args.input) if self.args.input else None
        if suite != "mcq" and input_path is None:
            error_message = f"The {suite} suite needs --input"
            raise InvalidArgumentError(error_message)

        match suite:
            case "qa":
                return qa_suite(load_records(input_path, QaRecord), self.config.evaluate.pr_ks)
            case "felm":
                return felm_suite(load_records(input_path, FelmRecord), self.config.evaluate.balanced_accuracy_sum)
            case "schema":
                return schema_suite(load_records(input_path, SchemaRecord), self.gateway.embed)
            case "mmlu":
                return mmlu_suite(load_records(input_path, MmluRecord))
            case _:
                return self._mcq_report(input_path)

    @logger_decorator
    def stats(self) -> str:
        """Render the statistics of the run graph and its concepts."""
        graph = self._load_graph()
        lines = [graph.stats_report()]
        concepts = self._require_run() / CONCEPTS_NAME
        if concepts.exists():
            for kind, counts in concept_statistics(read_concept_csv(concepts)).items():
                lines.append(f"{kind} concepts: {counts['types']} types over {counts['elements']} elements ({counts['fallbacks']} fallbacks)")
        violations = graph.check_definition(require_schema=bool(graph.phi))
        lines.append(f"Structure check: {'ok' if not violations else f'{len(violations)} violations'}")
        return "\n".join(lines)

    def show_config(self) -> bytes:
        """Return the effective configuration and its hash as JSON."""
        payload = {"config": self.config.model_dump(mode="json", exclude={"gateway": {"api_key"}}), "config_hash": self.config.config_hash()}
        return orjson.dumps(payload, option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2)

    ##################################################################################################################
    #   PRIVATE METHODS
    ##################################################################################################################

    def _require_run(self) -> Path:
        """Return the run folder named by --run.

        Returns:
            Path of the run folder.

        Raises:
            InvalidArgumentError: If the command was given no run folder.
        """
        if self.run_dir is None:
            error_message = "This command needs a run folder (--run)"
            raise InvalidArgumentError(error_message)
        return self.run_dir

    def _open_run(self) -> tuple[Path, RunManifest]:
        """Create the run folder if needed and open its manifest.

        The manifest is checked against the hash of the artifact-shaping config
        sections, so a run never mixes artifacts of two configurations.

        Returns:
            The run folder and its manifest.

        Raises:
            - InvalidArgumentError: If the command was given no run folder.
            - ConfigError: If the configuration changed since the run started.
            - DataFormatError: If the manifest file is corrupt.
        """
        run_dir = self._require_run()
        run_dir.mkdir(parents=True, exist_ok=True)
        return run_dir, RunManifest.open(run_dir, self.config.config_hash(ARTIFACT_SECTIONS))

    def _documents(self, corpus_path: Path) -> list[Document]:
        """Read the corpus, logging and skipping lines that do not parse.

        Args:
            corpus_path: JSON-lines corpus file.

        Returns:
            Documents in file order.
        """
        documents = []
        for item in read_corpus(corpus_path):
            if isinstance(item, LineError):
                logger.warning("Skipping corpus line: %s", item)
                continue
            documents.append(item)
        return documents

    def _load_graph(self) -> KnowledgeGraph:
        """Load the induced graph of the run, or the base graph when induction has not run.

        Returns:
            The frozen graph.

        Raises:
            RunFolderError: If no graph file exists yet.
        """
        run_dir = self._require_run()
        for name in (GRAPH_NAME, BASE_GRAPH_NAME):
            if (run_dir / name).exists():
                return load_graph(run_dir / name).freeze()
        error_message = f"No graph in {run_dir}; run build-graph first"
        raise RunFolderError(error_message)

    def _load_retrieval_inputs(self) -> tuple[KnowledgeGraph, RetrievalIndexes]:
        """Load the graph and the three vector indexes of the run.

        Raises:
            RunFolderError: If the index stage has not run.
        """
        run_dir = self._require_run()
        index_dir = run_dir / INDEX_DIR
        if not index_dir.is_dir():
            error_message = f"No index in {run_dir}; run index first"
            raise RunFolderError(error_message)
        indexes = RetrievalIndexes(**{name: VectorIndex.load(index_dir / filename) for name, filename in INDEX_NAMES.items()})
        return self._load_graph(), indexes

    def _ppr_config(self) -> PPRConfig:
        """Return the passage retriever settings with the --preset applied."""
        ppr = self.config.retrieve.ppr
        if getattr(self.args, "preset", None):
            ppr = apply_ppr_preset(ppr, self.args.preset)
        return ppr

    def _questions(self) -> list[str]:
        """Collect the questions to answer.

        A single -q question wins; otherwise every line of the --questions file
        must be an object with a "question" string.

        Returns:
            Questions in input order.

        Raises:
            DataFormatError: If a line of the questions file is malformed.
        """
        if self.args.question:
            return [self.args.question]
        questions = []
        for item in read_jsonl(Path(self.args.questions)):
            if isinstance(item, LineError):
                raise DataFormatError(str(item))
            line_no, value = item
            if not isinstance(value, dict) or not isinstance(value.get("question"), str):
                error_message = f"{self.args.questions}:{line_no}: expected an object with a 'question' string"
                raise DataFormatError(error_message)
            questions.append(value["question"])
        return questions

    def _mcq_report(self, input_path: Path | None) -> MetricReport:
        """Run the multiple-choice protocol over the run's passages.

        Args:
            input_path: Pre-generated questions; generated from the passages when None.

        Returns:
            Accuracy per requested context condition.
        """
        graph = self._load_graph()
        dropped = 0
        if input_path is not None:
            items = load_records(input_path, McqItem)
        else:
            items, dropped = generate_items(graph.passages, self.gateway, self.config.evaluate.mcq_per_passage)
        conditions = self.args.conditions or self.config.evaluate.mcq_conditions

        exchanges: list[Exchange] = []
        outcomes = [
            mcq_protocol(
                graph.passages,
                graph,
                self.gateway,
                condition,
                items=items,
                max_in_flight=self.config.runtime.max_in_flight,
                on_exchange=exchanges.append if self.args.transcript else None,
            )
            for condition in conditions
        ]
        if self.args.transcript:
            write_jsonl(Path(self.args.transcript), [exchange.model_dump(mode="json") for exchange in sorted(exchanges, key=_exchange_order)])
        return mcq_suite(outcomes, dropped)


def _exchange_order(exchange: Exchange) -> str:
    """Order transcript entries independently of thread completion order."""
    return exchange.request.digest() if isinstance(exchange.request, ChatRequest) else ""
