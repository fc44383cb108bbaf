"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
# ruff: noqa: T201
import argparse
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, NoReturn

from dotenv import load_dotenv
from pydantic import ValidationError

from lib.core import GRAPH_FORMAT_VERSION, INDEX_FORMAT_VERSION, __version__
from lib.core.core_config import PPR_PRESETS, AppConfig, flatten_validation_error, load_config
from lib.core.core_gateway import Gateway
from lib.core.core_graph import GRAPH_VIEWS
from lib.core.core_mcq import CONDITIONS
from lib.core.core_retrieval import METHODS
from lib.core.core_schemas_errors import ConfigError, ValidationErrors
from lib.interfaces.terminal.terminal_commands import (
    BuildGraphCommand,
    Command,
    ConfigCommand,
    EvalCommand,
    ExtractCommand,
    IndexCommand,
    InduceCommand,
    RetrieveCommand,
    StatsCommand,
    version_payload,
)
from lib.interfaces.terminal.terminal_errors import (
    EXIT_SUCCESS,
    EXIT_USAGE_ERROR,
    EXIT_USER_INTERRUPT,
    ConfigurationError,
    InvalidArgumentError,
    TerminalError,
)
from lib.interfaces.terminal.terminal_logger import configure_logging, extract_validation_errors
from lib.utils import check_python_version


SUITES = ("qa", "felm", "mcq", "schema", "mmlu")

# Command line flags overriding config values: dest -> path in the config
CONFIG_FLAGS: dict[str, tuple[str, ...]] = {
    "gateway_url": ("gateway", "base_url"),
    "max_in_flight": ("runtime", "max_in_flight"),
    "slices": ("induce", "s_total"),
    "slice": ("induce", "s_slice"),
    "sample": ("induce", "n_sample"),
    "n_ctx": ("induce", "n_ctx"),
    "graph_view": ("retrieve", "graph_view"),
    "top_n": ("retrieve", "tog", "top_n"),
    "depth": ("retrieve", "tog", "d_max"),
    "initial_nodes": ("retrieve", "tog", "k"),
    "top_n_edges": ("retrieve", "ppr", "top_n_edges"),
    "weight_adjust": ("retrieve", "ppr", "weight_adjust"),
    "damping": ("retrieve", "ppr", "damping"),
    "top_k_passages": ("retrieve", "ppr", "top_k_passages"),
    "source_nodes": ("retrieve", "large", "number_of_source_nodes"),
    "sampling_area": ("retrieve", "large", "sampling_area"),
    "restart": ("retrieve", "large", "restart"),
    "top_n_passages": ("retrieve", "large", "top_n"),
}


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser reporting usage errors as terminal errors instead of exiting."""

    def error(self, message: str) -> NoReturn:
        raise InvalidArgumentError(message)


class TerminalApp:
    """Main application class for the KGForge terminal interface.

    Parses arguments, resolves the effective configuration, dispatches to the
    subcommand and maps failures to exit codes.
    """

    def __init__(self, gateway: Gateway | None = None) -> None:
        """Initialize the command registry.

        Args:
            gateway: Gateway handed to every command instead of the configured one.
        """
        self.gateway = gateway
        self.commands: dict[str, type[Command]] = {
            "extract": ExtractCommand,
            "build-graph": BuildGraphCommand,
            "induce": InduceCommand,
            "index": IndexCommand,
            "retrieve": RetrieveCommand,
            "eval": EvalCommand,
            "stats": StatsCommand,
            "config": ConfigCommand,
        }

    def run(self, argv: Sequence[str] | None = None) -> int:
        """Run the application.

        Returns:
            Integer exit code: 0 on success, 1 on usage or configuration
            errors, 2 on gateway failures, 3 on malformed data, 130 when
            cancelled by the user.
        """
        try:
            check_python_version()
            args = self._parse_args(argv)
            if args.version:
                print(version_payload(__version__, GRAPH_FORMAT_VERSION, INDEX_FORMAT_VERSION))
                return EXIT_SUCCESS
            self._validate_args(args)
            configure_logging(args.verbose)

            config = self._effective_config(args)
            command = self.commands[args.command](args, config, self.gateway)
            command.execute()

        except KeyboardInterrupt:
            print("\nOperation cancelled by user", file=sys.stderr)
            return EXIT_USER_INTERRUPT
        except SystemExit as exit_request:
            # --help
            return int(exit_request.code or 0)
        except TerminalError as error:
            print(f"Error: {error}", file=sys.stderr)
            return error.exit_code
        except Exception as error:
            print(f"Unexpected error: {error}", file=sys.stderr)
            return EXIT_USAGE_ERROR
        else:
            return EXIT_SUCCESS

    ##################################################################################################################
    #   PRIVATE METHODS
    ##################################################################################################################

    def _parse_args(self, argv: Sequence[str] | None) -> argparse.Namespace:
        """Parse command line arguments."""
        parser = ArgumentParser(
            prog="kgforge",
            description="Build knowledge graphs from text corpora, retrieve over them and evaluate",
            epilog="Examples:\n"
                "  kgforge --mock extract data/fixtures/corpus.jsonl --run runs/demo\n"
                "  kgforge --mock build-graph --run runs/demo\n"
                "  kgforge --mock induce --run runs/demo\n"
                "  kgforge --mock index --run runs/demo\n"
                "  kgforge --mock retrieve --run runs/demo --method ppr -q 'Who founded AcmeCorp?'\n"
                "  kgforge eval qa --input data/fixtures/qa_predictions.jsonl\n",
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        parser.add_argument("--config", type=Path, help="YAML configuration file.")
        parser.add_argument("--seed", type=int, help="Run seed (runtime, induction sampling and mock embeddings).")
        parser.add_argument("--gateway-url", help="OpenAI-compatible endpoint root.")
        parser.add_argument("--max-in-flight", type=int, help="Maximum concurrent gateway requests.")
        parser.add_argument("--mock", action="store_true", help="Use the deterministic offline gateway.")
        parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logs.")
        parser.add_argument("--version", action="store_true", help="Print version information as JSON.")

        subparsers = parser.add_subparsers(dest="command", metavar="command")

        extract = subparsers.add_parser("extract", help="Extract triples from a JSON-lines corpus.")
        extract.add_argument("corpus", help="Corpus file, one {id, text, metadata} object per line.")
        self._add_run(extract)

        self._add_run(subparsers.add_parser("build-graph", help="Build the graph from extraction records."))

        induce = subparsers.add_parser("induce", help="Induce concepts for graph elements.")
        self._add_run(induce)
        induce.add_argument("--slices", type=int, help="Number of slices the elements are split into.")
        induce.add_argument("--slice", type=int, help="Slice processed by this run (0-based).")
        induce.add_argument("--sample", type=int, help="Process only this many sampled batches.")
        induce.add_argument("--n-ctx", type=int, help="Neighbors sampled as entity context.")

        self._add_run(subparsers.add_parser("index", help="Embed nodes, edges and passages."))

        retrieve = subparsers.add_parser("retrieve", help="Answer questions over the graph.")
        self._add_run(retrieve)
        retrieve.add_argument("--method", choices=METHODS, default="ppr", help="Retriever.")
        questions = retrieve.add_mutually_exclusive_group(required=True)
        questions.add_argument("-q", "--question", help="A single question.")
        questions.add_argument("--questions", help="JSON-lines file of {question} objects.")
        retrieve.add_argument("--output", help="Write JSON-lines results to this file.")
        retrieve.add_argument("--no-answer", action="store_true", help="Skip answer generation (ppr, large).")
        retrieve.add_argument("--graph-view", choices=GRAPH_VIEWS, help="Part of the graph to retrieve over.")
        retrieve.add_argument("--preset", choices=sorted(PPR_PRESETS), help="Passage retriever preset.")
        retrieve.add_argument("--top-n", type=int, help="tog: paths kept per round.")
        retrieve.add_argument("--depth", type=int, help="tog: maximum search depth.")
        retrieve.add_argument("--initial-nodes", type=int, help="tog: initial nodes.")
        retrieve.add_argument("--top-n-edges", type=int, help="ppr: edges sent to the filter.")
        retrieve.add_argument("--weight-adjust", type=float, help="ppr: passage similarity weight.")
        retrieve.add_argument("--damping", type=float, help="ppr: PageRank damping.")
        retrieve.add_argument("--top-k-passages", type=int, help="ppr: passages returned.")
        retrieve.add_argument("--source-nodes", type=int, help="large: seed nodes.")
        retrieve.add_argument("--sampling-area", type=int, help="large: sampled node budget.")
        retrieve.add_argument("--restart", type=float, help="large: restart probability of the walk.")
        retrieve.add_argument("--top-n-passages", type=int, help="large: passages returned.")

        evaluate = subparsers.add_parser("eval", help="Compute an evaluation suite.")
        evaluate.add_argument("suite", choices=SUITES, help="Metric suite.")
        evaluate.add_argument("--input", help="JSON-lines records (for mcq: optional pre-generated questions).")
        evaluate.add_argument("--run", help="Run folder (mcq only).")
        evaluate.add_argument("--conditions", nargs="+", choices=CONDITIONS, help="mcq: context conditions.")
        evaluate.add_argument("--transcript", help="mcq: write the answering exchanges to this JSON-lines file.")
        evaluate.add_argument("--json", action="store_true", help="Print the report as JSON.")

        self._add_run(subparsers.add_parser("stats", help="Print graph statistics."))
        subparsers.add_parser("config", help="Print the effective configuration and its hash.")

        return parser.parse_args(argv)

    @staticmethod
    def _add_run(parser: argparse.ArgumentParser) -> None:
        """Add the required --run option to a subcommand parser."""
        parser.add_argument("--run", required=True, help="Run folder.")

    def _validate_args(self, args: argparse.Namespace) -> None:
        """Check argument combinations argparse cannot express.

        Raises:
            InvalidArgumentError: If arguments fail validation checks.
        """
        if args.command is None:
            error_message = "A command is required (see --help)"
            raise InvalidArgumentError(error_message)
        if args.command == "eval" and args.suite == "mcq" and not args.run:
            error_message = "The mcq suite needs --run"
            raise InvalidArgumentError(error_message)

    def _effective_config(self, args: argparse.Namespace) -> AppConfig:
        """Load the config file and environment, then apply command line overrides.

        Raises:
            ConfigurationError: If the resulting configuration is invalid.
        """
        try:
            config = load_config(args.config)
        except ValidationErrors as error:
            raise ConfigurationError(extract_validation_errors(error)) from error
        except ConfigError as error:
            raise ConfigurationError(str(error)) from error

        data: dict[str, Any] = config.model_dump()
        if args.mock:
            data["gateway"]["mock"] = True
        if args.seed is not None:
            data["runtime"]["seed"] = args.seed
            data["induce"]["rng_seed"] = args.seed
            data["gateway"]["mock_seed"] = args.seed
        for dest, path in CONFIG_FLAGS.items():
            value = getattr(args, dest, None)
            if value is None:
                continue
            section = data
            for key in path[:-1]:
                section = section[key]
            section[path[-1]] = value

        try:
            return AppConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(extract_validation_errors(flatten_validation_error(e))) from e


def main() -> int:
    """Entry point of the kgforge console script.

    Returns:
        Integer exit code from application execution.
    """
    load_dotenv()
    app = TerminalApp()
    return app.run()


if __name__ == "__main__":
    sys.exit(main())
