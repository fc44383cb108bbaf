"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
# ruff: noqa: T201
import argparse
from abc import ABC, abstractmethod
from pathlib import Path

import orjson

from lib.core.core_config import AppConfig
from lib.core.core_gateway import Gateway
from lib.interfaces.terminal.terminal_main import TerminalMain


class Command(ABC):
    """Abstract base class for all KGForge commands.

    Concrete commands delegate the work to TerminalMain and print a short
    outcome on standard output.
    """

    def __init__(self, args: argparse.Namespace, config: AppConfig, gateway: Gateway | None = None) -> None:
        """Initialize command with parsed arguments and configuration.

        Args:
            args: Parsed command line arguments containing user input.
            config: Effective configuration.
            gateway: Gateway to use instead of the configured one.

        Returns:
            None.
        """
        self.args = args
        self.config = config
        self.terminal_main = TerminalMain(args, config, gateway)

    @abstractmethod
    def execute(self) -> None:
        """Execute the command.

        Raises:
            NotImplementedError: If called on abstract base class.
        """


class ExtractCommand(Command):
    """Extract triples from a corpus into a run folder."""

    def execute(self) -> None:
        summary = self.terminal_main.extract(Path(self.args.corpus))
        statuses = ", ".join(
            f"{stage} {counts['ok']}/{counts['repaired']}/{counts['failed']}" for stage, counts in summary.statuses.items()
        )
        print(
            f"Extracted {summary.chunks} chunks of {summary.documents} documents in {summary.batches} batches "
            f"({summary.skipped_batches} already done); ok/repaired/failed: {statuses}"
        )


class BuildGraphCommand(Command):
    """Build the graph from the extraction records of a run folder."""

    def execute(self) -> None:
        summary = self.terminal_main.build_graph()
        print(
            f"Built graph from {summary.records} records: {summary.triples} triples, "
            f"{summary.rejected} rejected, {summary.failed_records} failed records"
        )


class InduceCommand(Command):
    """Induce the concept schema of the built graph."""

    def execute(self) -> None:
        statistics = self.terminal_main.induce()
        for kind, counts in statistics.items():
            print(f"{kind}: {counts['types']} concepts for {counts['elements']} elements ({counts['fallbacks']} fallbacks)")


class IndexCommand(Command):
    """Build the node, edge and passage vector indexes."""

    def execute(self) -> None:
        counts = self.terminal_main.index()
        print("Indexed " + ", ".join(f"{count} {name}" for name, count in counts.items()))


class RetrieveCommand(Command):
    """Answer questions with one of the retrievers."""

    def execute(self) -> None:
        results = self.terminal_main.retrieve()
        if self.args.output:
            print(f"Wrote {len(results)} results to {self.args.output}")
            return
        for result in results:
            print(result.to_json().decode())


class EvalCommand(Command):
    """Compute an evaluation suite."""

    def execute(self) -> None:
        report = self.terminal_main.evaluate()
        print(report.to_json().decode() if self.args.json else report.to_text())


class StatsCommand(Command):
    """Print graph statistics of a run folder."""

    def execute(self) -> None:
        print(self.terminal_main.stats())


class ConfigCommand(Command):
    """Print the effective configuration and its hash."""

    def execute(self) -> None:
        print(self.terminal_main.show_config().decode())


def version_payload(version: str, graph_format: int, index_format: int) -> str:
    """Return the machine-readable version line."""
    payload = {"name": "kgforge", "version": version, "graph_format": graph_format, "index_format": index_format}
    return orjson.dumps(payload, option=orjson.OPT_SORT_KEYS).decode()
