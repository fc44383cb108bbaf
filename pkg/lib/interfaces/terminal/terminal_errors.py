"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
# Exit codes
EXIT_SUCCESS: int = 0
EXIT_USAGE_ERROR: int = 1
EXIT_UPSTREAM_ERROR: int = 2
EXIT_DATA_ERROR: int = 3
EXIT_USER_INTERRUPT: int = 130


class TerminalError(Exception):
    """Base exception class for terminal errors.

    Every terminal error carries the process exit code it maps to.
    """
    exit_code: int = EXIT_USAGE_ERROR


class InvalidArgumentError(TerminalError):
    """Exception raised when command-line arguments are invalid or inconsistent."""


class RunFolderError(TerminalError):
    """Exception raised when a run folder is missing, or a stage runs before the stage it depends on."""


class ConfigurationError(TerminalError):
    """Exception raised when the configuration is invalid or changed under a resumed run."""


class UpstreamError(TerminalError):
    """Exception raised when the model gateway fails after exhausting its retries."""
    exit_code = EXIT_UPSTREAM_ERROR


class DataError(TerminalError):
    """Exception raised when an input or artifact file is malformed."""
    exit_code = EXIT_DATA_ERROR
