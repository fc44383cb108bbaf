"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
import logging
from collections.abc import Callable
from functools import wraps
from pathlib import Path
from typing import Any, TypeVar, cast, overload

from lib.core.core_schemas_errors import (
    ConfigError,
    DataFormatError,
    GatewayError,
    GraphFormatError,
    IndexBuildError,
    KGForgeError,
    NotFoundError,
    TemplateRenderError,
    ValidationErrors,
)
from lib.interfaces.terminal.terminal_errors import (
    ConfigurationError,
    DataError,
    InvalidArgumentError,
    TerminalError,
    UpstreamError,
)


LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

logger = logging.getLogger(__name__)

# Type variable for any callable
F = TypeVar("F", bound=Callable[..., Any])


def configure_logging(verbosity: int = 0) -> None:
    """Configure the root logger once for the terminal app.

    Args:
        verbosity: 0 logs warnings, 1 info, 2 or more debug.
    """
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    # httpx logs every request at info level
    logging.getLogger("httpx").setLevel(max(level, logging.WARNING))


@overload
def logger_decorator() -> Callable[[F], F]:
    ...

@overload
def logger_decorator[F: Callable[..., Any]](func: F) -> F:
    ...


def logger_decorator[F: Callable[..., Any]](func: F | None = None) -> F | Callable[[F], F]:
    """Wrap a command body so that failures surface as exit-coded terminal errors.

    Known exception families are formatted for the user and re-raised as the
    TerminalError subclass carrying their exit code: configuration and usage
    problems exit 1, gateway failures 2, malformed files 3. Anything else is
    condensed to a short traceback and exits 1.

    Args:
        func: Optional function to decorate. When None, returns a decorator function.

    Returns:
        Either the decorated function or a decorator function, depending on usage pattern.
    """

    def _decorator(function: F) -> F:

        @wraps(function)
        def _wrapper(*args: Any, **kwargs: Any) -> Any:
            try:
                return function(*args, **kwargs)

            except TerminalError:
                raise

            except ValidationErrors as error:
                raise ConfigurationError(extract_validation_errors(error)) from error

            except ConfigError as error:
                raise ConfigurationError(str(error)) from error

            except GatewayError as error:
                raise UpstreamError(f"{type(error).__name__}: {error}") from error

            except (DataFormatError, GraphFormatError, IndexBuildError) as error:
                raise DataError(str(error)) from error

            except (NotFoundError, TemplateRenderError, FileNotFoundError, ValueError) as error:
                raise InvalidArgumentError(str(error)) from error

            except KGForgeError as error:
                raise TerminalError(str(error)) from error

            except (KeyboardInterrupt, SystemExit):
                raise

            except Exception as error:
                logger.debug("Unexpected failure", exc_info=error)
                raise TerminalError(extract_traceback_info(error)) from error

        return cast("F", _wrapper)

    # Handle both @logger_decorator and @logger_decorator() usage patterns
    if func is None:
        return _decorator
    return _decorator(func)


def extract_traceback_info(error: Exception, exclude_files: set[str] | None = None) -> str:
    """Extract and format traceback information from an exception.

    Args:
        error: Exception object containing traceback information.
        exclude_files: Set of filenames to exclude from traceback output.

    Returns:
        Formatted string with one "file:line in function()" entry per frame and the error itself.
    """
    if exclude_files is None:
        exclude_files = {"terminal_logger.py"}

    traceback_lines = []
    current_traceback = error.__traceback__

    while current_traceback is not None:
        frame = current_traceback.tb_frame
        filename = Path(frame.f_code.co_filename).name

        if filename not in exclude_files:
            trace_line = f"{filename}:{current_traceback.tb_lineno} in {frame.f_code.co_name}()"
            traceback_lines.append(f"→ {trace_line}")

        current_traceback = current_traceback.tb_next

    error_header = f"{type(error).__name__}: {error!s}"

    if traceback_lines:
        return "Traceback (most recent call last):\n" + "\n".join(traceback_lines) + f"\n{error_header}"
    return error_header


def extract_validation_errors(validation_errors: ValidationErrors) -> str:
    """Format aggregated validation errors as one "location: message" line each.

    Args:
        validation_errors: ValidationErrors containing error details.

    Returns:
        Formatted string containing all validation errors.
    """
    formatted_errors = [
        "Configuration errors:",
        "=" * 21,
    ]

    for error in validation_errors.errors:
        location = error.get("location", "unknown_location")
        error_message = error.get("error_message", "unknown_error")
        formatted_errors.append(f"  {location}: {error_message}")

    return "\n".join(formatted_errors)
