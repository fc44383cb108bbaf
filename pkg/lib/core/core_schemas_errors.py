"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
from typing import Any


class KGForgeError(Exception):
    """Base exception class for KGForge errors.

    Serves as the parent class for all application-specific exceptions,
    providing a common interface for error handling throughout the application.
    """


class ValidationErrors(KGForgeError):
    """Custom exception for structured validation errors.

    Raised when validation fails, containing detailed error information
    for each validation failure.

    Attributes:
        errors: List of error dictionaries with location, value, and message.
    """

    def __init__(self, errors: list[dict[str, Any]]):
        """Initialize exception with validation errors.

        Args:
            errors: List of validation error dictionaries. Each dictionary
                should contain 'location', 'value_to_blame', and 'error_message' keys.
                Only 'location' and 'error_message' are used for the exception message.

        Returns:
            None.
        """
        self.errors = errors
        error_message = [f"{error['location']}: {error['error_message']}" for error in errors]
        super().__init__("\n".join(error_message))


class RejectedTripleError(KGForgeError):
    """Raised when a triple field is empty after whitespace normalization."""

    def __init__(self, field: str, value: str) -> None:
        """Initialize with the offending field name and raw value.

        Args:
            field: Name of the rejected field ("head", "relation" or "tail").
            value: The raw value that normalized to an empty string.

        Returns:
            None.
        """
        self.field = field
        self.value = value
        super().__init__(f"rejected triple: field '{field}' is empty after normalization")


class NotFoundError(KGForgeError):
    """Raised when a node id or relation string is not present in the graph."""


class GraphFormatError(KGForgeError):
    """Raised when a graph or index file is corrupt, truncated or of another version."""


class GatewayError(KGForgeError):
    """Base class for model gateway failures."""


class TransportError(GatewayError):
    """Raised when a gateway call exhausted its retry budget."""


class ProtocolError(GatewayError):
    """Raised when a backend answered with a payload that does not follow the wire protocol."""


class EmptyInputError(GatewayError):
    """Raised when an embedding request carries no texts."""


class IndexBuildError(KGForgeError):
    """Raised when index items have duplicate ids or inconsistent dimensions."""


class DimensionMismatchError(KGForgeError):
    """Raised when a query vector does not match the index dimension."""


class InvalidPersonalizationError(KGForgeError):
    """Raised when a personalization vector is empty, negative or all zero."""


class EmptySequenceError(KGForgeError):
    """Raised when a similarity metric receives an empty token sequence or set."""


class UndefinedMetricError(KGForgeError):
    """Raised when a metric is undefined for the given counts."""


class ConfigError(KGForgeError):
    """Raised for invalid or inconsistent configuration."""


class DataFormatError(KGForgeError):
    """Raised when an input file cannot be decoded."""


class FrozenGraphError(KGForgeError):
    """Raised when a frozen graph snapshot is mutated."""


class TemplateRenderError(KGForgeError):
    """Raised when a prompt template fails to render."""
