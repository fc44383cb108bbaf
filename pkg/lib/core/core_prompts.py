"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
from functools import cache
from importlib import resources
from typing import Any

from jinja2 import (
    Environment,
    PackageLoader,
    StrictUndefined,
)
from jinja2.exceptions import (
    TemplateNotFound,
    TemplateRuntimeError,
    TemplateSyntaxError,
    UndefinedError,
)

from lib.core.core_schemas_errors import TemplateRenderError


try:
    # Prompts are plain text, so no autoescaping
    kgforge_jinja_env = Environment(
        loader=PackageLoader(package_name="lib.core", package_path="templates"),
        undefined=StrictUndefined,
        autoescape=False,  # noqa: S701
        keep_trailing_newline=True,
    )

except Exception as e:
    error_message = f"Failed to initialize Jinja2 environment: {e}"
    raise RuntimeError(error_message) from e


# Golden prompt resources, stored verbatim
GOLDEN_PROMPTS: dict[str, str] = {
    "EE": "extraction_ee.txt",
    "EV": "extraction_ev.txt",
    "VV": "extraction_vv.txt",
    "event": "concept_event.txt",
    "entity": "concept_entity.txt",
    "relation": "concept_relation.txt",
    "mcq_generation": "mcq_generation.txt",
    "mcq_answering": "mcq_answering.txt",
}


@cache
def golden_prompt(name: str) -> str:
    """Return the verbatim text of a golden prompt resource.

    Args:
        name: Key of GOLDEN_PROMPTS (a stage, an element kind or an MCQ prompt).

    Returns:
        The resource text, byte for byte.

    Raises:
        FileNotFoundError: If the name is unknown.
    """
    if name not in GOLDEN_PROMPTS:
        error_message = f"Unknown golden prompt: {name}"
        raise FileNotFoundError(error_message)

    resource = resources.files("lib.core") / "templates" / "prompts" / GOLDEN_PROMPTS[name]
    return resource.read_text(encoding="utf-8")


def fill_slots(text: str, slots: dict[str, str]) -> str:
    """Substitute literal slot markers in a golden prompt.

    Slots are replaced with plain string replacement, since golden prompts
    contain JSON braces that must not be interpreted.

    Args:
        text: Golden prompt text.
        slots: Mapping of marker (e.g. "[EVENT]" or "{passage}") to value.

    Returns:
        The prompt with every marker replaced.
    """
    for marker, value in slots.items():
        text = text.replace(marker, value)
    return text


class PromptRenderer:
    """Renders artifact-authored Jinja2 prompt templates."""

    def render(self, template_path_str: str, template_data: dict[str, Any]) -> str:
        """Render a Jinja2 prompt template with the provided data.

        Args:
            template_path_str: Template path relative to the templates directory.
            template_data: Template context variables.

        Returns:
            Rendered prompt text.

        Raises:
            - FileNotFoundError: If template file is not found.
            - TemplateRenderError: If rendering fails due to syntax or runtime errors.
            - ValueError: If the template path is empty.
        """
        if not template_path_str:
            error_message = "Template path cannot be empty or None."
            raise ValueError(error_message)

        try:
            template = kgforge_jinja_env.get_template(template_path_str)

        except TemplateNotFound as e:
            error_message = f"Template file not found: {template_path_str}"
            raise FileNotFoundError(error_message) from e

        except TemplateSyntaxError as e:
            error_message = f"Template syntax error in {template_path_str}: {e.message} at line {e.lineno}."
            raise TemplateRenderError(error_message) from e

        try:
            return template.render(template_data)

        except TemplateRuntimeError as e:
            error_message = f"Template runtime error in {template_path_str}: {e.message}."
            raise TemplateRenderError(error_message) from e

        except UndefinedError as e:
            error_message = f"Undefined variable in template {template_path_str}: {e.message}."
            raise TemplateRenderError(error_message) from e


prompt_renderer = PromptRenderer()
