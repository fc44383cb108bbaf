"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
import sys


MINIMUM_PYTHON = (3, 13)


def check_python_version(minimum: tuple[int, int] = MINIMUM_PYTHON) -> None:
    """Stop with exit code 1 when the interpreter is older than `minimum`.

    Args:
        minimum: Lowest supported (major, minor) version.
    """
    current = sys.version_info[:2]
    if current < minimum:
        sys.stderr.write(
            f"KGForge requires Python {minimum[0]}.{minimum[1]} or newer "
            f"(running {current[0]}.{current[1]}); install a newer interpreter or use a virtual environment.\n"
        )
        sys.exit(1)
