"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
import sys

from lib.interfaces.terminal.terminal_app import main


if __name__ == "__main__":
    sys.exit(main())
