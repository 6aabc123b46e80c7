#!/usr/bin/env python
"""Command-line entry point.

`lamp audit MUTAG subgraph 0.2` (console script) and
`python main.py audit MUTAG subgraph 0.2` both dispatch to the management
commands in `lamp/management/commands/`.
"""

import os
import sys
from pathlib import Path

from dotenv import load_dotenv

BASE_DIR = Path(__file__).resolve().parent


def main():
    load_dotenv(BASE_DIR / ".env")
    os.environ.setdefault(
        "DJANGO_SETTINGS_MODULE",
        os.getenv("DJANGO_SETTINGS_MODULE", "config.settings.dev"),
    )
    from django.core.management import execute_from_command_line

    execute_from_command_line(["lamp", *sys.argv[1:]])


if __name__ == "__main__":
    main()
