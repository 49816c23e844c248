"""
Module: main
Description: Entry point of the lab, `python -m app.main <command> [flags]`. See `app/cli/main.py` for the flags.
"""

from app.cli.main import main

if __name__ == "__main__":
    raise SystemExit(main())
