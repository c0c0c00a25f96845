"""Executable entrypoint for the stealthkit command-line tool."""
from stealthkit.cli import main


if __name__ == "__main__":
    raise SystemExit(main())
