"""CLI entry point for python -m flow_tailor."""

from flow_tailor.cli import app

if __name__ == "__main__":
    app()
