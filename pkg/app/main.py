"""
Main entry point for the MAXQ engine.
"""
from .interface.cli import cli

if __name__ == "__main__":
    cli()
