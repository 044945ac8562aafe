#!/usr/bin/env python3
"""
nstable CLI entry point

This allows running the CLI as: python -m nstable
"""

if __name__ == "__main__":
    from .cli import cli
    cli()
