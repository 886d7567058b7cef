#!/usr/bin/env python3
"""
kergm
Console-script entry point; the commands live in kergm.cli.
"""

from kergm.cli import main


def entry_point():
    """Synchronous entry point for setuptools console script."""
    main()


if __name__ == "__main__":
    entry_point()
