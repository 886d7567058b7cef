"""Entry point for CLI when running as module: python -m kergm"""

from kergm.cli import main

if __name__ == "__main__":
    main()
