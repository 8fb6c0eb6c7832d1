"""Entry point for python -m wehrlab."""

from wehrlab.cli import main

if __name__ == "__main__":
    main()
