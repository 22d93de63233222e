"""Entry point for ``python -m kinflock``."""
import sys

from .cli import main

sys.exit(main())
