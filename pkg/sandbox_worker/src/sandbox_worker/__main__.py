"""Entry point for ``python -m sandbox_worker``."""
import sys

from .worker import main

sys.exit(main())
