"""Console logging setup for the CLI."""

import logging
import os

from rich.console import Console
from rich.logging import RichHandler

console = Console()


def setup_logging(verbose: bool = False) -> None:
  """Install a rich handler on the root logger.

  The level comes from ``--verbose`` or the ``LAB_LOG_LEVEL`` environment variable.
  """
  level = 'DEBUG' if verbose else os.getenv('LAB_LOG_LEVEL', 'INFO').upper()
  logging.basicConfig(
    level=level,
    format='%(message)s',
    datefmt='[%X]',
    handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
    force=True,
  )
