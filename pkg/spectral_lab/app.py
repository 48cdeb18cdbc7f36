"""Command-line entry point of the spectral degeneracy lab."""

import logging

import click
from dotenv import load_dotenv

from spectral_lab import __version__
from spectral_lab.commands import commands
from spectral_lab.errors import ComputationError, LabError
from spectral_lab.logging_config import setup_logging

logger = logging.getLogger(__name__)


class LabGroup(click.Group):
  """Click group that turns lab errors into their exit codes."""

  def invoke(self, ctx: click.Context):
    """Run the subcommand.

    A :class:`LabError` exits with its own code. Any other unexpected exception is logged with
    its traceback and exits with the computation-error code.
    """
    try:
      return super().invoke(ctx)
    except LabError as e:
      logger.error('%s: %s', type(e).__name__, e)
      ctx.exit(e.exit_code)
    except (click.ClickException, click.exceptions.Exit, click.exceptions.Abort):
      raise
    except Exception:
      logger.exception('internal error')
      ctx.exit(ComputationError.exit_code)


@click.group(cls=LabGroup)
@click.option('--verbose', '-v', is_flag=True, help='Debug logging')
@click.version_option(__version__)
def cli(verbose: bool) -> None:
  """Laplace-Beltrami eigenvalue degeneracy experiments."""
  load_dotenv('.env')
  load_dotenv('.env.local', override=True)
  setup_logging(verbose)


for command in commands:
  cli.add_command(command)


def main() -> None:
  """Console script entry point."""
  cli()


if __name__ == '__main__':
  main()
