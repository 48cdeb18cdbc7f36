"""Shared plumbing of the experiment subcommands."""

import logging
from typing import Callable

import click
import pandas as pd
from rich.table import Table

from spectral_lab.config import ExperimentConfig, ensure_seed, load_config, parse_overrides
from spectral_lab.errors import AcceptanceError
from spectral_lab.logging_config import console
from spectral_lab.services.run_store import RunRecord, write_run

logger = logging.getLogger(__name__)

Body = Callable[[ExperimentConfig, RunRecord], list[str]]


def print_table(title: str, frame: pd.DataFrame, max_rows: int = 40) -> None:
  """Render the head of a frame as a rich table."""
  table = Table(title=title)
  for column in frame.columns:
    table.add_column(str(column), justify='right')
  for row in frame.head(max_rows).itertuples(index=False):
    table.add_row(*(f'{v:.6g}' if isinstance(v, float) else str(v) for v in row))
  console.print(table)
  if len(frame) > max_rows:
    console.print(f'... {len(frame) - max_rows} more rows in the run directory')


def print_summary(summary: dict) -> None:
  """Render top-level summary values as a two-column table."""
  table = Table(title='summary', show_header=False)
  for key, value in summary.items():
    table.add_row(key, str(value))
  console.print(table)


def experiment_command(name: str, seeded: bool = False) -> Callable[[Body], click.Command]:
  """Turn ``body(config, run) -> failed checks`` into a click command.

  The command loads ``--config`` plus dot-path overrides, runs ``body``, writes the run
  directory and, in acceptance mode, raises :class:`AcceptanceError` when any check failed.
  """

  def decorate(body: Body) -> click.Command:
    @click.command(
      name,
      help=body.__doc__,
      context_settings={'ignore_unknown_options': True, 'allow_extra_args': True},
    )
    @click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='JSON config')
    @click.option('--output-dir', default=None, help='Parent directory of run directories')
    @click.pass_context
    def command(ctx: click.Context, config_path: str | None, output_dir: str | None) -> None:
      config = load_config(config_path, parse_overrides(ctx.args))
      if output_dir is not None:
        config = config.model_copy(update={'output_dir': output_dir})
      if seeded:
        config = ensure_seed(config)
      run = RunRecord(name, config.section(name))
      failures = body(config, run)
      root = write_run(run, config.output_dir)
      print_summary(run.summary)
      console.print(f'run written to {root}')
      if failures:
        for failure in failures:
          logger.warning('check failed: %s', failure)
        if config.acceptance:
          raise AcceptanceError(f'{len(failures)} acceptance checks failed: ' + '; '.join(failures))

    return command

  return decorate
