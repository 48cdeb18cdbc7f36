"""``spectral-lab plotdata``: gnuplot-ready tables for a finished run."""

import click

from spectral_lab.logging_config import console
from spectral_lab.services.run_store import emit_plot_data, load_run


@click.command('plotdata')
@click.argument('run_dir', type=click.Path(exists=True, file_okay=False))
def plotdata(run_dir: str) -> None:
  """Write whitespace-delimited plot tables into RUN_DIR/plot."""
  try:
    run = load_run(run_dir)
  except FileNotFoundError as e:
    raise click.BadParameter(str(e), param_hint='RUN_DIR') from e
  files = emit_plot_data(run, run_dir)
  for path in files:
    console.print(str(path))
  if not files:
    console.print(f'{run.run_id}: nothing to plot')
