"""``spectral-lab noncross``: eigenvalue gaps along seeded families of metrics."""

import pandas as pd

from spectral_lab.commands.experiment import experiment_command, print_table
from spectral_lab.config import ExperimentConfig
from spectral_lab.services.noncrossing import noncrossing_sweep
from spectral_lab.services.run_store import RunRecord


@experiment_command('noncross', seeded=True)
def noncross(config: ExperimentConfig, run: RunRecord) -> list[str]:
  """Sweep metric families and record how close adjacent eigenvalues come."""
  result = noncrossing_sweep(config.noncross, config.seed)
  for seed, frame in result.trajectories.items():
    run.tables[f'trajectories_seed{seed}'] = frame
  run.add_report('runs', result.summary)
  summary = result.summary
  run.summary = {
    'family': summary.family,
    'params': summary.params,
    'runs': len(summary.runs),
    'min_gap': summary.min_gap,
    'argmin_s': min(summary.runs, key=lambda r: r.min_gap).argmin_s,
    'assertion': summary.assertion,
  }
  print_table(
    'gap minima per seed',
    pd.DataFrame(
      [
        {
          'seed': r.seed,
          'simple_start': r.simple_start,
          'min_gap': r.min_gap,
          'argmin_index': r.argmin_index,
          'assertion': r.assertion,
        }
        for r in summary.runs
      ]
    ),
  )
  failed = [r.seed for r in summary.runs if r.assertion == 'failed']
  return [f'seed {seed}: an adjacent gap closed along the family' for seed in failed]
