"""``spectral-lab torus``: exact flat-torus spectrum with degeneracy classes."""

import logging

import pandas as pd

from spectral_lab.commands.experiment import experiment_command, print_table
from spectral_lab.config import ExperimentConfig, load_input
from spectral_lab.services.run_store import RunRecord
from spectral_lab.services.torus_lattice import (
  Lattice,
  degeneracy_threshold,
  enumerate_spectrum,
  multiplicity_exclusions_hold,
  torus_degeneracy,
)

logger = logging.getLogger(__name__)

COLUMNS = [
  'norm_sq',
  'norm_sq_exact',
  'lambda',
  'multiplicity',
  'k_c',
  'k_f',
  'classification',
  'near_tie',
]


@experiment_command('torus')
def torus(config: ExperimentConfig, run: RunRecord) -> list[str]:
  """Enumerate eigenvalues of a flat torus and classify their degeneracy."""
  cfg = config.torus
  lattice = cfg.lattice
  if cfg.lattice_file:
    lattice = load_input(Lattice.from_file, cfg.lattice_file, 'lattice')
  eigenvalues = enumerate_spectrum(lattice, cfg.norm_sq_max)
  threshold = degeneracy_threshold(lattice.dim)

  rows, witnesses, failures = [], [], []
  for eig in eigenvalues:
    report = torus_degeneracy(eig)
    rows.append(
      {
        'norm_sq': eig.norm_sq,
        'norm_sq_exact': eig.norm_sq_exact,
        'lambda': eig.eigenvalue,
        'multiplicity': eig.multiplicity,
        'k_c': report.conformal_nullity,
        'k_f': report.full_nullity,
        'classification': report.classification,
        'near_tie': eig.near_tie,
      }
    )
    if cfg.with_witnesses:
      witnesses.append(
        {'norm_sq': eig.norm_sq, 'indices': [list(k) for k in eig.indices]}
        | report.model_dump(mode='json')
      )
    if not multiplicity_exclusions_hold(report):
      failures.append(f'|kappa|^2 = {eig.norm_sq:g}: multiplicity exclusion violated')
    if eig.multiplicity >= threshold and report.classification != 'degenerate':
      failures.append(
        f'|kappa|^2 = {eig.norm_sq:g}: multiplicity {eig.multiplicity} is not degenerate'
      )

  frame = pd.DataFrame(rows, columns=COLUMNS)
  if frame.empty:
    logger.warning('no nonzero eigenvalues with |kappa|^2 <= %g', cfg.norm_sq_max)
  run.tables['spectrum'] = frame
  if cfg.with_witnesses:
    run.add_report('witnesses', witnesses)
  counts = frame['classification'].value_counts().to_dict()
  run.summary = {
    'eigenvalues': len(frame),
    'nondegenerate': int(counts.get('nondegenerate', 0)),
    'conformally_degenerate': int(counts.get('conformally_degenerate', 0)),
    'degenerate': int(counts.get('degenerate', 0)),
    'degeneracy_threshold': threshold,
    'near_ties': int(frame['near_tie'].sum()),
    'checks_passed': not failures,
  }
  print_table('flat torus spectrum', frame)
  return failures
