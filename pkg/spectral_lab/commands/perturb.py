"""``spectral-lab perturb``: first-order splitting of one eigenvalue cluster."""

import logging
import math

import numpy as np

from spectral_lab.commands.experiment import experiment_command, print_table
from spectral_lab.config import ExperimentConfig, PerturbConfig, load_input
from spectral_lab.errors import ConfigError
from spectral_lab.services.eigenspace import EigenspaceBasis
from spectral_lab.services.fields import MetricField, PerturbationTensor
from spectral_lab.services.galerkin_torus import eigenspace_samples
from spectral_lab.services.perturbation_lab import (
  classify_from_samples,
  first_order_validation,
  gradient_relation_check,
  random_direction,
  sah_cokernel_test,
  splitting_matrix,
)
from spectral_lab.services.run_store import RunRecord
from spectral_lab.services.torus_lattice import (
  TorusEigenvalue,
  enumerate_spectrum,
  torus_degeneracy,
)

logger = logging.getLogger(__name__)

MIN_SLOPE = 1.9


def flat_eigenvalue(metric: MetricField, norm_sq: float) -> TorusEigenvalue:
  """Flat-torus eigenvalue of the metric's lattice with the given |kappa|^2."""
  for eig in enumerate_spectrum(metric.lattice, norm_sq * (1 + 1e-6)):
    if math.isclose(eig.norm_sq, norm_sq, rel_tol=1e-9):
      return eig
  raise ConfigError(f'no flat-torus eigenvalue with |kappa|^2 = {norm_sq:g} on this lattice')


def build_basis(cfg: PerturbConfig, metric: MetricField, eig: TorusEigenvalue) -> EigenspaceBasis:
  """Exact flat basis, or Galerkin samples of the cluster continuing ``eig``."""
  exact = cfg.basis == 'exact' and cfg.metric_file is None
  if cfg.basis == 'exact' and not exact:
    logger.info('metric file given; using the Galerkin basis')
  if exact:
    return EigenspaceBasis.from_torus_eigenvalue(eig, cfg.grid_size)
  kappa = math.sqrt(eig.norm_sq)
  max_freq = cfg.max_freq or math.ceil(kappa) + math.ceil(metric.bandwidth) + 2
  return eigenspace_samples(
    metric, max_freq, eig.eigenvalue, cfg.multiplicity or eig.multiplicity, cfg.grid_size
  )


def build_direction(
  cfg: PerturbConfig, metric: MetricField, rng: np.random.Generator
) -> PerturbationTensor:
  """Direction h of the first-order experiment."""
  if cfg.direction == 'scaling':
    return PerturbationTensor.scaling(metric.dim, 1.0)
  return random_direction(
    metric,
    rng,
    cfg.direction_radius,
    conformal=cfg.direction == 'conformal',
    amplitude=cfg.direction_amplitude,
  )


@experiment_command('perturb', seeded=True)
def perturb(config: ExperimentConfig, run: RunRecord) -> list[str]:
  """Split one eigenvalue cluster to first order and test its degeneracy."""
  cfg = config.perturb
  seed = config.seed
  metric = MetricField.flat(cfg.lattice)
  if cfg.metric_file:
    metric = load_input(MetricField.from_file, cfg.metric_file, 'metric')
  eig = flat_eigenvalue(metric, cfg.norm_sq)
  basis = build_basis(cfg, metric, eig)
  h = build_direction(cfg, metric, np.random.default_rng(seed))

  splitting = splitting_matrix(basis, h)
  first_order = first_order_validation(basis, h, cfg.t_grid, cfg.max_freq, cfg.grid_size)
  cokernels = {
    mode: sah_cokernel_test(basis, mode, cfg.num_directions, seed, cfg.rel_tol)
    for mode in cfg.sah_modes
  }
  sampled = classify_from_samples(basis, cfg.rel_tol)
  relations = gradient_relation_check(basis, cfg.relation_trials, seed, cfg.rel_tol)

  failures = []
  if first_order.slope is not None and first_order.slope < MIN_SLOPE:
    failures.append(f'first-order slope {first_order.slope:.3f} below {MIN_SLOPE}')
  if not relations.passed:
    failures.append(f'gradient relation residual {relations.relation_residual:.3e}')
  expected = {'full': sampled.full_nullity, 'conformal': sampled.conformal_nullity}
  for mode, report in cokernels.items():
    if report.cokernel_dim != expected[mode]:
      failures.append(
        f'{mode} cokernel dimension {report.cokernel_dim} != sampled nullity {expected[mode]}'
      )

  exact = None
  if metric.is_flat() and cfg.metric_file is None:
    exact = torus_degeneracy(eig)
    run.add_report('exact_classification', exact)
    agree = (exact.conformal_nullity, exact.full_nullity) == (
      sampled.conformal_nullity,
      sampled.full_nullity,
    )
    if not agree:
      failures.append(
        f'sampled nullities ({sampled.conformal_nullity}, {sampled.full_nullity}) differ from '
        f'exact ({exact.conformal_nullity}, {exact.full_nullity})'
      )

  run.tables['first_order'] = first_order.to_frame()
  run.add_report(
    'splitting', {'matrix': splitting.entries.to_json(), 'path_gap': splitting.path_gap}
  )
  run.add_report('first_order', first_order)
  for mode, report in cokernels.items():
    run.add_report(f'cokernel_{mode}', report)
  run.add_report('classification', sampled)
  run.add_report('gradient_relations', relations)
  run.summary = {
    'eigenvalue': basis.eigenvalue,
    'multiplicity': basis.m,
    'basis': basis.representation,
    'seed': seed,
    'classification': sampled.classification,
    'k_c': sampled.conformal_nullity,
    'k_f': sampled.full_nullity,
    'exact_agrees': None if exact is None else exact.classification == sampled.classification,
    'slope': first_order.slope,
    'path_gap': splitting.path_gap,
    'cokernel_dims': {mode: r.cokernel_dim for mode, r in cokernels.items()},
    'verdicts': {mode: r.verdict for mode, r in cokernels.items()},
    'residual_max': {mode: r.residual_max for mode, r in cokernels.items()},
    'gradient_relations_passed': relations.passed,
    'checks_passed': not failures,
  }
  print_table('first-order deviation', first_order.to_frame())
  return failures
