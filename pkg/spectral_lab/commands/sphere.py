"""``spectral-lab sphere``: exact rank certificates for harmonics on S^2 and S^3."""

import logging

import pandas as pd

from spectral_lab.commands.experiment import experiment_command, print_table
from spectral_lab.config import ExperimentConfig
from spectral_lab.errors import ResourceLimitError
from spectral_lab.services.run_store import RunRecord
from spectral_lab.services.sphere_poly import (
  RankCertificate,
  first_guaranteed_ell,
  gradient_dimension_count,
  gradient_map_certificate,
  harmonic_basis,
  product_map_certificate,
  zonal_surjectivity_check,
)

logger = logging.getLogger(__name__)


def _certify(certify, basis, cfg) -> tuple[RankCertificate | None, str]:
  try:
    return certify(basis, cfg.with_kernel, cfg.cell_budget), 'certified'
  except ResourceLimitError as e:
    logger.warning('n=%d l=%d skipped: %s', basis.n, basis.degree, e)
    return None, f'skipped ({e.required} cells)'


@experiment_command('sphere')
def sphere(config: ExperimentConfig, run: RunRecord) -> list[str]:
  """Certify the product and gradient maps on S^n and tabulate the dimension count."""
  cfg = config.sphere
  rows, certificates, failures = [], [], []
  for ell in range(cfg.ell_min, cfg.ell_max + 1):
    basis = harmonic_basis(cfg.n + 1, ell)
    product, product_status = _certify(product_map_certificate, basis, cfg)
    gradient, gradient_status = None, 'not requested'
    if cfg.gradient:
      gradient, gradient_status = _certify(gradient_map_certificate, basis, cfg)
    row = {
      'ell': ell,
      'eigenvalue': basis.eigenvalue,
      'multiplicity': basis.m,
      'product_nullity': product.nullity if product else None,
      'product_status': product_status,
      'gradient_nullity': gradient.nullity if gradient else None,
      'gradient_status': gradient_status,
    }
    if cfg.n == 2:
      row['zonal_independent'] = zonal_surjectivity_check(ell)
      if product and product.nullity:
        failures.append(f'S^2 l={ell}: product map has nullity {product.nullity}')
      if product and product.domain_dim != product.codomain_dim:
        failures.append(f'S^2 l={ell}: product map is not square')
      if not row['zonal_independent']:
        failures.append(f'S^2 l={ell}: zonal products are dependent')
    rows.append(row)
    certificates += [c.to_json() for c in (product, gradient) if c is not None]

  counts = pd.DataFrame(
    [gradient_dimension_count(cfg.n, ell).model_dump() for ell in range(1, cfg.table_ell_max + 1)]
  )
  first = first_guaranteed_ell(cfg.n, cfg.table_ell_max)
  if cfg.n == 3 and cfg.table_ell_max >= 23 and first != 23:
    failures.append(f'S^3 dimension count: first guaranteed l is {first}, expected 23')

  frame = pd.DataFrame(rows)
  run.tables['certificates'] = frame
  run.tables['dimension_count'] = counts
  run.add_report('certificates', certificates)
  run.summary = {
    'n': cfg.n,
    'ell_range': [cfg.ell_min, cfg.ell_max],
    'product_nullities': {str(r['ell']): r['product_nullity'] for r in rows},
    'gradient_nullities': {str(r['ell']): r['gradient_nullity'] for r in rows},
    'skipped': sum('skipped' in f'{r["product_status"]}{r["gradient_status"]}' for r in rows),
    'first_guaranteed_ell': first,
    'checks_passed': not failures,
  }
  print_table(f'rank certificates on S^{cfg.n}', frame)
  return failures
