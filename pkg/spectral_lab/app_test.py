"""End-to-end tests of the command-line interface."""

import json
from pathlib import Path

import pandas as pd
import pytest
from click.testing import CliRunner

from spectral_lab.app import cli


@pytest.fixture
def runner() -> CliRunner:
  return CliRunner()


def _invoke(runner: CliRunner, tmp_path: Path, *args: str):
  return runner.invoke(cli, [*args, '--output-dir', str(tmp_path)])


def _run_dir(tmp_path: Path) -> Path:
  (run_dir,) = [p for p in tmp_path.iterdir() if p.is_dir()]
  return run_dir


def _summary(tmp_path: Path) -> dict:
  return json.loads((_run_dir(tmp_path) / 'summary.json').read_text())


def test_torus_table(runner, tmp_path):
  result = _invoke(runner, tmp_path, 'torus', '--acceptance=true')
  assert result.exit_code == 0, result.output
  table = pd.read_csv(_run_dir(tmp_path) / 'tables' / 'spectrum.csv').set_index('norm_sq')
  assert table.loc[1.0, 'multiplicity'] == 4
  assert table.loc[1.0, 'classification'] == 'conformally_degenerate'
  assert table.loc[5.0, 'multiplicity'] == 8
  assert table.loc[5.0, 'classification'] == 'degenerate'
  assert table.loc[25.0, 'multiplicity'] == 12
  witnesses = json.loads((_run_dir(tmp_path) / 'reports' / 'witnesses.json').read_text())
  at_five = next(w for w in witnesses if w['norm_sq'] == 5.0)
  assert at_five['full_witnesses'] == [[1, -1, -1, 1]]
  assert _summary(tmp_path)['checks_passed'] is True


def test_torus_rectangular_has_nondegenerate_eigenvalue(runner, tmp_path):
  lattice = json.dumps({'dim': 2, 'basis': [[1, 0], [0, 2]]})
  result = _invoke(runner, tmp_path, 'torus', f'--torus.lattice={lattice}', '--torus.norm_sq_max=2')
  assert result.exit_code == 0, result.output
  table = pd.read_csv(_run_dir(tmp_path) / 'tables' / 'spectrum.csv')
  lowest = table.iloc[0]
  assert lowest['norm_sq'] == pytest.approx(0.25)
  assert lowest['multiplicity'] == 2
  assert lowest['classification'] == 'nondegenerate'


def test_torus_empty_window(runner, tmp_path):
  result = _invoke(runner, tmp_path, 'torus', '--torus.norm_sq_max=0.5')
  assert result.exit_code == 0, result.output
  table = pd.read_csv(_run_dir(tmp_path) / 'tables' / 'spectrum.csv')
  assert table.empty
  assert 'classification' in table.columns
  assert _summary(tmp_path)['eigenvalues'] == 0


def test_torus_from_config_file(runner, tmp_path):
  config = tmp_path / 'torus.json'
  config.write_text(json.dumps({'torus': {'norm_sq_max': 2, 'with_witnesses': False}}))
  out = tmp_path / 'runs'
  result = runner.invoke(cli, ['torus', '--config', str(config), '--output-dir', str(out)])
  assert result.exit_code == 0, result.output
  run_dir = _run_dir(out)
  assert json.loads((run_dir / 'config.json').read_text())['torus']['norm_sq_max'] == 2
  assert not (run_dir / 'reports' / 'witnesses.json').exists()


@pytest.mark.parametrize(
  'args',
  [
    ['torus', '--torus.norm_sq_max=-1'],
    ['torus', '--torus.bogus=1'],
    ['torus', 'stray'],
    ['torus', '--torus.lattice_file=/nonexistent/lattice.json'],
    ['sphere', '--sphere.n=4'],
    ['perturb', '--seed=1', '--perturb.t_grid=[0]'],
    ['perturb', '--seed=1', '--perturb.norm_sq=3'],
  ],
)
def test_config_errors_exit_2(runner, tmp_path, args):
  result = _invoke(runner, tmp_path, *args)
  assert result.exit_code == 2, result.output


def test_sphere_s2_product_maps(runner, tmp_path):
  result = _invoke(
    runner, tmp_path, 'sphere', '--sphere.ell_max=4', '--sphere.table_ell_max=5', '--acceptance=1'
  )
  assert result.exit_code == 0, result.output
  summary = _summary(tmp_path)
  assert summary['product_nullities'] == {'1': 0, '2': 0, '3': 0, '4': 0}
  assert summary['first_guaranteed_ell'] is None
  table = pd.read_csv(_run_dir(tmp_path) / 'tables' / 'certificates.csv')
  assert table['zonal_independent'].all()
  assert table['eigenvalue'].tolist() == [-2, -6, -12, -20]


def test_sphere_s3_counts(runner, tmp_path):
  result = _invoke(
    runner, tmp_path, 'sphere', '--sphere.n=3', '--sphere.ell_max=2', '--sphere.gradient=false'
  )
  assert result.exit_code == 0, result.output
  summary = _summary(tmp_path)
  assert summary['product_nullities']['1'] == 0
  assert summary['product_nullities']['2'] >= 10
  assert summary['first_guaranteed_ell'] == 23
  counts = pd.read_csv(_run_dir(tmp_path) / 'tables' / 'dimension_count.csv')
  assert len(counts) == 30


def test_sphere_budget_skips(runner, tmp_path):
  result = _invoke(runner, tmp_path, 'sphere', '--sphere.ell_max=2', '--sphere.cell_budget=10')
  assert result.exit_code == 0, result.output
  summary = _summary(tmp_path)
  assert summary['skipped'] == 2
  assert summary['product_nullities'] == {'1': None, '2': None}


def test_perturb_simple_cluster(runner, tmp_path):
  result = _invoke(runner, tmp_path, 'perturb', '--seed=3', '--acceptance=true')
  assert result.exit_code == 0, result.output
  summary = _summary(tmp_path)
  assert summary['slope'] >= 1.9
  assert summary['verdicts'] == {'full': 'submersion', 'conformal': 'sah_fails'}
  assert summary['classification'] == 'conformally_degenerate'
  assert summary['exact_agrees'] is True
  reports = _run_dir(tmp_path) / 'reports'
  assert json.loads((reports / 'cokernel_full.json').read_text())['cokernel_dim'] == 0
  assert (_run_dir(tmp_path) / 'tables' / 'first_order.csv').is_file()


def test_perturb_degenerate_cluster(runner, tmp_path):
  result = _invoke(
    runner,
    tmp_path,
    'perturb',
    '--seed=4',
    '--perturb.norm_sq=5',
    '--perturb.direction=scaling',
    '--perturb.sah_modes=["full"]',
  )
  assert result.exit_code == 0, result.output
  summary = _summary(tmp_path)
  assert summary['classification'] == 'degenerate'
  assert summary['k_f'] == 1
  assert summary['cokernel_dims'] == {'full': 1}
  assert summary['checks_passed'] is True


def test_perturb_cluster_isolation_exits_3(runner, tmp_path):
  result = _invoke(
    runner, tmp_path, 'perturb', '--seed=0', '--perturb.basis=galerkin', '--perturb.multiplicity=3'
  )
  assert result.exit_code == 3, result.output


def test_acceptance_failure_exits_4(runner, tmp_path, monkeypatch):
  monkeypatch.setattr('spectral_lab.commands.torus.multiplicity_exclusions_hold', lambda _: False)
  result = _invoke(runner, tmp_path, 'torus', '--torus.norm_sq_max=2')
  assert result.exit_code == 0, result.output
  assert _summary(tmp_path)['checks_passed'] is False
  strict = tmp_path / 'strict'
  result = _invoke(runner, strict, 'torus', '--torus.norm_sq_max=2', '--acceptance=true')
  assert result.exit_code == 4, result.output


def test_unexpected_error_exits_3(runner, tmp_path, monkeypatch):
  def broken(*_):
    raise RuntimeError('lattice enumeration broke')

  monkeypatch.setattr('spectral_lab.commands.torus.enumerate_spectrum', broken)
  result = _invoke(runner, tmp_path, 'torus', '--torus.norm_sq_max=2')
  assert result.exit_code == 3, result.output
  assert not isinstance(result.exception, RuntimeError)


def test_usage_errors_keep_click_exit_code(runner):
  result = runner.invoke(cli, ['no-such-command'])
  assert result.exit_code == 2


NONCROSS = [
  '--noncross.samples=5',
  '--noncross.runs=2',
  '--noncross.num_eigenvalues=4',
  '--noncross.max_freq=2.5',
]


def test_noncross_and_plotdata(runner, tmp_path):
  result = _invoke(runner, tmp_path, 'noncross', '--seed=10', *NONCROSS)
  assert result.exit_code == 0, result.output
  run_dir = _run_dir(tmp_path)
  assert (run_dir / 'tables' / 'trajectories_seed10.csv').is_file()
  assert (run_dir / 'tables' / 'trajectories_seed11.csv').is_file()
  summary = _summary(tmp_path)
  assert summary['runs'] == 2
  assert summary['min_gap'] > 0

  result = runner.invoke(cli, ['plotdata', str(run_dir)])
  assert result.exit_code == 0, result.output
  plots = sorted(p.name for p in (run_dir / 'plot').iterdir())
  assert plots == [f'trajectory_{i:02d}.dat' for i in range(1, 5)]


def test_noncross_summary_is_reproducible(runner, tmp_path):
  for name in ('a', 'b'):
    result = _invoke(runner, tmp_path / name, 'noncross', '--seed=2', *NONCROSS)
    assert result.exit_code == 0, result.output
  first, second = _run_dir(tmp_path / 'a'), _run_dir(tmp_path / 'b')
  assert first.name == second.name
  assert (first / 'summary.json').read_bytes() == (second / 'summary.json').read_bytes()


def test_plotdata_rejects_plain_directory(runner, tmp_path):
  result = runner.invoke(cli, ['plotdata', str(tmp_path)])
  assert result.exit_code == 2
