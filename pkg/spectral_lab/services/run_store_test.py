"""Tests for run directories and plot data."""

import pandas as pd
import pytest

from spectral_lab.services.run_store import (
  RunRecord,
  emit_plot_data,
  load_run,
  run_id,
  write_run,
)


def _noncross_run() -> RunRecord:
  tables = {
    f'trajectories_seed{seed}': pd.DataFrame(
      {'s1': [-1.0, 0.0, 1.0], 'lambda_1': [-39.0, -39.4, -39.8], 'lambda_2': [-40.0, -40.1, -40.2]}
    )
    for seed in (3, 10)
  }
  return RunRecord('noncross', {'seed': 3, 'noncross': {'runs': 2}}, {'min_gap': 0.4}, tables)


def test_run_id_ignores_key_order():
  assert run_id('torus', {'a': 1, 'b': [1, 2]}) == run_id('torus', {'b': [1, 2], 'a': 1})
  assert run_id('torus', {'a': 1}) != run_id('torus', {'a': 2})
  assert run_id('torus', {'a': 1}).startswith('torus-')
  assert len(run_id('torus', {}).split('-')[1]) == 12


def test_summary_is_byte_identical_across_runs(tmp_path):
  first = write_run(_noncross_run(), tmp_path / 'a')
  second = write_run(_noncross_run(), tmp_path / 'b')
  assert first.name == second.name
  assert (first / 'summary.json').read_bytes() == (second / 'summary.json').read_bytes()
  assert (first / 'config.json').read_bytes() == (second / 'config.json').read_bytes()
  assert (first / 'tables' / 'trajectories_seed3.csv').is_file()


def test_load_round_trip(tmp_path):
  run = _noncross_run()
  run.add_report('extra', {'value': 1.5})
  root = write_run(run, tmp_path)
  loaded = load_run(root)
  assert loaded.command == 'noncross'
  assert loaded.summary == {'min_gap': 0.4}
  assert loaded.reports['extra'] == {'value': 1.5}
  assert loaded.meta.finished_at is not None
  expected = run.tables['trajectories_seed10']
  pd.testing.assert_frame_equal(loaded.tables['trajectories_seed10'], expected)


def test_load_rejects_plain_directory(tmp_path):
  with pytest.raises(FileNotFoundError):
    load_run(tmp_path)


def test_noncross_plot_files(tmp_path):
  run = _noncross_run()
  root = write_run(run, tmp_path)
  files = emit_plot_data(load_run(root), root)
  assert [f.name for f in files] == ['trajectory_01.dat', 'trajectory_02.dat']
  lines = files[0].read_text().splitlines()
  assert lines[0] == '# s1 seed3 seed10'
  assert lines[1].split() == ['-1.0', '-39.0', '-39.0']
  assert len(lines) == 4


def test_perturb_plot_skips_base_point(tmp_path):
  table = pd.DataFrame({'t': [0.0, 1e-3, 2e-3], 'deviation': [0.0, 1e-6, 4e-6]})
  run = RunRecord('perturb', {'seed': 0}, {}, {'first_order': table})
  files = emit_plot_data(run, tmp_path)
  assert [f.name for f in files] == ['deviation.dat']
  rows = [line.split() for line in files[0].read_text().splitlines()[1:]]
  assert [float(r[0]) for r in rows] == [1e-3, 2e-3]


def test_empty_run_writes_nothing(tmp_path):
  run = RunRecord('torus', {'seed': 0}, {}, {'spectrum': pd.DataFrame({'norm_sq': []})})
  assert emit_plot_data(run, tmp_path) == []
  assert not (tmp_path / 'plot').exists()
