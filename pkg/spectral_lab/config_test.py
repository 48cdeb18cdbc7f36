"""Tests for configuration loading and dot-path overrides."""

import json
import logging

import pytest

from spectral_lab.config import (
  ExperimentConfig,
  apply_overrides,
  ensure_seed,
  load_config,
  parse_overrides,
)
from spectral_lab.errors import ConfigError


def test_parse_overrides_accepts_both_forms():
  overrides = parse_overrides(['--perturb.max_freq=8', '--noncross.family', 'general', '--seed=5'])
  assert overrides == {'perturb.max_freq': 8, 'noncross.family': 'general', 'seed': 5}


def test_parse_overrides_parses_json_values():
  overrides = parse_overrides(['--perturb.t_grid=[0, 0.001, 0.002]', '--acceptance=true'])
  assert overrides['perturb.t_grid'] == [0, 0.001, 0.002]
  assert overrides['acceptance'] is True


@pytest.mark.parametrize('args', [['stray'], ['--'], ['--perturb.max_freq']])
def test_parse_overrides_rejects_malformed(args):
  with pytest.raises(ConfigError):
    parse_overrides(args)


def test_apply_overrides_copies():
  data = {'perturb': {'norm_sq': 1.0}}
  out = apply_overrides(data, {'perturb.norm_sq': 5.0, 'torus.norm_sq_max': 10})
  assert out == {'perturb': {'norm_sq': 5.0}, 'torus': {'norm_sq_max': 10}}
  assert data == {'perturb': {'norm_sq': 1.0}}


def test_apply_overrides_rejects_scalar_parent():
  with pytest.raises(ConfigError, match='not a section'):
    apply_overrides({'seed': 3}, {'seed.value': 1})


def test_defaults():
  config = load_config()
  assert config == ExperimentConfig()
  assert config.seed is None
  assert config.perturb.sah_modes == ['full', 'conformal']
  assert config.noncross.samples == 201


def test_file_then_overrides(tmp_path):
  path = tmp_path / 'run.json'
  path.write_text(json.dumps({'seed': 1, 'perturb': {'norm_sq': 2.0, 'max_freq': 4}}))
  config = load_config(path, {'perturb.max_freq': 6})
  assert config.seed == 1
  assert config.perturb.norm_sq == 2.0
  assert config.perturb.max_freq == 6


def test_invalid_values_are_config_errors(tmp_path):
  with pytest.raises(ConfigError, match='invalid configuration'):
    load_config(overrides={'sphere.ell_min': 4, 'sphere.ell_max': 2})
  with pytest.raises(ConfigError, match='invalid configuration'):
    load_config(overrides={'perturb.unknown_key': 1})
  bad = tmp_path / 'bad.json'
  bad.write_text('{not json')
  with pytest.raises(ConfigError, match='not valid JSON'):
    load_config(bad)
  with pytest.raises(ConfigError, match='cannot read'):
    load_config(tmp_path / 'missing.json')


def test_section_snapshot():
  config = load_config(overrides={'seed': 4})
  section = config.section('torus')
  assert section['command'] == 'torus'
  assert section['seed'] == 4
  assert section['torus']['norm_sq_max'] == 30.0
  assert 'perturb' not in section


def test_ensure_seed(caplog):
  config = load_config(overrides={'seed': 9})
  assert ensure_seed(config) is config
  with caplog.at_level(logging.WARNING):
    seeded = ensure_seed(load_config())
  assert seeded.seed is not None
  assert f'seed={seeded.seed}' in caplog.text
