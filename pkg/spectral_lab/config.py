"""Experiment configuration: one JSON file per invocation plus dot-path overrides.

Sources, in increasing precedence: model defaults, the ``--config`` file, and flags such as
``--perturb.max_freq=8`` whose values are parsed as JSON, falling back to strings.
"""

import json
import logging
import secrets
from pathlib import Path
from typing import Callable, Literal, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from spectral_lab.errors import ConfigError
from spectral_lab.services.noncrossing import NoncrossConfig
from spectral_lab.services.sphere_poly import DEFAULT_CELL_BUDGET
from spectral_lab.services.torus_lattice import Lattice

logger = logging.getLogger(__name__)

T = TypeVar('T')


class TorusConfig(BaseModel):
  """Exact spectrum and degeneracy table of a flat torus."""

  model_config = ConfigDict(extra='forbid')

  lattice: Lattice = Field(default_factory=lambda: Lattice.integer(2))
  lattice_file: str | None = None
  norm_sq_max: float = Field(30.0, gt=0)
  with_witnesses: bool = True


class SphereConfig(BaseModel):
  """Rank certificates on S^n over a range of degrees."""

  model_config = ConfigDict(extra='forbid')

  n: Literal[2, 3] = 2
  ell_min: int = Field(1, ge=1)
  ell_max: int = Field(5, ge=1)
  gradient: bool = True
  with_kernel: bool = False
  cell_budget: int = Field(DEFAULT_CELL_BUDGET, gt=0)
  table_ell_max: int = Field(30, ge=1)

  @model_validator(mode='after')
  def _check_range(self) -> 'SphereConfig':
    if self.ell_min > self.ell_max:
      raise ValueError(f'ell_min {self.ell_min} exceeds ell_max {self.ell_max}')
    return self


class PerturbConfig(BaseModel):
  """First-order splitting experiment at one eigenvalue cluster of a torus metric."""

  model_config = ConfigDict(extra='forbid')

  lattice: Lattice = Field(default_factory=lambda: Lattice.integer(2))
  metric_file: str | None = None
  norm_sq: float = Field(1.0, gt=0)
  multiplicity: int | None = Field(None, ge=1)
  basis: Literal['exact', 'galerkin'] = 'exact'
  max_freq: float | None = Field(None, gt=0)
  grid_size: int | None = Field(None, ge=4)
  t_grid: list[float] = Field(default_factory=lambda: [0.0, 1e-3, 2e-3, 4e-3, 8e-3])
  direction: Literal['random', 'conformal', 'scaling'] = 'random'
  direction_radius: float = Field(1.0, gt=0)
  direction_amplitude: float = Field(0.1, gt=0)
  num_directions: int | None = Field(None, ge=1)
  sah_modes: list[Literal['full', 'conformal']] = Field(
    default_factory=lambda: ['full', 'conformal']
  )
  rel_tol: float = Field(1e-8, gt=0, lt=1)
  relation_trials: int = Field(5, ge=0)


class ExperimentConfig(BaseModel):
  """Complete configuration of one CLI invocation."""

  model_config = ConfigDict(extra='forbid')

  seed: int | None = Field(None, ge=0)
  output_dir: str = 'runs'
  acceptance: bool = False
  torus: TorusConfig = Field(default_factory=TorusConfig)
  sphere: SphereConfig = Field(default_factory=SphereConfig)
  perturb: PerturbConfig = Field(default_factory=PerturbConfig)
  noncross: NoncrossConfig = Field(default_factory=NoncrossConfig)

  def section(self, command: str) -> dict:
    """Snapshot of the settings a command depends on."""
    return {
      'command': command,
      'seed': self.seed,
      'acceptance': self.acceptance,
      command: getattr(self, command).model_dump(mode='json'),
    }


def parse_value(raw: str):
  """JSON value if ``raw`` parses, the raw string otherwise."""
  try:
    return json.loads(raw)
  except json.JSONDecodeError:
    return raw


def parse_overrides(args: list[str]) -> dict[str, object]:
  """Collect ``--a.b=value`` and ``--a.b value`` flags into ``{'a.b': value}``.

  Raises:
      ConfigError: On a token that is not a dot-path flag or a flag without a value.
  """
  overrides: dict[str, object] = {}
  tokens = list(args)
  while tokens:
    token = tokens.pop(0)
    if not token.startswith('--') or len(token) == 2:
      raise ConfigError(f'unexpected argument {token!r}; overrides look like --perturb.max_freq=8')
    key, sep, raw = token[2:].partition('=')
    if not sep:
      if not tokens:
        raise ConfigError(f'override --{key} needs a value')
      raw = tokens.pop(0)
    overrides[key] = parse_value(raw)
  return overrides


def apply_overrides(data: dict, overrides: dict[str, object]) -> dict:
  """Set every dot-path in ``overrides`` inside a copy of ``data``."""
  out = json.loads(json.dumps(data))
  for path, value in overrides.items():
    *parents, leaf = path.split('.')
    node = out
    for name in parents:
      child = node.setdefault(name, {})
      if not isinstance(child, dict):
        raise ConfigError(f'cannot override {path}: {name} is not a section')
      node = child
    node[leaf] = value
  return out


def load_config(
  path: str | Path | None = None, overrides: dict[str, object] | None = None
) -> ExperimentConfig:
  """Build an :class:`ExperimentConfig` from a file and overrides.

  Raises:
      ConfigError: On an unreadable file, invalid JSON or a validation failure.
  """
  data: dict = {}
  if path is not None:
    try:
      data = json.loads(Path(path).read_text())
    except OSError as e:
      raise ConfigError(f'cannot read config {path}: {e}') from e
    except json.JSONDecodeError as e:
      raise ConfigError(f'config {path} is not valid JSON: {e}') from e
    if not isinstance(data, dict):
      raise ConfigError(f'config {path} must hold a JSON object')
  data = apply_overrides(data, overrides or {})
  try:
    return ExperimentConfig.model_validate(data)
  except ValidationError as e:
    raise ConfigError(f'invalid configuration:\n{e}') from e


def ensure_seed(config: ExperimentConfig) -> ExperimentConfig:
  """Config with a seed, drawing and logging a fresh one when none was given."""
  if config.seed is not None:
    return config
  seed = secrets.randbelow(2**31)
  logger.warning('no seed configured; using seed %d (pass --seed=%d to repeat)', seed, seed)
  return config.model_copy(update={'seed': seed})


def load_input(loader: Callable[[str], T], path: str, what: str) -> T:
  """Run ``loader(path)`` for an input file, turning read and schema errors into ConfigError."""
  try:
    return loader(path)
  except OSError as e:
    raise ConfigError(f'cannot read {what} file {path}: {e}') from e
  except ValueError as e:
    raise ConfigError(f'invalid {what} file {path}: {e}') from e
