"""Sweeps of low eigenvalues along k-parameter families of torus metrics.

A family is g(s) = g0 + sum_i s_i h_i over a box of s values. Every sample computes the
lowest nonzero Galerkin eigenvalues; the sweep records how close adjacent eigenvalues come.
Starting from a randomly split metric, a 1-parameter family should never close a gap.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from spectral_lab.errors import ConfigError
from spectral_lab.services.fields import MetricField, PerturbationTensor
from spectral_lab.services.galerkin_torus import spectrum
from spectral_lab.services.parallel import map_ordered
from spectral_lab.services.perturbation_lab import random_direction
from spectral_lab.services.torus_lattice import Lattice

logger = logging.getLogger(__name__)

GAP_REL_TOL = 1e-9

FamilyKind = Literal['conformal', 'general', 'constant']
Assertion = Literal['passed', 'failed', 'skipped']


class NoncrossConfig(BaseModel):
  """Family g(s) = g0 + sum s_i h_i and the sweep over it."""

  model_config = ConfigDict(extra='forbid')

  lattice: Lattice = Field(default_factory=lambda: Lattice.integer(2))
  family: FamilyKind = 'conformal'
  params: int = Field(1, ge=1, le=2)
  samples: int = Field(201, ge=2)
  s_max: float = Field(1.0, gt=0)
  num_eigenvalues: int = Field(12, ge=2)
  max_freq: float = Field(4.0, gt=0)
  grid_size: int | None = None
  start: Literal['randomized', 'flat'] = 'randomized'
  start_amplitude: float = Field(0.05, ge=0)
  direction_amplitude: float = Field(0.1, ge=0)
  direction_radius: float = Field(2.0, gt=0)
  runs: int = Field(10, ge=1)

  @model_validator(mode='after')
  def _check_size(self) -> 'NoncrossConfig':
    if self.samples**self.params > 100_000:
      raise ValueError(f'{self.samples}^{self.params} samples exceed the sweep limit of 100000')
    return self


class NoncrossRun(BaseModel):
  """Gap statistics of one seeded family."""

  seed: int
  simple_start: bool
  start_min_gap: float
  min_gap: float
  argmin_s: list[float]
  argmin_index: int
  gap_minima: list[float]
  assertion: Assertion


class NoncrossSummary(BaseModel):
  """Gap statistics of every seeded family."""
  family: FamilyKind
  params: int
  samples: int
  num_eigenvalues: int
  runs: list[NoncrossRun]

  @computed_field
  @property
  def min_gap(self) -> float:
    """Smallest gap over every run."""
    return min(r.min_gap for r in self.runs)

  @computed_field
  @property
  def assertion(self) -> Assertion:
    """passed if any run passed and none failed."""
    states = {r.assertion for r in self.runs}
    if 'failed' in states:
      return 'failed'
    return 'passed' if 'passed' in states else 'skipped'


@dataclass(frozen=True)
class NoncrossResult:
  """Summary plus one eigenvalue trajectory table per seed."""
  summary: NoncrossSummary
  trajectories: dict[int, pd.DataFrame]


def sample_points(params: int, samples: int, s_max: float) -> np.ndarray:
  """Tensor grid on [-s_max, s_max]^params, shape ``(P, k)``.

  Each axis holds ``samples`` evenly spaced points plus the origin, so an even count gains one.
  """
  axis = np.linspace(-s_max, s_max, samples)
  axis[np.abs(axis) < 1e-12 * s_max] = 0.0
  axis = np.union1d(axis, [0.0])
  return np.array(list(itertools.product(axis, repeat=params)))


def start_metric(config: NoncrossConfig, rng: np.random.Generator) -> MetricField:
  """g0: the flat metric or a random perturbation of it."""
  flat = MetricField.flat(config.lattice)
  if config.start == 'flat' or config.start_amplitude == 0:
    return flat
  h = random_direction(
    flat, rng, config.direction_radius, conformal=False, amplitude=config.start_amplitude
  )
  return flat.perturbed(h, 1.0)


def family_directions(
  config: NoncrossConfig, g0: MetricField, rng: np.random.Generator
) -> list[PerturbationTensor]:
  """Family directions h_i; zero tensors for the constant family."""
  if config.family == 'constant':
    return [PerturbationTensor.zero(g0.dim) for _ in range(config.params)]
  return [
    random_direction(
      g0,
      rng,
      config.direction_radius,
      conformal=config.family == 'conformal',
      amplitude=config.direction_amplitude,
    )
    for _ in range(config.params)
  ]


def lowest_nonzero(
  metric: MetricField, count: int, max_freq: float, grid_size: int | None = None
) -> np.ndarray:
  """The ``count`` eigenvalues closest to zero after the constant mode, descending."""
  values = np.array(spectrum(metric, max_freq, grid_size=grid_size).eigenvalues)
  if values.size < count + 1:
    raise ConfigError(
      f'max_freq {max_freq} gives {values.size - 1} nonzero eigenvalues, fewer than {count}'
    )
  return values[1 : count + 1]


def adjacent_gaps(values: np.ndarray) -> np.ndarray:
  """lambda_i - lambda_{i+1} along the last axis, nonnegative for descending values."""
  return values[..., :-1] - values[..., 1:]


def family_metric(g0: MetricField, directions: list[PerturbationTensor], s) -> MetricField:
  """g0 + sum s_i h_i, with conformal directions taken relative to g0."""
  metric = g0
  for s_i, h in zip(s, directions):
    metric = metric.perturbed(h.as_explicit(g0), float(s_i))
  return metric


def sweep_family(config: NoncrossConfig, seed: int) -> tuple[NoncrossRun, pd.DataFrame]:
  """Sweep one seeded family and summarize its gaps."""
  rng = np.random.default_rng(seed)
  g0 = start_metric(config, rng)
  directions = family_directions(config, g0, rng)
  n_eig = config.num_eigenvalues

  start = lowest_nonzero(g0, n_eig, config.max_freq, config.grid_size)
  start_gaps = adjacent_gaps(start)
  start_tol = GAP_REL_TOL * np.abs(start[1:])
  simple_start = bool(np.all(start_gaps > start_tol))

  points = sample_points(config.params, config.samples, config.s_max)
  values = np.stack(
    map_ordered(
      lambda s: lowest_nonzero(
        family_metric(g0, directions, s), n_eig, config.max_freq, config.grid_size
      ),
      points,
    )
  )
  gaps = adjacent_gaps(values)
  flat_index = int(np.argmin(gaps))
  sample, index = np.unravel_index(flat_index, gaps.shape)
  min_gap = float(gaps[sample, index])

  if not simple_start:
    logger.warning(
      'seed %d: start metric has a multiple eigenvalue among the lowest %d; '
      'skipping the gap assertion',
      seed,
      n_eig,
    )
    assertion: Assertion = 'skipped'
  elif config.params >= 2:
    assertion = 'skipped'
  else:
    scale = float(np.max(np.abs(values)))
    assertion = 'passed' if min_gap > GAP_REL_TOL * scale else 'failed'

  run = NoncrossRun(
    seed=seed,
    simple_start=simple_start,
    start_min_gap=float(start_gaps.min()),
    min_gap=min_gap,
    argmin_s=points[sample].tolist(),
    argmin_index=int(index),
    gap_minima=gaps.min(axis=0).tolist(),
    assertion=assertion,
  )
  columns = {f's{i + 1}': points[:, i] for i in range(config.params)}
  columns |= {f'lambda_{i + 1}': values[:, i] for i in range(n_eig)}
  logger.info('seed %d: min gap %.3e at s = %s (%s)', seed, min_gap, run.argmin_s, assertion)
  return run, pd.DataFrame(columns)


def noncrossing_sweep(config: NoncrossConfig, seed: int = 0) -> NoncrossResult:
  """Run ``config.runs`` families seeded ``seed, seed + 1, ...``."""
  runs = []
  trajectories = {}
  for run_seed in range(seed, seed + config.runs):
    run, frame = sweep_family(config, run_seed)
    runs.append(run)
    trajectories[run_seed] = frame
  summary = NoncrossSummary(
    family=config.family,
    params=config.params,
    samples=config.samples,
    num_eigenvalues=config.num_eigenvalues,
    runs=runs,
  )
  return NoncrossResult(summary, trajectories)
