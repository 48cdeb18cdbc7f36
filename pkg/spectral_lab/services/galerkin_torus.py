"""Fourier-Galerkin eigensolver for the Laplace-Beltrami operator of a torus metric.

The trial space is spanned by the constant and cos/sin(2 pi kappa.x) for dual vectors
with |kappa| <= max_freq. With the weighted Rayleigh quotient, the stiffness and mass
matrices are

    S_ab = int g^{jk} d_j phi_a d_k phi_b sqrt|g| dx,    B_ab = int phi_a phi_b sqrt|g| dx,

evaluated by the trapezoidal rule on a periodic grid.
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from pydantic import BaseModel

from spectral_lab.errors import ClusterIsolationError, GridTooSmallError, ResourceLimitError
from spectral_lab.services.eigenspace import EigenspaceBasis
from spectral_lab.services.fields import MetricField, MetricGrid, PeriodicGrid, TrigModes
from spectral_lab.services.linalg_core import SymMatrix, generalized_sym_eig
from spectral_lab.services.torus_lattice import Lattice, dual_points_in_ball

logger = logging.getLogger(__name__)

MAX_MODES = 2000
CLUSTER_REL_TOL = 1e-6
ISOLATION_FACTOR = 10.0


def galerkin_modes(lattice: Lattice, max_freq: float, max_modes: int = MAX_MODES) -> TrigModes:
  """Constant plus cos/sin of every dual vector with |kappa| <= max_freq."""
  ks, _ = dual_points_in_ball(lattice, max_freq)
  modes = TrigModes(lattice, ks, include_constant=True)
  if modes.size > max_modes:
    raise ResourceLimitError(
      f'Galerkin basis for max_freq {max_freq}', required=modes.size, limit=max_modes
    )
  return modes


def required_grid_size(modes: TrigModes, metric: MetricField) -> int:
  """Smallest grid that integrates products of modes against the metric exactly."""
  return 2 * (2 * modes.max_index + metric.max_index) + 1


@dataclass(frozen=True)
class GalerkinSystem:
  """Stiffness S and mass B of the Galerkin discretization, with the grid they used."""
  metric: MetricField
  modes: TrigModes
  metric_grid: MetricGrid
  stiffness: np.ndarray
  mass: np.ndarray

  @property
  def grid(self) -> PeriodicGrid:
    """Quadrature grid of the assembly."""
    return self.metric_grid.grid

  def solve(self) -> tuple[np.ndarray, np.ndarray]:
    """Rayleigh quotients nu (ascending) and B-orthonormal coefficient vectors."""
    return generalized_sym_eig(self.stiffness, self.mass, eigenvectors=True)


def assemble_system(
  metric: MetricField,
  max_freq: float,
  grid_size: int | None = None,
  max_modes: int = MAX_MODES,
) -> GalerkinSystem:
  """Build stiffness and mass matrices.

  Args:
      metric: The metric; must be positive definite at every node.
      max_freq: Largest |kappa| in the trial space.
      grid_size: Nodes per axis; defaults to twice the exactness bound.
      max_modes: Cap on the number of trial functions.

  Raises:
      GridTooSmallError: If ``grid_size`` is below the exactness bound.
      NotPositiveDefiniteError: If the metric degenerates at a node.
  """
  modes = galerkin_modes(metric.lattice, max_freq, max_modes)
  required = required_grid_size(modes, metric)
  if grid_size is None:
    grid_size = 2 * required
  elif grid_size < required:
    raise GridTooSmallError(grid_size, required)
  metric_grid = metric.on_grid(PeriodicGrid(metric.lattice, grid_size))

  phi = modes.values(metric_grid.grid)
  dphi = modes.partials(metric_grid.grid)
  density = metric_grid.density
  mass = (phi * density) @ phi.T
  flux = np.einsum('jkN,kMN->jMN', metric_grid.ginv * density, dphi)
  stiffness = np.einsum('jMN,jLN->ML', dphi, flux, optimize=True)
  logger.debug('assembled %d modes on a %d^%d grid', modes.size, grid_size, metric.dim)
  return GalerkinSystem(
    metric=metric,
    modes=modes,
    metric_grid=metric_grid,
    stiffness=0.5 * (stiffness + stiffness.T),
    mass=0.5 * (mass + mass.T),
  )


def assemble(
  metric: MetricField, max_freq: float, grid_size: int | None = None
) -> tuple[SymMatrix, SymMatrix]:
  """Stiffness and mass matrices as packed symmetric matrices."""
  system = assemble_system(metric, max_freq, grid_size)
  return SymMatrix.from_dense(system.stiffness), SymMatrix.from_dense(system.mass)


class SpectrumSlice(BaseModel):
  """Galerkin eigenvalues lambda = -nu, listed by increasing nu (the zero mode first)."""

  eigenvalues: list[float]
  basis_size: int
  grid_size: int
  window: tuple[float, float] | None = None

  def clusters(self, rel_tol: float = CLUSTER_REL_TOL) -> list[tuple[float, int]]:
    """(mean eigenvalue, multiplicity) of consecutive groups of equal eigenvalues."""
    groups = group_clusters(np.array(self.eigenvalues), rel_tol)
    return [(float(np.mean(g)), len(g)) for g in groups]

  def to_frame(self) -> pd.DataFrame:
    """Eigenvalues as an ``index, eigenvalue`` table."""
    return pd.DataFrame({'index': range(len(self.eigenvalues)), 'eigenvalue': self.eigenvalues})


def group_clusters(values: np.ndarray, rel_tol: float = CLUSTER_REL_TOL) -> list[np.ndarray]:
  """Split an ordered sequence where consecutive values differ by more than ``rel_tol``."""
  if values.size == 0:
    return []
  groups, start = [], 0
  for i in range(1, values.size):
    a, b = values[i - 1], values[i]
    if abs(b - a) > rel_tol * max(abs(a), abs(b)) + 1e-12:
      groups.append(values[start:i])
      start = i
  groups.append(values[start:])
  return groups


def spectrum(
  metric: MetricField,
  max_freq: float,
  window: tuple[float, float] | None = None,
  grid_size: int | None = None,
) -> SpectrumSlice:
  """Galerkin eigenvalues, optionally restricted to ``window = (lambda_lo, lambda_hi)``."""
  system = assemble_system(metric, max_freq, grid_size)
  nu = generalized_sym_eig(system.stiffness, system.mass)
  eigenvalues = -np.asarray(nu)
  if window is not None:
    lo, hi = window
    eigenvalues = eigenvalues[(eigenvalues >= lo) & (eigenvalues <= hi)]
  return SpectrumSlice(
    eigenvalues=eigenvalues.tolist(),
    basis_size=system.modes.size,
    grid_size=system.grid.size,
    window=window,
  )


def find_cluster(nu: np.ndarray, target: float, size: int) -> np.ndarray:
  """Indices of the ``size`` Rayleigh quotients nearest ``-target``, checked for isolation.

  Raises:
      ClusterIsolationError: If the neighbours are closer than ten cluster widths, or than
          the clustering tolerance, to the cluster.
  """
  if size < 1 or size > nu.size:
    raise ClusterIsolationError(f'cannot take a cluster of {size} from {nu.size} eigenvalues')
  target_nu = -target
  idx = np.sort(np.argsort(np.abs(nu - target_nu), kind='stable')[:size])
  cluster = nu[idx]
  width = float(np.ptp(cluster))
  neighbours = []
  if idx[0] > 0:
    neighbours.append(cluster[0] - nu[idx[0] - 1])
  if idx[-1] + 1 < nu.size:
    neighbours.append(nu[idx[-1] + 1] - cluster[-1])
  gap = min(neighbours, default=np.inf)
  needed = max(ISOLATION_FACTOR * width, CLUSTER_REL_TOL * abs(target_nu))
  if gap < needed:
    reach = 2 * width + gap + needed
    groups = group_clusters(nu, CLUSTER_REL_TOL)
    near = [len(g) for g in groups if abs(np.mean(g) - target_nu) <= reach]
    raise ClusterIsolationError(
      f'cluster of {size} near lambda = {target:.6g} is not isolated '
      f'(width {width:.3e}, gap {gap:.3e}); clusters found nearby have sizes {near}'
    )
  return idx


def cluster_eigenvalues(
  metric: MetricField, max_freq: float, target: float, size: int, grid_size: int | None = None
) -> np.ndarray:
  """The isolated cluster of ``size`` eigenvalues nearest ``target``, ascending in lambda."""
  system = assemble_system(metric, max_freq, grid_size)
  nu = np.asarray(generalized_sym_eig(system.stiffness, system.mass))
  return np.sort(-nu[find_cluster(nu, target, size)])


def eigenspace_samples(
  metric: MetricField,
  max_freq: float,
  target: float,
  mult_expected: int,
  grid_size: int | None = None,
  assembly_grid: int | None = None,
) -> EigenspaceBasis:
  """B-orthonormal basis of the isolated cluster nearest ``target``, sampled on a grid.

  Args:
      metric: Torus metric.
      max_freq: Galerkin truncation.
      target: Eigenvalue (negative) to look for.
      mult_expected: Cluster size.
      grid_size: Sampling grid; defaults to the assembly grid.
      assembly_grid: Quadrature grid for the Galerkin matrices.
  """
  system = assemble_system(metric, max_freq, assembly_grid)
  nu, vectors = system.solve()
  idx = find_cluster(nu, target, mult_expected)
  size = grid_size or system.grid.size
  return EigenspaceBasis(
    metric=metric,
    grid=PeriodicGrid(metric.lattice, size),
    modes=system.modes,
    coefficients=vectors[:, idx],
    eigenvalues=-nu[idx],
    representation='grid-samples',
  )
