"""Orthonormal eigenbases sampled on a periodic grid."""

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Literal

import numpy as np

from spectral_lab.errors import BasisNotOrthonormalError
from spectral_lab.services.fields import MetricField, MetricGrid, PeriodicGrid, TrigModes
from spectral_lab.services.torus_lattice import FOUR_PI_SQ, TorusEigenvalue

logger = logging.getLogger(__name__)

GRAM_TOL = 1e-8
GRID_RESIDUAL_TOL = 1e-6
EXACT_RESIDUAL_TOL = 1e-12

# Grid-sampled bases carry the first two kinds; exact sphere bases (sphere_poly.HarmonicBasis)
# are harmonic polynomials and never sampled on a torus grid.
GridRepresentation = Literal['torus-frequency', 'grid-samples']
Representation = Literal['torus-frequency', 'grid-samples', 'polynomial']


@dataclass(frozen=True)
class EigenspaceBasis:
  """Ordered basis u_1..u_m of an eigenspace (or of a tight eigenvalue cluster).

  Every function is band-limited: ``coefficients`` (modes x m) expresses u_a in ``modes``,
  so values and exact partial derivatives can be produced on any grid.

  Attributes:
      eigenvalues: Eigenvalue of each basis function (all equal for an exact eigenspace).
      representation: ``torus-frequency`` for exact flat-torus bases, ``grid-samples`` for
          bases computed by the Galerkin solver. Polynomial bases on spheres are
          :class:`spectral_lab.services.sphere_poly.HarmonicBasis`.
  """

  metric: MetricField
  grid: PeriodicGrid
  modes: TrigModes
  coefficients: np.ndarray
  eigenvalues: np.ndarray
  representation: GridRepresentation

  @property
  def m(self) -> int:
    """Number of basis functions."""
    return self.coefficients.shape[1]

  @property
  def dim(self) -> int:
    """Torus dimension n."""
    return self.metric.dim

  @property
  def eigenvalue(self) -> float:
    """Mean eigenvalue of the cluster."""
    return float(np.mean(self.eigenvalues))

  @property
  def u_band(self) -> int:
    """Largest |k_i| among the modes the basis uses."""
    used = np.any(np.abs(self.coefficients) > 0, axis=1)
    offset = int(self.modes.include_constant)
    idx = self.modes.indices[used[offset::2] | used[offset + 1 :: 2]]
    return int(np.abs(idx).max(initial=0))

  @cached_property
  def values(self) -> np.ndarray:
    """u_a at the nodes, shape ``(m, N)``."""
    return self.coefficients.T @ self.modes.values(self.grid)

  @cached_property
  def partials(self) -> np.ndarray:
    """d_j u_a at the nodes, shape ``(n, m, N)``."""
    return np.einsum('ma,jmN->jaN', self.coefficients, self.modes.partials(self.grid))

  @cached_property
  def metric_grid(self) -> MetricGrid:
    """The metric sampled on the basis grid."""
    return self.metric.on_grid(self.grid)

  @classmethod
  def from_torus_eigenvalue(
    cls, eig: TorusEigenvalue, grid_size: int | None = None
  ) -> 'EigenspaceBasis':
    """Exact basis sqrt(2/vol) (cos, sin)(2 pi kappa.x) per representative, flat metric."""
    modes = TrigModes(eig.lattice, np.array(eig.indices, dtype=np.int64), include_constant=False)
    size = grid_size or default_grid_size(modes.max_index)
    scale = math.sqrt(2.0 / eig.lattice.volume)
    return cls(
      metric=MetricField.flat(eig.lattice),
      grid=PeriodicGrid(eig.lattice, size),
      modes=modes,
      coefficients=scale * np.eye(modes.size),
      eigenvalues=np.full(modes.size, -FOUR_PI_SQ * eig.norm_sq),
      representation='torus-frequency',
    )

  def resampled(self, size: int) -> 'EigenspaceBasis':
    """Same functions sampled on a grid of ``size`` nodes per axis."""
    if size == self.grid.size:
      return self
    return replace(self, grid=PeriodicGrid(self.grid.lattice, size))

  def rotated(self, q: np.ndarray) -> 'EigenspaceBasis':
    """Basis v_b = sum_a u_a Q_ab for an orthogonal Q; eigenvalue labels collapse to the mean."""
    return replace(
      self, coefficients=self.coefficients @ q, eigenvalues=np.full(self.m, self.eigenvalue)
    )

  def subset(self, columns: list[int]) -> 'EigenspaceBasis':
    """Basis of the chosen columns."""
    return replace(
      self, coefficients=self.coefficients[:, columns], eigenvalues=self.eigenvalues[columns]
    )

  def direct_sum(self, other: 'EigenspaceBasis') -> 'EigenspaceBasis':
    """Concatenate two bases with the same modes, metric and grid."""
    if not np.array_equal(self.modes.indices, other.modes.indices):
      raise ValueError('bases must share their modes')
    return replace(
      self,
      coefficients=np.hstack([self.coefficients, other.coefficients]),
      eigenvalues=np.concatenate([self.eigenvalues, other.eigenvalues]),
    )

  def gram(self) -> np.ndarray:
    """Gram matrix <u_a, u_b> under d mu_g."""
    return (self.values * self.metric_grid.density) @ self.values.T

  def laplacian_values(self) -> np.ndarray:
    """Delta_g u_a at the nodes: exact for flat metrics, spectral otherwise."""
    if self.metric.is_flat():
      factors = self._flat_laplacian_factors()[:, None]
      return self.coefficients.T @ (factors * self.modes.values(self.grid))
    return np.stack([self.metric_grid.laplacian(u) for u in self.values])

  def _flat_laplacian_factors(self) -> np.ndarray:
    ginv = np.linalg.inv(self.metric_grid.g[:, :, 0])
    kappas = self.modes.kappas
    per_freq = -4.0 * np.pi**2 * np.einsum('ij,jk,ik->i', kappas, ginv, kappas)
    factors = np.repeat(per_freq, 2)
    return np.concatenate([[0.0], factors]) if self.modes.include_constant else factors

  def eigen_residuals(self) -> np.ndarray:
    """||Delta_g u_a - lambda_a u_a|| / (|lambda_a| ||u_a||) in the d mu_g norm."""
    diff = self.laplacian_values() - self.eigenvalues[:, None] * self.values
    w = self.metric_grid.density
    num = np.sqrt(np.sum(w * diff**2, axis=1))
    den = np.abs(self.eigenvalues) * np.sqrt(np.sum(w * self.values**2, axis=1))
    return num / den

  def validate(self, gram_tol: float = GRAM_TOL, check_residual: bool = True) -> None:
    """Check orthonormality and, optionally, the eigen-equation.

    Raises:
        BasisNotOrthonormalError: On a Gram deviation above ``gram_tol`` or a residual above
            the tolerance of the representation.
    """
    deviation = float(np.max(np.abs(self.gram() - np.eye(self.m)), initial=0.0))
    if deviation > gram_tol:
      raise BasisNotOrthonormalError(f'Gram matrix deviates from identity by {deviation:.3e}')
    if check_residual:
      tol = EXACT_RESIDUAL_TOL if self.representation == 'torus-frequency' else GRID_RESIDUAL_TOL
      worst = float(np.max(self.eigen_residuals(), initial=0.0))
      if worst > tol:
        raise BasisNotOrthonormalError(f'eigen-equation residual {worst:.3e} exceeds {tol:.0e}')


def default_grid_size(u_band: int, h_band: int | None = None) -> int:
  """Even grid size resolving products of basis functions with a perturbation of ``h_band``."""
  h_band = 2 * u_band + 3 if h_band is None else h_band
  size = 2 * (u_band + h_band) + 2
  return max(size, 4 * u_band + 2)
