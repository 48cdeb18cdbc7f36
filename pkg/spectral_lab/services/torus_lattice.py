"""Flat tori: dual lattices, spectrum enumeration and the algebraic degeneracy criterion.

The eigenfunctions of the flat torus R^n / L are exp(2 pi i kappa . x) for kappa in the
dual lattice, with eigenvalue -4 pi^2 |kappa|^2. An eigenvalue is conformally degenerate
when it has at least two antipodal pairs, and degenerate when the matrices kappa kappa^T
of its representatives are linearly dependent.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from spectral_lab.errors import SingularLatticeError, ZeroEigenvalueError
from spectral_lab.services.exact import ExactMatrix, exact_nullspace, integer_vector
from spectral_lab.services.linalg_core import SymMatrix, sym_index_pairs

logger = logging.getLogger(__name__)

FOUR_PI_SQ = 4.0 * math.pi**2
GROUP_REL_TOL = 1e-9
NEAR_TIE_REL_TOL = 1e-6
_RATIONAL_DENOMINATOR = 10**6

Classification = Literal['nondegenerate', 'conformally_degenerate', 'degenerate']


class Lattice(BaseModel):
  """Full-rank lattice in R^n, n in {2, 3, 4}; ``basis`` lists the generators (columns)."""

  model_config = ConfigDict(frozen=True)

  dim: int = Field(ge=2, le=4)
  basis: list[list[float]]

  @model_validator(mode='after')
  def _check_basis(self) -> 'Lattice':
    if len(self.basis) != self.dim or any(len(col) != self.dim for col in self.basis):
      raise ValueError(f'basis must hold {self.dim} columns of length {self.dim}')
    b = self.matrix
    if not np.all(np.isfinite(b)):
      raise ValueError('basis entries must be finite')
    scale = np.linalg.norm(b)
    if abs(np.linalg.det(b)) <= 1e-12 * scale**self.dim:
      raise SingularLatticeError(f'lattice basis is singular: {self.basis}')
    return self

  @classmethod
  def integer(cls, dim: int = 2) -> 'Lattice':
    """The integer lattice Z^n."""
    return cls(dim=dim, basis=np.eye(dim).tolist())

  @classmethod
  def rectangular(cls, periods: list[float]) -> 'Lattice':
    """Lattice of the box with the given side lengths."""
    return cls(dim=len(periods), basis=np.diag(periods).tolist())

  @classmethod
  def triangular(cls) -> 'Lattice':
    """Hexagonal lattice with unit minimal vectors."""
    return cls(dim=2, basis=[[1.0, 0.0], [-0.5, math.sqrt(3.0) / 2.0]])

  @classmethod
  def from_file(cls, path: str | Path) -> 'Lattice':
    """Load a lattice from a JSON file."""
    return cls.model_validate(json.loads(Path(path).read_text()))

  @property
  def matrix(self) -> np.ndarray:
    """Generators as the columns of an n x n matrix."""
    return np.array(self.basis, dtype=float).T

  @property
  def volume(self) -> float:
    """Covolume |det B|."""
    return float(abs(np.linalg.det(self.matrix)))

  def scaled(self, c: float) -> 'Lattice':
    """The lattice c L."""
    return Lattice(dim=self.dim, basis=(c * self.matrix).T.tolist())

  def rebased(self, unimodular: np.ndarray) -> 'Lattice':
    """Same lattice with generators ``B U`` for an integer matrix U of determinant +-1."""
    u = np.asarray(unimodular)
    if not np.array_equal(u, np.round(u)) or round(abs(np.linalg.det(u))) != 1:
      raise ValueError('change of basis must be integer and unimodular')
    return Lattice(dim=self.dim, basis=(self.matrix @ u).T.tolist())


@dataclass(frozen=True)
class DualLattice:
  """Dual lattice with generators ``B^{-T}`` as columns."""

  basis: np.ndarray

  @property
  def gram(self) -> np.ndarray:
    """Gram matrix of the dual basis."""
    return self.basis.T @ self.basis

  def vector(self, index) -> np.ndarray:
    """Physical dual vector kappa for integer dual coordinates k."""
    return self.basis @ np.asarray(index, dtype=float)


def dual_lattice(lattice: Lattice) -> DualLattice:
  """Inverse-transpose of the primal basis."""
  try:
    dual = np.linalg.inv(lattice.matrix).T
  except np.linalg.LinAlgError as e:
    raise SingularLatticeError(f'cannot invert lattice basis: {e}') from e
  residual = np.max(np.abs(lattice.matrix.T @ dual - np.eye(lattice.dim)))
  if residual > 1e-12 * max(1.0, np.linalg.cond(lattice.matrix)):
    raise SingularLatticeError(f'dual basis residual {residual:.2e} is too large')
  return DualLattice(dual)


class TorusEigenvalue(BaseModel):
  """One eigenvalue of a flat torus with its antipodal representatives."""

  model_config = ConfigDict(frozen=True)

  lattice: Lattice
  norm_sq: float
  norm_sq_exact: str | None = None
  multiplicity: int
  indices: list[tuple[int, ...]]
  representatives: list[tuple[float, ...]]
  near_tie: bool = False

  @property
  def eigenvalue(self) -> float:
    """lambda = -4 pi^2 |kappa|^2."""
    return -FOUR_PI_SQ * self.norm_sq

  @property
  def pairs(self) -> int:
    """Number of antipodal pairs (half the multiplicity)."""
    return len(self.indices)


class DegeneracyReport(BaseModel):
  """Degeneracy classification of one eigenvalue.

  ``witness_kind`` says whether witnesses are pair coefficients mu over antipodal pairs or
  packed upper triangles of relation matrices A in an ordered eigenbasis.
  """

  classification: Classification
  multiplicity: int
  conformal_nullity: int
  full_nullity: int
  witness_kind: Literal['pair_coefficients', 'relation_matrix']
  conformal_witnesses: list[list[int | float]] = Field(default_factory=list)
  full_witnesses: list[list[int | float]] = Field(default_factory=list)

  @model_validator(mode='after')
  def _check_consistency(self) -> 'DegeneracyReport':
    if self.full_nullity > self.conformal_nullity:
      raise ValueError(
        f'full nullity {self.full_nullity} exceeds conformal nullity {self.conformal_nullity}'
      )
    return self


def classify(conformal_nullity: int, full_nullity: int) -> Classification:
  """Classification from the conformal and full nullities."""
  if full_nullity >= 1:
    return 'degenerate'
  if conformal_nullity >= 1:
    return 'conformally_degenerate'
  return 'nondegenerate'


def _half_space_points(lattice: Lattice, norm_sq_max: float) -> tuple[np.ndarray, np.ndarray]:
  """Integer dual coordinates with 0 < |kappa|^2 <= norm_sq_max, one per antipodal pair."""
  gram = dual_lattice(lattice).gram
  lam_min = float(np.linalg.eigvalsh(gram)[0])
  bound = int(math.floor(math.sqrt(norm_sq_max / lam_min) + 1e-9))
  axis = np.arange(-bound, bound + 1)
  ks = np.array(list(itertools.product(axis, repeat=lattice.dim)), dtype=np.int64)
  norms = np.einsum('ij,jk,ik->i', ks, gram, ks)
  keep = (norms > 0) & (norms <= norm_sq_max * (1 + GROUP_REL_TOL))
  ks, norms = ks[keep], norms[keep]
  # First nonzero integer coordinate positive.
  lead = np.argmax(ks != 0, axis=1)
  positive = ks[np.arange(ks.shape[0]), lead] > 0
  return ks[positive], norms[positive]


def _rational_gram(gram: np.ndarray) -> list[list[Fraction]] | None:
  exact = []
  for row in gram:
    exact_row = []
    for x in row:
      f = Fraction(float(x)).limit_denominator(_RATIONAL_DENOMINATOR)
      if abs(float(f) - x) > 1e-12 * max(1.0, abs(x)):
        return None
      exact_row.append(f)
    exact.append(exact_row)
  return exact


def _representative_key(k: tuple[int, ...]) -> tuple:
  # Fewer negative coordinates first, then descending lexicographic order.
  return (sum(1 for x in k if x < 0), tuple(-x for x in k))


def enumerate_spectrum(lattice: Lattice, norm_sq_max: float) -> list[TorusEigenvalue]:
  """All distinct nonzero |kappa|^2 <= norm_sq_max with full multiplicity.

  Norms are grouped exactly when the dual Gram matrix is rational and with relative
  tolerance 1e-9 otherwise; close but distinct irrational groups get ``near_tie``.
  """
  if norm_sq_max <= 0:
    raise ValueError('norm_sq_max must be positive')
  dual = dual_lattice(lattice)
  ks, norms = _half_space_points(lattice, norm_sq_max)
  exact_gram = _rational_gram(dual.gram)

  groups: list[tuple[float, str | None, list[tuple[int, ...]]]] = []
  if exact_gram is not None:
    by_norm: dict[Fraction, list[tuple[int, ...]]] = {}
    n = lattice.dim
    for k in map(tuple, ks.tolist()):
      value = sum(exact_gram[i][j] * k[i] * k[j] for i in range(n) for j in range(n))
      if value <= norm_sq_max:
        by_norm.setdefault(value, []).append(k)
    for value in sorted(by_norm):
      groups.append((float(value), str(value), by_norm[value]))
  else:
    order = np.argsort(norms, kind='stable')
    current: list[tuple[int, ...]] = []
    anchor = None
    for idx in order:
      value = float(norms[idx])
      if anchor is not None and value - anchor > GROUP_REL_TOL * (1 + anchor):
        groups.append((anchor, None, current))
        current = []
        anchor = None
      if anchor is None:
        anchor = value
      current.append(tuple(int(x) for x in ks[idx]))
    if current:
      groups.append((anchor, None, current))
    groups = [g for g in groups if g[0] <= norm_sq_max]

  spectrum = []
  for i, (value, exact, members) in enumerate(groups):
    near_tie = False
    if exact is None:
      for j in (i - 1, i + 1):
        if 0 <= j < len(groups) and abs(groups[j][0] - value) <= NEAR_TIE_REL_TOL * (1 + value):
          near_tie = True
    members = sorted(members, key=_representative_key)
    spectrum.append(
      TorusEigenvalue(
        lattice=lattice,
        norm_sq=value,
        norm_sq_exact=exact,
        multiplicity=2 * len(members),
        indices=members,
        representatives=[tuple(float(x) for x in dual.vector(k)) for k in members],
        near_tie=near_tie,
      )
    )
  if any(e.near_tie for e in spectrum):
    logger.warning('irrational lattice has nearly equal dual norms; check near_tie flags')
  logger.debug('enumerated %d eigenvalues up to |kappa|^2 = %g', len(spectrum), norm_sq_max)
  return spectrum


def dual_points_in_ball(lattice: Lattice, radius: float) -> tuple[np.ndarray, np.ndarray]:
  """Half-space representatives of nonzero dual vectors with |kappa| <= radius.

  Returns:
      Integer coordinates ``(count, n)`` and physical vectors ``(count, n)``, ordered by
      increasing norm.
  """
  ks, norms = _half_space_points(lattice, radius**2)
  order = np.lexsort((*(ks[:, j] for j in reversed(range(lattice.dim))), np.round(norms, 12)))
  ks = ks[order]
  return ks, ks @ dual_lattice(lattice).basis.T


def full_degeneracy_system(eig: TorusEigenvalue) -> ExactMatrix:
  """Rows are the packed entries of k_j k_j^T; column j belongs to representative j."""
  pairs = sym_index_pairs(eig.lattice.dim)
  return ExactMatrix.from_rows([[k[a] * k[b] for k in eig.indices] for a, b in pairs])


def torus_degeneracy(eig: TorusEigenvalue) -> DegeneracyReport:
  """Classify a flat-torus eigenvalue.

  The conformal system is the single equation sum mu_j = 0; the full system is
  sum mu_j kappa_j kappa_j^T = 0, solved exactly in integer dual coordinates.

  Raises:
      ZeroEigenvalueError: For the zero eigenvalue.
  """
  if eig.norm_sq <= 0:
    raise ZeroEigenvalueError('the zero eigenvalue cannot be classified')
  m = eig.pairs
  conformal = [[1] + [-int(i == j) for i in range(1, m)] for j in range(1, m)]
  full = [integer_vector(v) for v in exact_nullspace(full_degeneracy_system(eig))]
  return DegeneracyReport(
    classification=classify(len(conformal), len(full)),
    multiplicity=eig.multiplicity,
    conformal_nullity=len(conformal),
    full_nullity=len(full),
    witness_kind='pair_coefficients',
    conformal_witnesses=conformal,
    full_witnesses=full,
  )


def relation_to_eigenbasis_matrix(eig: TorusEigenvalue, mu) -> SymMatrix:
  """diag(mu_1, mu_1, mu_2, mu_2, ...) in the ordered basis (cos, sin) per representative."""
  mu = list(mu)
  if len(mu) != eig.pairs:
    raise ValueError(f'expected {eig.pairs} pair coefficients, got {len(mu)}')
  return SymMatrix.diag(np.repeat(np.asarray(mu, dtype=float), 2))


def multiplicity_exclusions_hold(report: DegeneracyReport) -> bool:
  """No conformal degeneracy below multiplicity 4 and no degeneracy below 7."""
  if report.multiplicity < 4 and report.conformal_nullity > 0:
    return False
  if report.multiplicity < 7 and report.full_nullity > 0:
    return False
  return True


def degeneracy_threshold(dim: int) -> int:
  """Multiplicity from which every flat-torus eigenvalue in dimension ``dim`` is degenerate."""
  return dim * (dim + 1) + 2
