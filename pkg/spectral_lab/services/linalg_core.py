"""Dense linear-algebra substrate shared by every service.

Symmetric matrices are stored as packed upper triangles, null spaces come from
an SVD with an explicit relative threshold, and generalized symmetric eigenproblems
are reduced with a Cholesky factor of the mass matrix.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg

from spectral_lab.errors import NonFiniteInputError, NotPositiveDefiniteError

logger = logging.getLogger(__name__)

EXACT_REL_TOL = 1e-10
SAMPLED_REL_TOL = 1e-8


@lru_cache(maxsize=64)
def sym_index_pairs(m: int) -> tuple[tuple[int, int], ...]:
  """Index pairs (a, b) with a <= b, in row-major order of the upper triangle."""
  return tuple((a, b) for a in range(m) for b in range(a, m))


def sym_size(m: int) -> int:
  """Number of independent entries of an m x m symmetric matrix."""
  return m * (m + 1) // 2


def _check_finite(array: np.ndarray, what: str) -> None:
  if not np.all(np.isfinite(array)):
    raise NonFiniteInputError(f'{what} contains NaN or Inf entries')


@dataclass(frozen=True)
class SymMatrix:
  """Real symmetric m x m matrix stored as its packed upper triangle."""

  dim: int
  packed: np.ndarray

  def __post_init__(self):
    if self.packed.shape != (sym_size(self.dim),):
      raise ValueError(
        f'packed storage for dim {self.dim} needs {sym_size(self.dim)} values, '
        f'got shape {self.packed.shape}'
      )

  @classmethod
  def from_dense(cls, matrix: np.ndarray, atol: float | None = None) -> 'SymMatrix':
    """Pack a square matrix, symmetrizing it.

    If ``atol`` is given, the asymmetry ``max|M - M^T|`` must not exceed it.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
      raise ValueError(f'expected a square matrix, got shape {a.shape}')
    if atol is not None and np.max(np.abs(a - a.T), initial=0.0) > atol:
      raise ValueError('matrix is not symmetric within tolerance')
    a = 0.5 * (a + a.T)
    rows, cols = np.triu_indices(a.shape[0])
    return cls(a.shape[0], a[rows, cols].copy())

  @classmethod
  def from_vector(cls, vector: np.ndarray, dim: int, orthonormal: bool = False) -> 'SymMatrix':
    """Inverse of :meth:`vectorize`."""
    v = np.asarray(vector, dtype=float).copy()
    if orthonormal:
      v[_offdiag_mask(dim)] /= np.sqrt(2.0)
    return cls(dim, v)

  @classmethod
  def diag(cls, values) -> 'SymMatrix':
    """Diagonal matrix."""
    return cls.from_dense(np.diag(np.asarray(values, dtype=float)))

  @classmethod
  def zeros(cls, dim: int) -> 'SymMatrix':
    """Zero matrix."""
    return cls(dim, np.zeros(sym_size(dim)))

  def dense(self) -> np.ndarray:
    """Full m x m array."""
    out = np.zeros((self.dim, self.dim))
    rows, cols = np.triu_indices(self.dim)
    out[rows, cols] = self.packed
    out[cols, rows] = self.packed
    return out

  def entry(self, a: int, b: int) -> float:
    """A_ab read from packed storage."""
    if a > b:
      a, b = b, a
    return float(self.packed[a * self.dim - a * (a - 1) // 2 + (b - a)])

  def vectorize(self, orthonormal: bool = False) -> np.ndarray:
    """Packed entries as a vector.

    With ``orthonormal=True`` off-diagonal entries are scaled by sqrt(2), so the
    Euclidean inner product of two vectors equals the Frobenius product of the matrices.
    """
    v = self.packed.copy()
    if orthonormal:
      v[_offdiag_mask(self.dim)] *= np.sqrt(2.0)
    return v

  def frobenius_norm(self) -> float:
    """sqrt(tr(A^2))."""
    return float(np.linalg.norm(self.vectorize(orthonormal=True)))

  def inner(self, other: 'SymMatrix') -> float:
    """Frobenius inner product tr(A B)."""
    return float(self.vectorize(orthonormal=True) @ other.vectorize(orthonormal=True))

  def __add__(self, other: 'SymMatrix') -> 'SymMatrix':
    return SymMatrix(self.dim, self.packed + other.packed)

  def __sub__(self, other: 'SymMatrix') -> 'SymMatrix':
    return SymMatrix(self.dim, self.packed - other.packed)

  def scale(self, c: float) -> 'SymMatrix':
    """c A."""
    return SymMatrix(self.dim, c * self.packed)

  def congruent(self, q: np.ndarray) -> 'SymMatrix':
    """Q^T A Q."""
    return SymMatrix.from_dense(q.T @ self.dense() @ q)

  def to_json(self) -> list[list[float]]:
    """Dense nested lists."""
    return self.dense().tolist()


@lru_cache(maxsize=64)
def _offdiag_mask(m: int) -> np.ndarray:
  return np.array([a != b for a, b in sym_index_pairs(m)], dtype=bool)


@dataclass(frozen=True)
class NullspaceResult:
  """Right null space of a matrix with the evidence used to decide it.

  Attributes:
      nullity: Number of singular values at or below the threshold.
      basis: ``nullity x cols`` array of orthonormal rows spanning the null space.
      singular_values: All ``cols`` singular values, nonincreasing, zero padded.
      threshold_used: The relative threshold; a singular value counts as zero when it is
          at most ``threshold_used * singular_values[0]``.
  """

  nullity: int
  basis: np.ndarray
  singular_values: np.ndarray
  threshold_used: float

  @property
  def rank(self) -> int:
    """Number of singular values above the threshold."""
    return self.singular_values.shape[0] - self.nullity

  @property
  def absolute_threshold(self) -> float:
    """Singular values at or below this count as zero."""
    return self.threshold_used * float(self.singular_values[0])

  def summary(self) -> dict:
    """JSON-ready record of the decision."""
    return {
      'nullity': self.nullity,
      'rank': self.rank,
      'rel_tol': self.threshold_used,
      'singular_values': [float(s) for s in self.singular_values],
    }


def numerical_nullspace(matrix: np.ndarray, rel_tol: float = EXACT_REL_TOL) -> NullspaceResult:
  """Right null space of ``matrix`` from a full SVD.

  Args:
      matrix: Real rectangular matrix.
      rel_tol: Relative threshold in (0, 1); singular values ``<= rel_tol * sigma_max`` are
          treated as zero. A zero matrix has every direction null.

  Returns:
      The null space together with the complete singular-value list.
  """
  a = np.atleast_2d(np.asarray(matrix, dtype=float))
  if a.size == 0:
    raise ValueError('numerical_nullspace needs a nonempty matrix')
  if not 0.0 < rel_tol < 1.0:
    raise ValueError(f'rel_tol must lie in (0, 1), got {rel_tol}')
  _check_finite(a, 'null-space input')

  cols = a.shape[1]
  _, s, vh = linalg.svd(a, full_matrices=True)
  singular_values = np.zeros(cols)
  singular_values[: s.shape[0]] = s[:cols]
  sigma_max = singular_values[0]
  if sigma_max == 0.0:
    nullity = cols
  else:
    nullity = int(np.count_nonzero(singular_values <= rel_tol * sigma_max))
  basis = vh[cols - nullity :].copy()
  logger.debug(
    'null space: %d x %d, nullity %d at rel_tol %.1e', a.shape[0], cols, nullity, rel_tol
  )
  return NullspaceResult(nullity, basis, singular_values, rel_tol)


def _as_dense(matrix: 'SymMatrix | np.ndarray') -> np.ndarray:
  if isinstance(matrix, SymMatrix):
    return matrix.dense()
  a = np.asarray(matrix, dtype=float)
  return 0.5 * (a + a.T)


def sym_eig(matrix: 'SymMatrix | np.ndarray') -> tuple[np.ndarray, np.ndarray]:
  """Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a symmetric matrix."""
  a = _as_dense(matrix)
  _check_finite(a, 'symmetric eigenproblem input')
  return linalg.eigh(a)


def generalized_sym_eig(
  stiffness: 'SymMatrix | np.ndarray',
  mass: 'SymMatrix | np.ndarray',
  eigenvectors: bool = False,
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
  """Solve ``S v = nu B v`` for symmetric S and SPD B.

  B is factored as ``L L^T`` and the standard problem for ``L^-1 S L^-T`` is solved.

  Args:
      stiffness: Symmetric matrix S.
      mass: Symmetric positive definite matrix B.
      eigenvectors: Also return B-orthonormal eigenvectors as columns.

  Raises:
      NotPositiveDefiniteError: If the Cholesky factorization of B fails.
  """
  s = _as_dense(stiffness)
  b = _as_dense(mass)
  _check_finite(s, 'stiffness matrix')
  _check_finite(b, 'mass matrix')
  if s.shape != b.shape:
    raise ValueError(f'stiffness {s.shape} and mass {b.shape} differ in shape')
  try:
    lower = linalg.cholesky(b, lower=True)
  except linalg.LinAlgError as e:
    raise NotPositiveDefiniteError(f'mass matrix is not positive definite: {e}') from e

  half = linalg.solve_triangular(lower, s, lower=True)
  reduced = linalg.solve_triangular(lower, half.T, lower=True)
  reduced = 0.5 * (reduced + reduced.T)
  if not eigenvectors:
    return linalg.eigh(reduced, eigvals_only=True)
  values, y = linalg.eigh(reduced)
  vectors = linalg.solve_triangular(lower.T, y, lower=False)
  return values, vectors


@dataclass(frozen=True)
class SignedForm:
  """A relation ``sum_ab A_ab u_a u_b`` rewritten as ``sum_j eps_j v_j^2``.

  ``coefficients[j]`` expresses ``v_j`` in the original basis, ``signs[j]`` is eps_j.
  """

  signs: tuple[int, ...]
  coefficients: np.ndarray

  def to_matrix(self) -> SymMatrix:
    """Sum eps_j v_j v_j^T as a symmetric matrix in the original basis."""
    c = self.coefficients
    return SymMatrix.from_dense(c.T @ np.diag(np.asarray(self.signs, dtype=float)) @ c)


def signed_form(relation: SymMatrix, rel_tol: float = EXACT_REL_TOL) -> SignedForm:
  """Rewrite a symmetric relation matrix as a signed sum of squares.

  Diagonalizing ``A = Q D Q^T`` gives ``v_j = sqrt|d_j| q_j . u``, with eigenvalues below
  ``rel_tol * max|d|`` dropped.
  """
  values, vectors = sym_eig(relation)
  scale = float(np.max(np.abs(values), initial=0.0))
  if scale == 0.0:
    return SignedForm((), np.zeros((0, relation.dim)))
  keep = np.abs(values) > rel_tol * scale
  signs = tuple(int(np.sign(v)) for v in values[keep])
  coefficients = (np.sqrt(np.abs(values[keep]))[:, None] * vectors[:, keep].T).copy()
  return SignedForm(signs, coefficients)
