"""Exact rational linear algebra: rank and null spaces over Q."""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from spectral_lab.errors import ResourceLimitError

logger = logging.getLogger(__name__)

MODULUS = 2**31 - 1
DEFAULT_CELL_LIMIT = 4_000_000


@dataclass(frozen=True)
class ExactMatrix:
  """Matrix of exact rationals, stored row-major."""

  rows: int
  cols: int
  entries: tuple[tuple[Fraction, ...], ...]

  @classmethod
  def from_rows(
    cls, rows: Iterable[Iterable[int | Fraction]], cols: int | None = None
  ) -> 'ExactMatrix':
    """Build from nested rows of integers or fractions."""
    data = tuple(tuple(Fraction(x) for x in row) for row in rows)
    width = cols if cols is not None else (len(data[0]) if data else 0)
    for i, row in enumerate(data):
      if len(row) != width:
        raise ValueError(f'row {i} has {len(row)} entries, expected {width}')
    return cls(len(data), width, data)

  @classmethod
  def identity(cls, n: int) -> 'ExactMatrix':
    """n x n identity."""
    return cls.from_rows([[int(i == j) for j in range(n)] for i in range(n)])

  def transpose(self) -> 'ExactMatrix':
    """Exact transpose."""
    return ExactMatrix(self.cols, self.rows, tuple(zip(*self.entries)) if self.rows else ())

  def integer_rows(self) -> list[list[int]]:
    """Rows scaled by the lcm of their denominators (row scaling preserves rank)."""
    out = []
    for row in self.entries:
      denom = math.lcm(*(x.denominator for x in row)) if row else 1
      out.append([int(x * denom) for x in row])
    return out

  def to_numpy(self) -> np.ndarray:
    """Float copy."""
    return np.array([[float(x) for x in row] for row in self.entries], dtype=float).reshape(
      self.rows, self.cols
    )


def _check_size(matrix: ExactMatrix, cell_limit: int) -> None:
  cells = matrix.rows * matrix.cols
  if cells > cell_limit:
    raise ResourceLimitError(
      f'exact elimination on a {matrix.rows} x {matrix.cols} matrix',
      required=cells,
      limit=cell_limit,
    )


def modular_rank(int_rows: list[list[int]], modulus: int = MODULUS) -> int:
  """Rank of an integer matrix over GF(modulus); a lower bound for the rank over Q."""
  if not int_rows or not int_rows[0]:
    return 0
  a = np.array([[x % modulus for x in row] for row in int_rows], dtype=np.int64)
  n_rows, n_cols = a.shape
  rank = 0
  for col in range(n_cols):
    if rank == n_rows:
      break
    nonzero = np.nonzero(a[rank:, col])[0]
    if nonzero.size == 0:
      continue
    pivot = rank + int(nonzero[0])
    if pivot != rank:
      a[[rank, pivot]] = a[[pivot, rank]]
    inv = pow(int(a[rank, col]), modulus - 2, modulus)
    a[rank] = (a[rank] * inv) % modulus
    below = a[rank + 1 :]
    if below.shape[0]:
      below[:] = (below - np.outer(below[:, col], a[rank]) % modulus) % modulus
    rank += 1
  return rank


def bareiss_rank(int_rows: list[list[int]]) -> int:
  """Rank over Q by fraction-free (Bareiss) elimination on integer rows.

  Every division by the previous pivot is exact, so entries stay integral and no
  rational arithmetic is needed.
  """
  if not int_rows or not int_rows[0]:
    return 0
  a = np.array(int_rows, dtype=object)
  n_rows, n_cols = a.shape
  rank = 0
  previous = 1
  for col in range(n_cols):
    if rank == n_rows:
      break
    pivot = next((r for r in range(rank, n_rows) if a[r, col] != 0), None)
    if pivot is None:
      continue
    if pivot != rank:
      a[[rank, pivot]] = a[[pivot, rank]]
    p = a[rank, col]
    if rank + 1 < n_rows:
      factors = a[rank + 1 :, col].copy()
      tail = a[rank + 1 :, col + 1 :]
      a[rank + 1 :, col + 1 :] = (p * tail - np.outer(factors, a[rank, col + 1 :])) // previous
      a[rank + 1 :, col] = 0
    previous = p
    rank += 1
  return rank


def exact_rank(matrix: ExactMatrix, cell_limit: int = DEFAULT_CELL_LIMIT) -> int:
  """Rank over Q.

  A modular rank equal to ``min(rows, cols)`` already certifies full rank. Otherwise the
  rank is settled by fraction-free elimination.

  Raises:
      ResourceLimitError: If ``rows * cols`` exceeds ``cell_limit``.
  """
  if matrix.rows == 0 or matrix.cols == 0:
    return 0
  _check_size(matrix, cell_limit)
  int_rows = matrix.integer_rows()
  # Eliminate along the shorter side.
  if matrix.rows > matrix.cols:
    int_rows = [list(col) for col in zip(*int_rows)]
  full = min(matrix.rows, matrix.cols)
  fast = modular_rank(int_rows)
  if fast == full:
    return fast
  logger.debug('modular rank %d < %d, running fraction-free elimination', fast, full)
  return bareiss_rank(int_rows)


def rref(matrix: ExactMatrix) -> tuple[list[list[Fraction]], list[int]]:
  """Reduced row echelon form and its pivot columns."""
  a = [list(row) for row in matrix.entries]
  pivots: list[int] = []
  r = 0
  for col in range(matrix.cols):
    pivot = next((i for i in range(r, matrix.rows) if a[i][col] != 0), None)
    if pivot is None:
      continue
    a[r], a[pivot] = a[pivot], a[r]
    inv = 1 / a[r][col]
    a[r] = [x * inv for x in a[r]]
    for i in range(matrix.rows):
      if i != r and a[i][col] != 0:
        f = a[i][col]
        a[i] = [x - f * y for x, y in zip(a[i], a[r])]
    pivots.append(col)
    r += 1
    if r == matrix.rows:
      break
  return a[:r], pivots


def exact_nullspace(
  matrix: ExactMatrix, cell_limit: int = DEFAULT_CELL_LIMIT
) -> list[list[Fraction]]:
  """Basis of the right null space over Q, one vector per free column."""
  if matrix.cols == 0:
    return []
  _check_size(matrix, cell_limit)
  if matrix.rows == 0:
    return [[Fraction(int(i == j)) for i in range(matrix.cols)] for j in range(matrix.cols)]
  reduced, pivots = rref(matrix)
  pivot_set = set(pivots)
  basis = []
  for free in range(matrix.cols):
    if free in pivot_set:
      continue
    v = [Fraction(0)] * matrix.cols
    v[free] = Fraction(1)
    for row, p in zip(reduced, pivots):
      v[p] = -row[free]
    basis.append(v)
  return basis


def integer_vector(vector: Sequence[Fraction | int]) -> list[int]:
  """Primitive integer multiple of a rational vector, first nonzero entry positive."""
  fracs = [Fraction(x) for x in vector]
  denom = math.lcm(*(x.denominator for x in fracs)) if fracs else 1
  ints = [int(x * denom) for x in fracs]
  g = math.gcd(*ints)
  if g == 0:
    return ints
  ints = [x // g for x in ints]
  lead = next(x for x in ints if x != 0)
  return [-x for x in ints] if lead < 0 else ints
