"""Tests for exact rational rank and null spaces."""

from fractions import Fraction

import pytest

from spectral_lab.errors import ResourceLimitError
from spectral_lab.services.exact import (
  ExactMatrix,
  bareiss_rank,
  exact_nullspace,
  exact_rank,
  integer_vector,
  modular_rank,
)


def test_identity_rank():
  assert exact_rank(ExactMatrix.identity(5)) == 5


def test_deficient_rank_uses_elimination():
  rows = [[1, 2, 3], [2, 4, 6], [1, 0, 1], [0, 2, 2]]
  m = ExactMatrix.from_rows(rows)
  assert exact_rank(m) == 2
  assert bareiss_rank(rows) == 2
  assert modular_rank(rows) == 2


def test_rank_with_rational_entries_and_skipped_columns():
  half, third = Fraction(1, 2), Fraction(1, 3)
  m = ExactMatrix.from_rows([[0, half, 1], [0, third, 2 * third], [0, 0, 1]])
  assert exact_rank(m) == 2


def test_modular_rank_is_lower_bound_for_large_entries():
  rows = [[2**40, 1], [2**41, 2]]
  assert exact_rank(ExactMatrix.from_rows(rows)) == 1
  assert modular_rank(rows) <= 1


def test_bareiss_keeps_entries_integral():
  rows = [[2, 3, 5, 7], [11, 13, 17, 19], [23, 29, 31, 37], [41, 43, 47, 53]]
  assert bareiss_rank(rows) == 4


def test_exact_nullspace():
  m = ExactMatrix.from_rows([[4, 1, 4, 1], [2, 2, -2, -2], [1, 4, 1, 4]])
  basis = exact_nullspace(m)
  assert len(basis) == 1
  assert integer_vector(basis[0]) == [1, -1, -1, 1]


def test_empty_nullspace_of_full_rank():
  assert exact_nullspace(ExactMatrix.identity(3)) == []


def test_integer_vector_normalization():
  assert integer_vector([Fraction(-1, 2), Fraction(1, 3), 0]) == [3, -2, 0]
  assert integer_vector([0, 0]) == [0, 0]


def test_resource_limit():
  with pytest.raises(ResourceLimitError):
    exact_rank(ExactMatrix.identity(10), cell_limit=50)
