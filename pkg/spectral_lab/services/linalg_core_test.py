"""Tests for symmetric matrices and numerical null spaces."""

from fractions import Fraction

import numpy as np
import pytest

from spectral_lab.errors import NonFiniteInputError, NotPositiveDefiniteError
from spectral_lab.services.exact import ExactMatrix, exact_rank
from spectral_lab.services.linalg_core import (
  SymMatrix,
  generalized_sym_eig,
  numerical_nullspace,
  signed_form,
  sym_eig,
  sym_index_pairs,
)

TORUS_KAPPA5_ROWS = np.array(
  [[4, 2, 1], [1, 2, 4], [4, -2, 1], [1, -2, 4]],
  dtype=float,
)


def _random_spd(rng, n):
  a = rng.standard_normal((n, n))
  return a @ a.T + n * np.eye(n)


def test_sym_matrix_round_trip():
  rng = np.random.default_rng(0)
  a = rng.standard_normal((5, 5))
  a = a + a.T
  s = SymMatrix.from_dense(a)
  assert np.array_equal(s.dense(), a)
  for orthonormal in (False, True):
    back = SymMatrix.from_vector(s.vectorize(orthonormal), 5, orthonormal)
    np.testing.assert_allclose(back.packed, s.packed, rtol=0, atol=1e-15)
  assert s.entry(1, 3) == s.entry(3, 1) == a[1, 3]


def test_orthonormal_vectorization_matches_frobenius():
  rng = np.random.default_rng(1)
  a, b = (rng.standard_normal((4, 4)) for _ in range(2))
  sa, sb = SymMatrix.from_dense(a + a.T), SymMatrix.from_dense(b + b.T)
  assert sa.inner(sb) == pytest.approx(np.trace(sa.dense() @ sb.dense()), rel=1e-12)


def test_sym_index_pairs_order():
  assert sym_index_pairs(3) == ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def test_nullspace_identity_and_zero():
  assert numerical_nullspace(np.eye(2), 1e-10).nullity == 0
  zero = numerical_nullspace(np.zeros((3, 3)), 1e-10)
  assert zero.nullity == 3
  assert zero.basis.shape == (3, 3)


def test_nullspace_torus_relation():
  # Columns are the packed kappa kappa^T of the four |kappa|^2 = 5 representatives.
  result = numerical_nullspace(TORUS_KAPPA5_ROWS.T, 1e-10)
  assert result.nullity == 1
  v = result.basis[0] / result.basis[0][0]
  np.testing.assert_allclose(v, [1, -1, -1, 1], atol=1e-12)


def test_nullspace_basis_properties():
  rng = np.random.default_rng(2)
  a = rng.standard_normal((6, 3)) @ rng.standard_normal((3, 8))
  result = numerical_nullspace(a, 1e-10)
  assert result.nullity == 5
  np.testing.assert_allclose(result.basis @ result.basis.T, np.eye(5), atol=1e-12)
  residual = np.linalg.norm(a @ result.basis.T, axis=0)
  assert np.all(residual <= result.absolute_threshold)
  assert np.all(np.diff(result.singular_values) <= 0)
  assert result.singular_values.shape == (8,)


def test_nullspace_unchanged_by_row_space_rows():
  rng = np.random.default_rng(3)
  a = rng.standard_normal((4, 3)) @ rng.standard_normal((3, 7))
  first = numerical_nullspace(a, 1e-10)
  extended = np.vstack([a, rng.standard_normal((3, 4)) @ a])
  assert numerical_nullspace(extended, 1e-10).nullity == first.nullity


def test_nullspace_rejects_non_finite():
  with pytest.raises(NonFiniteInputError):
    numerical_nullspace(np.array([[1.0, np.nan]]), 1e-10)
  with pytest.raises(ValueError):
    numerical_nullspace(np.eye(2), 0.0)


def test_nullspace_agrees_with_exact_rank():
  rng = np.random.default_rng(4)
  for rank in range(1, 5):
    a = rng.integers(-3, 4, size=(6, rank)) @ rng.integers(-3, 4, size=(rank, 5))
    s = np.linalg.svd(a.astype(float), compute_uv=False)
    ratio = s[-1] / s[0]
    if 1e-11 < ratio < 1e-9:
      continue
    exact = exact_rank(ExactMatrix.from_rows(a.tolist()))
    assert numerical_nullspace(a, 1e-10).nullity == 5 - exact


def test_sym_eig_examples():
  w, _ = sym_eig(SymMatrix.diag([1, 2, 3]))
  np.testing.assert_allclose(w, [1, 2, 3])
  w, _ = sym_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
  np.testing.assert_allclose(w, [-1, 1], atol=1e-15)


def test_sym_eig_reconstruction_and_polynomial_oracle():
  rng = np.random.default_rng(5)
  a = rng.standard_normal((6, 6))
  a = a + a.T
  w, v = sym_eig(SymMatrix.from_dense(a))
  assert np.linalg.norm(a - v @ np.diag(w) @ v.T) <= 1e-12 * np.linalg.norm(a)
  roots = np.sort(np.roots(np.poly(a)).real)
  np.testing.assert_allclose(w, roots, atol=1e-9)


def test_generalized_examples():
  np.testing.assert_allclose(generalized_sym_eig(np.diag([4.0, 9.0]), np.eye(2)), [4, 9])
  rng = np.random.default_rng(6)
  b = _random_spd(rng, 5)
  np.testing.assert_allclose(generalized_sym_eig(2 * b, b), np.full(5, 2.0), rtol=1e-12)


def test_generalized_matches_explicit_inverse():
  rng = np.random.default_rng(7)
  s = rng.standard_normal((10, 10))
  s = s + s.T
  b = _random_spd(rng, 10)
  oracle = np.sort(np.linalg.eigvals(np.linalg.inv(b) @ s).real)
  np.testing.assert_allclose(generalized_sym_eig(s, b), oracle, atol=1e-9)
  values, vectors = generalized_sym_eig(s, b, eigenvectors=True)
  np.testing.assert_allclose(vectors.T @ b @ vectors, np.eye(10), atol=1e-10)
  np.testing.assert_allclose(s @ vectors, b @ vectors * values, atol=1e-9)


def test_generalized_identity_mass_matches_sym_eig():
  rng = np.random.default_rng(8)
  a = rng.standard_normal((7, 7))
  a = a + a.T
  np.testing.assert_allclose(generalized_sym_eig(a, np.eye(7)), sym_eig(a)[0], rtol=1e-12)


def test_generalized_rejects_indefinite_mass():
  with pytest.raises(NotPositiveDefiniteError):
    generalized_sym_eig(np.eye(2), np.diag([1.0, -1.0]))


def test_signed_form_reconstructs_relation():
  relation = SymMatrix.diag([1, 1, -1, -1])
  form = signed_form(relation)
  assert sorted(form.signs) == [-1, -1, 1, 1]
  np.testing.assert_allclose(form.to_matrix().dense(), relation.dense(), atol=1e-12)
  assert signed_form(SymMatrix.zeros(3)).signs == ()


def test_exact_rank_transpose_invariant():
  rng = np.random.default_rng(9)
  for _ in range(5):
    a = rng.integers(-2, 3, size=(5, 3)) @ rng.integers(-2, 3, size=(3, 7))
    m = ExactMatrix.from_rows([[Fraction(int(x), 3) for x in row] for row in a])
    assert exact_rank(m) == exact_rank(m.transpose())
