"""Tests for harmonic polynomial bases and sphere rank certificates."""

from fractions import Fraction

import pytest

from spectral_lab.errors import ResourceLimitError
from spectral_lab.services.exact import ExactMatrix, exact_rank
from spectral_lab.services.sphere_poly import (
  HomogPoly,
  RankCertificate,
  first_guaranteed_ell,
  gradient_dimension_count,
  gradient_map_certificate,
  harmonic_basis,
  harmonic_dimension,
  legendre,
  monomials,
  product_map_certificate,
  relation_polynomial,
  s3_cubic,
  s3_dimension_count,
  sectoral_real,
  zonal_factor,
  zonal_surjectivity_check,
)


def test_monomials_count_and_order():
  assert monomials(3, 2) == ((2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2))
  assert len(monomials(4, 4)) == 35


def test_poly_arithmetic():
  x, y = HomogPoly.variable(2, 0), HomogPoly.variable(2, 1)
  p = (x + y) ** 2
  assert p.coeffs == {(2, 0): 1, (1, 1): 2, (0, 2): 1}
  assert (x * x - y * y).laplacian().is_zero()
  assert p.derivative(0).coeffs == {(1, 0): 2, (0, 1): 2}


@pytest.mark.parametrize('num_vars,degree,size', [(3, 1, 3), (3, 2, 5), (4, 2, 9)])
def test_harmonic_basis_examples(num_vars, degree, size):
  assert len(harmonic_basis(num_vars, degree)) == size


def test_harmonic_basis_describes_its_eigenspace():
  basis = harmonic_basis(3, 2)
  assert (basis.n, basis.m, basis.eigenvalue) == (2, 5, -6)
  assert basis.representation == 'polynomial'
  assert harmonic_basis(4, 3).eigenvalue == -15


def test_harmonic_basis_properties():
  for n in (2, 3, 4):
    for ell in range(0, 9 if n < 4 else 6):
      basis = harmonic_basis(n + 1, ell)
      assert len(basis) == harmonic_dimension(n, ell)
      for p in basis.polys:
        assert p.laplacian().is_zero()
      rows = ExactMatrix.from_rows([p.coefficient_vector() for p in basis.polys])
      assert exact_rank(rows) == len(basis)


def test_product_map_s2_is_surjective():
  for ell in range(1, 7):
    cert = product_map_certificate(harmonic_basis(3, ell))
    assert cert.nullity == 0
    assert cert.domain_dim == cert.codomain_dim == (ell + 1) * (2 * ell + 1)


def test_product_map_s3():
  one = product_map_certificate(harmonic_basis(4, 1))
  assert (one.domain_dim, one.codomain_dim, one.nullity) == (10, 10, 0)
  two = product_map_certificate(harmonic_basis(4, 2), with_kernel=True)
  assert (two.domain_dim, two.codomain_dim) == (45, 35)
  assert two.nullity == 10
  assert len(two.kernel) == 10
  basis = harmonic_basis(4, 2)
  for packed in two.kernel:
    assert relation_polynomial(basis, packed).is_zero()


def test_certificate_json_uses_aliases():
  cert = product_map_certificate(harmonic_basis(3, 2))
  payload = cert.to_json()
  assert payload == {
    'map': 'product',
    'n': 2,
    'ell': 2,
    'domain': 15,
    'codomain': 15,
    'rank': 15,
    'nullity': 0,
    'exact': True,
  }
  assert RankCertificate.model_validate(payload) == cert


def test_gradient_map_s2():
  for ell in range(1, 6):
    assert gradient_map_certificate(harmonic_basis(3, ell)).nullity == 0


def test_gradient_kernel_inside_product_kernel():
  for num_vars, ell in ((3, 2), (3, 3), (4, 1), (4, 2)):
    basis = harmonic_basis(num_vars, ell)
    grad = gradient_map_certificate(basis, with_kernel=True)
    prod = product_map_certificate(basis)
    assert grad.nullity <= prod.nullity
    for packed in grad.kernel:
      assert relation_polynomial(basis, packed).is_zero()


def test_gradient_budget():
  with pytest.raises(ResourceLimitError):
    gradient_map_certificate(harmonic_basis(4, 3), cell_budget=1000)


def test_s3_dimension_count():
  assert s3_dimension_count(2) == (45, 100, False)
  assert s3_dimension_count(22)[2] is False
  assert s3_dimension_count(23)[2] is True
  assert first_guaranteed_ell(3, 30) == 23
  for ell in range(2, 31):
    domain, codomain, guaranteed = s3_dimension_count(ell)
    assert 2 * (domain - codomain) == (ell - 1) * s3_cubic(ell)
    assert guaranteed == (s3_cubic(ell) > 0)
  assert gradient_dimension_count(3, 2).cubic == str(Fraction(-110))


def test_legendre():
  assert legendre(2) == (Fraction(-1, 2), 0, Fraction(3, 2))
  assert legendre(3) == (0, Fraction(-3, 2), 0, Fraction(5, 2))


@pytest.mark.parametrize('ell', [1, 2, 3, 5])
def test_zonal_surjectivity(ell):
  assert zonal_surjectivity_check(ell)


def test_sectoral_times_zonal_is_harmonic():
  for ell in range(1, 6):
    for m in range(ell + 1):
      assert (sectoral_real(m) * zonal_factor(m, ell)).laplacian().is_zero()
