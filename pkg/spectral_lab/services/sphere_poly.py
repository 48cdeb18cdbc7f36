"""Exact polynomial algebra for round spheres.

Eigenfunctions of the sphere S^n with eigenvalue -l(l+n-1) are restrictions of harmonic
homogeneous polynomials of degree l in n+1 variables. Relations between products of
eigenfunctions are therefore polynomial identities, and the degeneracy questions become
rank questions for integer matrices.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from spectral_lab.errors import ResourceLimitError
from spectral_lab.services.eigenspace import Representation
from spectral_lab.services.exact import (
  ExactMatrix,
  exact_nullspace,
  exact_rank,
  integer_vector,
)
from spectral_lab.services.linalg_core import sym_index_pairs, sym_size

logger = logging.getLogger(__name__)

DEFAULT_CELL_BUDGET = 500_000_000

Exponent = tuple[int, ...]


@lru_cache(maxsize=256)
def monomials(num_vars: int, degree: int) -> tuple[Exponent, ...]:
  """Exponent tuples of all monomials of ``degree``, in descending lexicographic order."""
  if degree < 0:
    return ()
  if num_vars == 1:
    return ((degree,),)
  return tuple(
    (first, *rest)
    for first in range(degree, -1, -1)
    for rest in monomials(num_vars - 1, degree - first)
  )


@lru_cache(maxsize=256)
def monomial_index(num_vars: int, degree: int) -> dict[Exponent, int]:
  """Position of each exponent in :func:`monomials` order."""
  return {e: i for i, e in enumerate(monomials(num_vars, degree))}


def homogeneous_dimension(num_vars: int, degree: int) -> int:
  """dim E_d in ``num_vars`` variables."""
  if degree < 0:
    return 0
  return math.comb(num_vars - 1 + degree, num_vars - 1)


def harmonic_dimension(n: int, ell: int) -> int:
  """Multiplicity of the sphere eigenvalue -l(l+n-1) on S^n: C(n+l, n) - C(n+l-2, n)."""
  return math.comb(n + ell, n) - (math.comb(n + ell - 2, n) if ell >= 2 else 0)


@dataclass(frozen=True)
class HomogPoly:
  """Homogeneous polynomial with rational coefficients; zero coefficients are never stored."""

  num_vars: int
  degree: int
  coeffs: dict[Exponent, Fraction] = field(default_factory=dict)

  def __post_init__(self):
    for e in self.coeffs:
      if len(e) != self.num_vars or sum(e) != self.degree:
        raise ValueError(f'exponent {e} does not belong to degree {self.degree}')

  @classmethod
  def variable(cls, num_vars: int, j: int) -> 'HomogPoly':
    """The coordinate x_j."""
    return cls(num_vars, 1, {tuple(int(i == j) for i in range(num_vars)): Fraction(1)})

  @classmethod
  def constant(cls, num_vars: int, value: int | Fraction = 1) -> 'HomogPoly':
    """Constant polynomial of degree 0."""
    value = Fraction(value)
    return cls(num_vars, 0, {(0,) * num_vars: value} if value else {})

  @classmethod
  def monomial(cls, exponent: Exponent, coeff: int | Fraction = 1) -> 'HomogPoly':
    """c x^exponent."""
    return cls(len(exponent), sum(exponent), {tuple(exponent): Fraction(coeff)})

  def is_zero(self) -> bool:
    """Whether every coefficient vanishes."""
    return not self.coeffs

  def _same_space(self, other: 'HomogPoly') -> None:
    if other.num_vars != self.num_vars:
      raise ValueError('polynomials live in different numbers of variables')
    if other.degree != self.degree and not (self.is_zero() or other.is_zero()):
      raise ValueError(f'cannot add degree {self.degree} and degree {other.degree}')

  def __add__(self, other: 'HomogPoly') -> 'HomogPoly':
    self._same_space(other)
    degree = self.degree if not self.is_zero() else other.degree
    out = dict(self.coeffs)
    for e, c in other.coeffs.items():
      out[e] = out.get(e, 0) + c
    return HomogPoly(self.num_vars, degree, {e: c for e, c in out.items() if c})

  def __neg__(self) -> 'HomogPoly':
    return self.scale(-1)

  def __sub__(self, other: 'HomogPoly') -> 'HomogPoly':
    return self + (-other)

  def scale(self, c: int | Fraction) -> 'HomogPoly':
    """c p."""
    c = Fraction(c)
    if not c:
      return HomogPoly(self.num_vars, self.degree)
    return HomogPoly(self.num_vars, self.degree, {e: c * v for e, v in self.coeffs.items()})

  def __mul__(self, other: 'HomogPoly | int | Fraction') -> 'HomogPoly':
    if not isinstance(other, HomogPoly):
      return self.scale(other)
    if other.num_vars != self.num_vars:
      raise ValueError('polynomials live in different numbers of variables')
    out: dict[Exponent, Fraction] = {}
    for e1, c1 in self.coeffs.items():
      for e2, c2 in other.coeffs.items():
        e = tuple(a + b for a, b in zip(e1, e2))
        out[e] = out.get(e, 0) + c1 * c2
    return HomogPoly(self.num_vars, self.degree + other.degree, {e: c for e, c in out.items() if c})

  __rmul__ = __mul__

  def __pow__(self, k: int) -> 'HomogPoly':
    result = HomogPoly.constant(self.num_vars)
    for _ in range(k):
      result = result * self
    return result

  def derivative(self, j: int) -> 'HomogPoly':
    """Partial derivative d/dx_j."""
    out = {}
    for e, c in self.coeffs.items():
      if e[j]:
        d = list(e)
        d[j] -= 1
        out[tuple(d)] = c * e[j]
    return HomogPoly(self.num_vars, max(self.degree - 1, 0), out)

  def laplacian(self) -> 'HomogPoly':
    """Euclidean Laplacian sum_j d^2/dx_j^2."""
    result = HomogPoly(self.num_vars, max(self.degree - 2, 0))
    for j in range(self.num_vars):
      result = result + self.derivative(j).derivative(j)
    return result

  def coefficient_vector(self) -> list[Fraction]:
    """Coefficients in the order of :func:`monomials`."""
    return [self.coeffs.get(e, Fraction(0)) for e in monomials(self.num_vars, self.degree)]

  def integer_scaled(self) -> 'HomogPoly':
    """Primitive integer multiple with positive leading coefficient."""
    if self.is_zero():
      return self
    keys = list(self.coeffs)
    ints = integer_vector([self.coeffs[k] for k in keys])
    return HomogPoly(self.num_vars, self.degree, {k: Fraction(v) for k, v in zip(keys, ints)})

  def evaluate(self, point) -> float:
    """Floating-point value at ``point``."""
    return float(
      sum(float(c) * math.prod(x**p for x, p in zip(point, e)) for e, c in self.coeffs.items())
    )


@dataclass(frozen=True)
class HarmonicBasis:
  """Ordered exact basis of harmonic homogeneous polynomials of one degree."""

  num_vars: int
  degree: int
  polys: tuple[HomogPoly, ...]

  @property
  def n(self) -> int:
    """Dimension of the sphere."""
    return self.num_vars - 1

  @property
  def m(self) -> int:
    """Multiplicity of the eigenvalue."""
    return len(self.polys)

  @property
  def eigenvalue(self) -> int:
    """lambda = -l(l+n-1)."""
    return -self.degree * (self.degree + self.n - 1)

  @property
  def representation(self) -> Representation:
    """Always ``polynomial``: the basis is exact, not sampled."""
    return 'polynomial'

  def __len__(self) -> int:
    return len(self.polys)


def harmonic_basis(num_vars: int, degree: int) -> HarmonicBasis:
  """Integer basis of the kernel of the Euclidean Laplacian on degree-``degree`` polynomials.

  Row r of the Laplacian coefficient matrix (a monomial of degree ``degree - 2``) reads
  ``sum_j (r_j + 2)(r_j + 1) p[r + 2 e_j] = 0``. Monomials with x_0 exponent at most 1 are
  free; every other coefficient ``p[r + 2 e_0]`` is fixed by row r from coefficients of
  smaller x_0 exponent, so rows are solved in increasing x_0 degree.
  """
  if num_vars < 3:
    raise ValueError('spheres of dimension n >= 2 need at least 3 variables')
  if degree < 0:
    raise ValueError('degree must be nonnegative')
  cols = monomials(num_vars, degree)
  free = [e for e in cols if e[0] <= 1]
  rows = sorted(monomials(num_vars, degree - 2), key=lambda r: r[0])

  polys = []
  for seed in free:
    coeffs: dict[Exponent, Fraction] = {seed: Fraction(1)}
    for r in rows:
      total = Fraction(0)
      for j in range(1, num_vars):
        e = list(r)
        e[j] += 2
        value = coeffs.get(tuple(e))
        if value:
          total += (r[j] + 2) * (r[j] + 1) * value
      if total:
        pivot = (r[0] + 2, *r[1:])
        coeffs[pivot] = -total / ((r[0] + 2) * (r[0] + 1))
    polys.append(HomogPoly(num_vars, degree, coeffs).integer_scaled())
  expected = harmonic_dimension(num_vars - 1, degree)
  if len(polys) != expected:
    raise AssertionError(f'harmonic basis has {len(polys)} elements, expected {expected}')
  return HarmonicBasis(num_vars, degree, tuple(polys))


class RankCertificate(BaseModel):
  """Exact rank of the product or gradient map for one sphere eigenvalue."""

  model_config = ConfigDict(populate_by_name=True)

  map_name: Literal['product', 'gradient'] = Field(alias='map')
  n: int
  ell: int
  domain_dim: int = Field(alias='domain')
  codomain_dim: int = Field(alias='codomain')
  rank: int
  nullity: int
  exact: bool = True
  kernel: list[list[int]] | None = None

  @model_validator(mode='after')
  def _check_dimensions(self) -> 'RankCertificate':
    if self.rank + self.nullity != self.domain_dim:
      raise ValueError('rank + nullity must equal the domain dimension')
    if self.rank > self.codomain_dim:
      raise ValueError('rank cannot exceed the codomain dimension')
    return self

  def to_json(self) -> dict:
    """JSON form without empty fields."""
    return self.model_dump(by_alias=True, exclude_none=True)


def product_rows(basis: HarmonicBasis) -> ExactMatrix:
  """Matrix of the product map; row (a, b) holds u_a^2 or 2 u_a u_b in monomials of E_2l.

  A left null vector is the packed upper triangle of a symmetric A with
  ``sum_ab A_ab u_a u_b = 0``.
  """
  polys = basis.polys
  rows = []
  for a, b in sym_index_pairs(len(polys)):
    product = polys[a] * polys[b]
    rows.append((product if a == b else product.scale(2)).coefficient_vector())
  return ExactMatrix.from_rows(rows, homogeneous_dimension(basis.num_vars, 2 * basis.degree))


def gradient_rows(basis: HarmonicBasis) -> ExactMatrix:
  """Matrix of the gradient-product map.

  Row (a, b) stacks, over coordinate pairs j <= k, the monomial coefficients of
  ``d_j u_a d_k u_b + d_j u_b d_k u_a`` (or ``d_j u_a d_k u_a`` on the diagonal).
  """
  polys = basis.polys
  grads = [[p.derivative(j) for j in range(basis.num_vars)] for p in polys]
  coordinate_pairs = sym_index_pairs(basis.num_vars)
  rows = []
  for a, b in sym_index_pairs(len(polys)):
    row: list[Fraction] = []
    for j, k in coordinate_pairs:
      term = grads[a][j] * grads[b][k]
      if a != b:
        term = term + grads[b][j] * grads[a][k]
      if term.is_zero():
        row.extend([Fraction(0)] * homogeneous_dimension(basis.num_vars, 2 * basis.degree - 2))
      else:
        row.extend(term.coefficient_vector())
    rows.append(row)
  cols = len(coordinate_pairs) * homogeneous_dimension(basis.num_vars, 2 * basis.degree - 2)
  return ExactMatrix.from_rows(rows, cols)


def _certificate(
  map_name: Literal['product', 'gradient'],
  basis: HarmonicBasis,
  matrix: ExactMatrix,
  with_kernel: bool,
  cell_limit: int,
) -> RankCertificate:
  rank = exact_rank(matrix, cell_limit=cell_limit)
  nullity = matrix.rows - rank
  kernel = None
  if with_kernel:
    kernel = [integer_vector(v) for v in exact_nullspace(matrix.transpose(), cell_limit=cell_limit)]
  logger.info(
    '%s map n=%d l=%d: domain %d, codomain %d, nullity %d',
    map_name,
    basis.n,
    basis.degree,
    matrix.rows,
    matrix.cols,
    nullity,
  )
  return RankCertificate(
    map_name=map_name,
    n=basis.n,
    ell=basis.degree,
    domain_dim=matrix.rows,
    codomain_dim=matrix.cols,
    rank=rank,
    nullity=nullity,
    kernel=kernel,
  )


def product_map_certificate(
  basis: HarmonicBasis, with_kernel: bool = False, cell_budget: int = DEFAULT_CELL_BUDGET
) -> RankCertificate:
  """Exact rank and nullity of the product map on symmetric pairs of harmonics."""
  if basis.degree < 1:
    raise ValueError('the product map needs degree >= 1')
  m = len(basis)
  cells = sym_size(m) * homogeneous_dimension(basis.num_vars, 2 * basis.degree)
  if cells > cell_budget:
    raise ResourceLimitError('product map assembly', required=cells, limit=cell_budget)
  return _certificate('product', basis, product_rows(basis), with_kernel, cell_budget)


def gradient_map_certificate(
  basis: HarmonicBasis, with_kernel: bool = False, cell_budget: int = DEFAULT_CELL_BUDGET
) -> RankCertificate:
  """Exact rank and nullity of the gradient-product map.

  Raises:
      ResourceLimitError: If domain times codomain exceeds ``cell_budget``.
  """
  if basis.degree < 1:
    raise ValueError('the gradient map needs degree >= 1')
  count = gradient_dimension_count(basis.n, basis.degree)
  cells = count.domain * count.codomain
  if cells > cell_budget:
    raise ResourceLimitError('gradient map assembly', required=cells, limit=cell_budget)
  return _certificate('gradient', basis, gradient_rows(basis), with_kernel, cell_budget)


def relation_polynomial(basis: HarmonicBasis, packed: list[int] | list[Fraction]) -> HomogPoly:
  """sum_ab A_ab u_a u_b for A given by its packed upper triangle."""
  total = HomogPoly(basis.num_vars, 2 * basis.degree)
  for (a, b), value in zip(sym_index_pairs(len(basis)), packed):
    if value:
      weight = Fraction(value) if a == b else 2 * Fraction(value)
      total = total + (basis.polys[a] * basis.polys[b]).scale(weight)
  return total


class DimensionCount(BaseModel):
  """Dimension comparison for the gradient map on S^n."""

  n: int
  ell: int
  domain: int
  codomain: int
  kernel_guaranteed: bool
  cubic: str | None = None


def gradient_dimension_count(n: int, ell: int) -> DimensionCount:
  """Compare dim of symmetric pairs of harmonics with the gradient codomain.

  A nontrivial kernel is guaranteed once the domain is strictly larger than
  ``(n+1)(n+2)/2 * dim E_{2l-2}``.
  """
  if ell < 1:
    raise ValueError('ell must be positive')
  m = harmonic_dimension(n, ell)
  domain = sym_size(m)
  codomain = sym_size(n + 1) * homogeneous_dimension(n + 1, 2 * ell - 2)
  cubic = None
  if n == 3:
    cubic = str(s3_cubic(ell))
  return DimensionCount(
    n=n, ell=ell, domain=domain, codomain=codomain, kernel_guaranteed=domain > codomain, cubic=cubic
  )


def s3_cubic(ell: int) -> Fraction:
  """l^3 - 65/3 l^2 - 44/3 l - 2; twice (domain - codomain) on S^3 equals (l - 1) times this."""
  return Fraction(ell**3) - Fraction(65, 3) * ell**2 - Fraction(44, 3) * ell - 2


def s3_dimension_count(ell: int) -> tuple[int, int, bool]:
  """(dim of symmetric pairs of H_l, 10 dim E_{2l-2}, kernel guaranteed) on S^3."""
  count = gradient_dimension_count(3, ell)
  return count.domain, count.codomain, count.kernel_guaranteed


def first_guaranteed_ell(n: int, ell_max: int) -> int | None:
  """Smallest l <= ell_max at which the gradient map must have a kernel, if any."""
  return next(
    (ell for ell in range(1, ell_max + 1) if gradient_dimension_count(n, ell).kernel_guaranteed),
    None,
  )


@lru_cache(maxsize=64)
def legendre(ell: int) -> tuple[Fraction, ...]:
  """Coefficients of P_l(t) in increasing powers, by Bonnet's recursion."""
  prev: list[Fraction] = [Fraction(1)]
  if ell == 0:
    return tuple(prev)
  cur: list[Fraction] = [Fraction(0), Fraction(1)]
  for k in range(1, ell):
    nxt = [Fraction(0)] * (k + 2)
    for i, c in enumerate(cur):
      nxt[i + 1] += Fraction(2 * k + 1, k + 1) * c
    for i, c in enumerate(prev):
      nxt[i] -= Fraction(k, k + 1) * c
    prev, cur = cur, nxt
  return tuple(cur)


def zonal_factor(m: int, ell: int) -> HomogPoly:
  """Homogenized m-th derivative of P_l in (x, y, z): sum_i c_i z^i (x^2 + y^2 + z^2)^((d-i)/2)."""
  if not 0 <= m <= ell:
    raise ValueError('need 0 <= m <= ell')
  coeffs = list(legendre(ell))
  for _ in range(m):
    coeffs = [c * i for i, c in enumerate(coeffs)][1:]
  degree = ell - m
  r_sq = sum((HomogPoly.variable(3, j) ** 2 for j in range(1, 3)), HomogPoly.variable(3, 0) ** 2)
  z = HomogPoly.variable(3, 2)
  total = HomogPoly(3, degree)
  for i, c in enumerate(coeffs):
    if c:
      total = total + ((z**i) * (r_sq ** ((degree - i) // 2))).scale(c)
  return total


def sectoral_real(m: int) -> HomogPoly:
  """Re (x + i y)^m."""
  coeffs = {}
  for k in range(0, m + 1, 2):
    coeffs[(m - k, k, 0)] = Fraction((-1) ** (k // 2) * math.comb(m, k))
  return HomogPoly(3, m, coeffs)


def zonal_products(ell: int) -> list[HomogPoly]:
  """(x^2 + y^2)^m Q_m^2 for m = 0..l, with Q_m the zonal factor."""
  rho_sq = HomogPoly.variable(3, 0) ** 2 + HomogPoly.variable(3, 1) ** 2
  return [(rho_sq**m) * (zonal_factor(m, ell) ** 2) for m in range(ell + 1)]


def zonal_surjectivity_check(ell: int) -> bool:
  """Whether the l+1 products of conjugate spherical harmonics on S^2 are independent."""
  if ell < 1:
    raise ValueError('ell must be positive')
  products = zonal_products(ell)
  matrix = ExactMatrix.from_rows([p.coefficient_vector() for p in products])
  return exact_rank(matrix) == ell + 1
