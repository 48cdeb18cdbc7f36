"""First-order splitting of multiple eigenvalues under metric perturbations.

For an orthonormal eigenbasis u_1..u_m of Delta_g with eigenvalue lambda and a symmetric
tensor h, the splitting matrix is M(h)_ab = <u_a, D_h Delta_g u_b>, where

    D_h Delta_g u = 1/2 g(d tr_g h, du) - |g|^{-1/2} d_j(|g|^{1/2} h^{jk} d_k u).

Along g + t h the eigenvalues near lambda are the eigenvalues of lambda I + t M(h) up to
O(t^2). A symmetric A orthogonal to every M(h) is an obstruction to the strong Arnold
hypothesis; it exists exactly when the eigenbasis satisfies a degeneracy relation.
"""

import logging
import math
import threading
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from spectral_lab.errors import (
  BandLimitError,
  BasisNotOrthonormalError,
  ClusterIsolationError,
  ConfigError,
  InsufficientDirectionsError,
  NotPositiveDefiniteError,
  QuadratureMismatchError,
)
from spectral_lab.services.eigenspace import EigenspaceBasis, default_grid_size
from spectral_lab.services.fields import (
  MetricField,
  MetricGrid,
  PerturbationTensor,
  PeriodicGrid,
  TrigSeries,
)
from spectral_lab.services.galerkin_torus import cluster_eigenvalues
from spectral_lab.services.linalg_core import (
  SAMPLED_REL_TOL,
  SymMatrix,
  numerical_nullspace,
  sym_eig,
  sym_index_pairs,
  sym_size,
)
from spectral_lab.services.parallel import map_ordered
from spectral_lab.services.torus_lattice import DegeneracyReport, classify, dual_points_in_ball

logger = logging.getLogger(__name__)

PATH_REL_TOL = 1e-9
CURVED_PATH_REL_TOL = 1e-6
BAND_TOL = 1e-10
GRAM_DEVIATION_TOL = 1e-6
RELATION_TOL = 1e-8
MIN_DIRECTIONS = 60
MIN_DIRECTION_RADIUS = 3.0

Mode = Literal['full', 'conformal']


def _perturbation_band(metric: MetricField, h: PerturbationTensor) -> int:
  return h.max_index(metric) + metric.max_index


def _check_band(grid: PeriodicGrid, u: np.ndarray, h_band: int) -> None:
  limit = grid.size // 2 - 1 - h_band
  if limit < 0:
    raise BandLimitError(f'a {grid.size}-point grid cannot resolve a perturbation of band {h_band}')
  excess = grid.band_excess(u, limit)
  if excess > BAND_TOL:
    raise BandLimitError(
      f'function carries {excess:.2e} of its spectrum beyond index {limit} on a {grid.size} grid'
    )


def variation_apply(
  metric: MetricField, h: PerturbationTensor, u: np.ndarray, grid: PeriodicGrid
) -> np.ndarray:
  """D_h Delta_g u sampled on ``grid``.

  Args:
      metric: Base metric g.
      h: Direction of the metric variation.
      u: Values of a band-limited function at the grid nodes.
      grid: Sampling grid.

  Raises:
      BandLimitError: If ``u`` has Fourier content the grid cannot differentiate exactly
          after multiplication by the perturbation.
  """
  u = np.asarray(u, dtype=float)
  _check_band(grid, u, _perturbation_band(metric, h))
  metric_grid = metric.on_grid(grid)
  h_values = h.evaluate(metric, grid)
  grad_u = grid.gradient(u)
  tau = metric_grid.trace(h_values)
  first = 0.5 * metric_grid.inner(grid.gradient(tau), grad_u)
  flux = metric_grid.sqrt_det * np.einsum('jkN,kN->jN', metric_grid.raise_indices(h_values), grad_u)
  divergence = sum(grid.derivative(flux[j], j) for j in range(grid.dim))
  return first - divergence / metric_grid.sqrt_det


@dataclass(frozen=True)
class SplittingMatrix:
  """M(h) in the ordered eigenbasis, with the gap between its two assembly paths."""

  entries: SymMatrix
  direction: PerturbationTensor
  path_gap: float
  grid_size: int

  def eigenvalues(self) -> np.ndarray:
    """Splitting eigenvalues, ascending."""
    return sym_eig(self.entries)[0]


@dataclass(frozen=True)
class _Sampled:
  basis: EigenspaceBasis
  values: np.ndarray
  partials: np.ndarray
  laplacian: np.ndarray
  grad_products: np.ndarray

  @property
  def metric_grid(self) -> MetricGrid:
    """The metric on the sampling grid."""
    return self.basis.metric_grid


class SplittingAssembler:
  """Splitting matrices of many directions against one eigenbasis.

  Every matrix is computed twice: from the integrated tensor formula

      M_ab = int -1/2 tau (Delta u_a) u_b - 1/2 tau g(du_a, du_b) + h^{jk} d_j u_a d_k u_b dmu

  with tau = tr_g h, and by quadrature of u_a D_h Delta_g u_b. Grid samples are cached per
  grid size, so one assembler can be shared by worker threads.
  """

  def __init__(
    self, basis: EigenspaceBasis, check_paths: bool = True, rel_tol: float = PATH_REL_TOL
  ):
    self.basis = basis
    self.check_paths = check_paths
    self.rel_tol = rel_tol
    self._cache: dict[int, _Sampled] = {}
    self._lock = threading.Lock()

  def grid_size_for(self, h: PerturbationTensor) -> int:
    """Smallest grid on which a flat-metric splitting matrix is integrated exactly.

    Curved metrics are not band-limited after inversion; they get twice that size.
    """
    h_band = _perturbation_band(self.basis.metric, h)
    size = max(self.basis.grid.size, default_grid_size(self.basis.u_band, h_band))
    return size if self.basis.metric.is_flat() else 2 * size

  def _sampled(self, size: int) -> _Sampled:
    with self._lock:
      cached = self._cache.get(size)
      if cached is None:
        basis = self.basis.resampled(size)
        partials = basis.partials
        grad_products = np.einsum(
          'jaN,jkN,kbN->abN', partials, basis.metric_grid.ginv, partials, optimize=True
        )
        cached = _Sampled(basis, basis.values, partials, basis.laplacian_values(), grad_products)
        self._cache[size] = cached
        logger.debug('sampled %d basis functions on a %d grid', basis.m, size)
      return cached

  def __call__(self, h: PerturbationTensor) -> SplittingMatrix:
    """M(h).

    Raises:
        QuadratureMismatchError: If the two assembly paths differ by more than
            ``rel_tol * max(1, ||M||)``.
    """
    s = self._sampled(self.grid_size_for(h))
    metric_grid = s.metric_grid
    h_values = h.evaluate(self.basis.metric, metric_grid.grid)
    tau = metric_grid.trace(h_values)
    h_up = metric_grid.raise_indices(h_values)
    w = metric_grid.density
    tensor = (
      -0.5 * (s.laplacian * (w * tau)) @ s.values.T
      - 0.5 * np.einsum('abN,N->ab', s.grad_products, w * tau)
      + np.einsum('jaN,jkN,kbN,N->ab', s.partials, h_up, s.partials, w, optimize=True)
    )
    tensor = 0.5 * (tensor + tensor.T)
    gap = 0.0
    if self.check_paths:
      direct = self._direct(s, tau, h_up)
      gap = float(np.max(np.abs(tensor - direct), initial=0.0))
      scale = max(1.0, float(np.linalg.norm(tensor)))
      tol = self.rel_tol if self.basis.metric.is_flat() else max(self.rel_tol, CURVED_PATH_REL_TOL)
      if gap > tol * scale:
        raise QuadratureMismatchError(
          f'tensor formula and direct quadrature differ by {gap:.3e} (scale {scale:.3e}) '
          f'on a {metric_grid.grid.size} grid'
        )
    return SplittingMatrix(SymMatrix.from_dense(tensor), h, gap, metric_grid.grid.size)

  def _direct(self, s: _Sampled, tau: np.ndarray, h_up: np.ndarray) -> np.ndarray:
    metric_grid = s.metric_grid
    grid = metric_grid.grid
    first = 0.5 * np.einsum('jN,jkN,kbN->bN', grid.gradient(tau), metric_grid.ginv, s.partials)
    flux = metric_grid.sqrt_det * np.einsum('jkN,kbN->jbN', h_up, s.partials)
    divergence = np.zeros_like(first)
    for j in range(grid.dim):
      divergence += np.stack([grid.derivative(f, j) for f in flux[j]])
    applied = first - divergence / metric_grid.sqrt_det
    direct = (s.values * metric_grid.density) @ applied.T
    return 0.5 * (direct + direct.T)


def splitting_matrix(
  basis: EigenspaceBasis, h: PerturbationTensor, check_paths: bool = True
) -> SplittingMatrix:
  """M(h)_ab = <u_a, D_h Delta_g u_b> for the basis and metric of ``basis``."""
  return SplittingAssembler(basis, check_paths)(h)


def direction_radius(basis: EigenspaceBasis) -> float:
  """Frequency radius that reaches every product u_a u_b of the eigenbasis."""
  kappa = math.sqrt(abs(basis.eigenvalue)) / (2.0 * math.pi)
  return max(MIN_DIRECTION_RADIUS, 2.0 * kappa * (1.0 + 1e-6))


def random_direction(
  metric: MetricField,
  rng: np.random.Generator,
  radius: float = MIN_DIRECTION_RADIUS,
  conformal: bool = False,
  amplitude: float = 1.0,
) -> PerturbationTensor:
  """Random band-limited symmetric tensor (or conformal factor).

  Frequencies are the constant and every dual vector with |kappa| <= radius. Coefficients
  are standard normal, scaled by ``amplitude / sqrt(#coefficients)`` per component.
  """
  ks, _ = dual_points_in_ball(metric.lattice, radius)
  n = metric.dim
  zero = (0,) * n

  def series() -> TrigSeries:
    c = rng.standard_normal(2 * len(ks) + 1) * (amplitude / math.sqrt(2 * len(ks) + 1))
    terms = [(zero, c[0], 0.0)]
    terms += [(tuple(k), c[2 * i + 1], c[2 * i + 2]) for i, k in enumerate(ks.tolist())]
    return TrigSeries.from_terms(n, terms)

  if conformal:
    return PerturbationTensor.conformal_factor(series())
  return PerturbationTensor.explicit(n, {(j, k): series() for j, k in sym_index_pairs(n)})


def default_direction_count(m: int) -> int:
  """Directions used when none are configured."""
  return max(MIN_DIRECTIONS, sym_size(m) + 10)


class FirstOrderRow(BaseModel):
  """Predicted and computed cluster at one t."""
  t: float
  predicted: list[float]
  actual: list[float]
  deviation: float


class FirstOrderReport(BaseModel):
  """Deviation between lambda + t sigma(M(h)) and the computed cluster along g + t h."""

  eigenvalue: float
  multiplicity: int
  max_freq: float
  splitting_eigenvalues: list[float]
  path_gap: float
  rows: list[FirstOrderRow]
  slope: float | None = None

  def to_frame(self) -> pd.DataFrame:
    """Deviation against t."""
    return pd.DataFrame(
      {'t': [r.t for r in self.rows], 'deviation': [r.deviation for r in self.rows]}
    )


def default_max_freq(basis: EigenspaceBasis, h: PerturbationTensor) -> int:
  """Galerkin truncation covering the cluster and its first-order coupling."""
  kappa = math.sqrt(abs(basis.eigenvalue)) / (2.0 * math.pi)
  band = max(
    (s.bandwidth(basis.metric.lattice) for s in h.tensor_components(basis.metric).values()),
    default=0.0,
  )
  return math.ceil(kappa - 1e-9) + math.ceil(band - 1e-9) + 2


def fit_slope(ts: Sequence[float], deviations: Sequence[float]) -> float | None:
  """Least-squares slope of log deviation against log t over positive pairs."""
  pairs = [(t, d) for t, d in zip(ts, deviations) if t > 0 and d > 0]
  if len(pairs) < 2:
    return None
  x = np.log([t for t, _ in pairs])
  y = np.log([d for _, d in pairs])
  return float(np.polyfit(x, y, 1)[0])


def first_order_validation(
  basis: EigenspaceBasis,
  h: PerturbationTensor,
  t_grid: Sequence[float],
  max_freq: float | None = None,
  grid_size: int | None = None,
) -> FirstOrderReport:
  """Compare the first-order model with Galerkin eigenvalues of g + t h.

  ``t = 0`` is the base point: prediction and actual value coincide.

  Raises:
      ConfigError: With fewer than two positive t values.
      ClusterIsolationError: If the cluster merges with a neighbour at some t.
      NotPositiveDefiniteError: If g + t h degenerates at some t.
  """
  if any(t < 0 for t in t_grid):
    raise ConfigError('t values must be nonnegative')
  if len({t for t in t_grid if t > 0}) < 2:
    raise ConfigError('need ≥ 2 positive t values')
  splitting = splitting_matrix(basis, h)
  m_matrix = splitting.entries.dense()
  base = np.diag(basis.eigenvalues)
  max_freq = max_freq or default_max_freq(basis, h)
  metric = basis.metric

  def run(t: float) -> FirstOrderRow:
    predicted = np.sort(np.linalg.eigvalsh(base + t * m_matrix))
    if t == 0:
      values = predicted.tolist()
      return FirstOrderRow(t=t, predicted=values, actual=values, deviation=0.0)
    try:
      actual = cluster_eigenvalues(
        metric.perturbed(h, t), max_freq, float(np.mean(predicted)), basis.m, grid_size
      )
    except ClusterIsolationError as e:
      raise ClusterIsolationError(f'at t = {t:g}: {e}') from e
    except NotPositiveDefiniteError as e:
      raise NotPositiveDefiniteError(f'at t = {t:g}: {e}') from e
    deviation = float(np.max(np.abs(np.sort(actual) - predicted)))
    return FirstOrderRow(
      t=t, predicted=predicted.tolist(), actual=np.sort(actual).tolist(), deviation=deviation
    )

  rows = map_ordered(run, sorted(set(t_grid)))
  slope = fit_slope([r.t for r in rows], [r.deviation for r in rows])
  logger.info(
    'first-order check at lambda = %.6g: slope %s', basis.eigenvalue,
    'n/a' if slope is None else f'{slope:.3f}',
  )
  return FirstOrderReport(
    eigenvalue=basis.eigenvalue,
    multiplicity=basis.m,
    max_freq=max_freq,
    splitting_eigenvalues=splitting.eigenvalues().tolist(),
    path_gap=splitting.path_gap,
    rows=rows,
    slope=slope,
  )


class SAHReport(BaseModel):
  """Cokernel of h -> M(h) over sampled directions.

  ``submersion`` is a numerical certificate at the sampled directions, not a proof.
  """

  mode: Mode
  seed: int
  num_directions: int
  radius: float
  rel_tol: float
  cokernel_dim: int
  cokernel_matrices: list[list[list[float]]] = Field(default_factory=list)
  residual_max: float
  singular_values: list[float]
  verdict: Literal['submersion', 'sah_fails']

  @model_validator(mode='after')
  def _check_verdict(self) -> 'SAHReport':
    if len(self.cokernel_matrices) != self.cokernel_dim:
      raise ValueError('cokernel_dim does not match the reported matrices')
    if (self.verdict == 'sah_fails') != (self.cokernel_dim > 0):
      raise ValueError(f'verdict {self.verdict} contradicts cokernel dimension {self.cokernel_dim}')
    return self


def sah_cokernel_test(
  basis: EigenspaceBasis,
  mode: Mode = 'full',
  num_directions: int | None = None,
  seed: int = 0,
  rel_tol: float = SAMPLED_REL_TOL,
  radius: float | None = None,
) -> SAHReport:
  """Symmetric matrices orthogonal to M(h) for random directions h.

  In conformal mode every direction is h = f g.

  Raises:
      InsufficientDirectionsError: With fewer than m(m+1)/2 directions.
  """
  d = sym_size(basis.m)
  num_directions = num_directions or default_direction_count(basis.m)
  if num_directions < d:
    raise InsufficientDirectionsError(
      f'{num_directions} directions cannot span the {d}-dimensional space of symmetric '
      f'{basis.m} x {basis.m} matrices'
    )
  radius = radius or direction_radius(basis)
  rng = np.random.default_rng(seed)
  directions = [
    random_direction(basis.metric, rng, radius, conformal=mode == 'conformal')
    for _ in range(num_directions)
  ]
  assembler = SplittingAssembler(basis)
  splittings = map_ordered(assembler, directions)
  rows = np.stack([s.entries.vectorize(orthonormal=True) for s in splittings])
  norms = np.linalg.norm(rows, axis=1)
  rows = rows / np.where(norms > 0, norms, 1.0)[:, None]
  null = numerical_nullspace(rows, rel_tol)
  residual = float(np.max(np.abs(rows @ null.basis.T), initial=0.0))
  matrices = [SymMatrix.from_vector(v, basis.m, orthonormal=True).to_json() for v in null.basis]
  logger.info(
    '%s-mode cokernel at lambda = %.6g: dimension %d from %d directions',
    mode, basis.eigenvalue, null.nullity, num_directions,
  )
  return SAHReport(
    mode=mode,
    seed=seed,
    num_directions=num_directions,
    radius=radius,
    rel_tol=rel_tol,
    cokernel_dim=null.nullity,
    cokernel_matrices=matrices,
    residual_max=residual,
    singular_values=null.singular_values.tolist(),
    verdict='sah_fails' if null.nullity else 'submersion',
  )


def _check_gram(basis: EigenspaceBasis) -> None:
  deviation = float(np.max(np.abs(basis.gram() - np.eye(basis.m)), initial=0.0))
  if deviation > GRAM_DEVIATION_TOL:
    raise BasisNotOrthonormalError(f'Gram matrix deviates from identity by {deviation:.3e}')


def _resolving(basis: EigenspaceBasis) -> EigenspaceBasis:
  """The basis on a grid that determines products u_a u_b from their samples."""
  if basis.grid.size > 4 * basis.u_band:
    return basis
  return basis.resampled(4 * basis.u_band + 2)


def relation_systems(basis: EigenspaceBasis) -> tuple[np.ndarray, np.ndarray]:
  """Product and gradient-product systems in orthonormal packed coordinates.

  Column (a, b) of the product system holds samples of u_a u_b (times sqrt 2 off the
  diagonal) weighted by sqrt(dmu); its null vectors are relations sum A^{ab} u_a u_b = 0.
  The gradient system stacks the symmetrized d_j u_a d_k u_b for j <= k, scaled by 1/|lambda|.
  """
  pairs = np.array(sym_index_pairs(basis.m))
  a, b = pairs[:, 0], pairs[:, 1]
  weight = np.where(a == b, 1.0, math.sqrt(2.0))[:, None]
  sqrt_w = np.sqrt(basis.metric_grid.density)
  u = basis.values
  products = (weight * u[a] * u[b] * sqrt_w).T
  du = basis.partials
  scale = 1.0 / abs(basis.eigenvalue)
  blocks = [
    (weight * 0.5 * (du[j][a] * du[k][b] + du[k][a] * du[j][b]) * sqrt_w).T * scale
    for j, k in sym_index_pairs(basis.dim)
  ]
  return products, np.vstack(blocks)


def classify_from_samples(
  basis: EigenspaceBasis, rel_tol: float = SAMPLED_REL_TOL
) -> DegeneracyReport:
  """Conformal and full degeneracy of a sampled eigenbasis.

  Raises:
      BasisNotOrthonormalError: If the Gram matrix deviates from identity by more than 1e-6.
  """
  basis = _resolving(basis)
  _check_gram(basis)
  products, gradients = relation_systems(basis)
  conformal = numerical_nullspace(products, rel_tol)
  full = numerical_nullspace(np.vstack([products, gradients]), rel_tol)

  def packed(null) -> list[list[float]]:
    return [SymMatrix.from_vector(v, basis.m, orthonormal=True).packed.tolist() for v in null.basis]

  return DegeneracyReport(
    classification=classify(conformal.nullity, full.nullity),
    multiplicity=basis.m,
    conformal_nullity=conformal.nullity,
    full_nullity=full.nullity,
    witness_kind='relation_matrix',
    conformal_witnesses=packed(conformal),
    full_witnesses=packed(full),
  )


def relation_values(basis: EigenspaceBasis, relation: SymMatrix) -> np.ndarray:
  """sum A^{ab} u_a u_b at the grid nodes."""
  return np.einsum('ab,aN,bN->N', relation.dense(), basis.values, basis.values)


def _square_scale(basis: EigenspaceBasis) -> float:
  return float(np.max(basis.values**2))


class GradientRelationReport(BaseModel):
  """Function-relation residuals of gradient relations, plus non-relation controls."""

  gradient_nullity: int
  relation_residual: float
  tolerance: float
  passed: bool
  control_residuals: list[float] = Field(default_factory=list)


def gradient_relation_check(
  basis: EigenspaceBasis, trials: int = 5, seed: int = 0, rel_tol: float = SAMPLED_REL_TOL
) -> GradientRelationReport:
  """Check that every A with sum A^{ab} du_a (x) du_b = 0 also has sum A^{ab} u_a u_b = 0.

  Residuals are max-norms relative to max_a ||u_a||^2_inf for A of unit Frobenius norm.
  ``trials`` random matrices orthogonal to the gradient relations serve as controls; their
  function relations must not vanish.
  """
  basis = _resolving(basis)
  _, gradients = relation_systems(basis)
  null = numerical_nullspace(gradients, rel_tol)
  scale = _square_scale(basis)

  def residual(v: np.ndarray) -> float:
    relation = SymMatrix.from_vector(v, basis.m, orthonormal=True)
    return float(np.max(np.abs(relation_values(basis, relation)))) / scale

  worst = max((residual(v) for v in null.basis), default=0.0)
  rng = np.random.default_rng(seed)
  controls = []
  for _ in range(trials):
    v = rng.standard_normal(sym_size(basis.m))
    v -= null.basis.T @ (null.basis @ v)
    controls.append(residual(v / np.linalg.norm(v)))
  return GradientRelationReport(
    gradient_nullity=null.nullity,
    relation_residual=worst,
    tolerance=RELATION_TOL,
    passed=worst <= RELATION_TOL,
    control_residuals=controls,
  )


def localization_residual(basis: EigenspaceBasis, relation: SymMatrix, mode: Mode) -> float:
  """Max-norm of the localized obstruction tensor of ``relation``, relative to its scale.

  full:      sum A^{ab} (lambda/2 u_a u_b g + 1/2 g(du_a, du_b) g - du_a (x) du_b)
  conformal: sum A^{ab} (lambda u_a u_b + (n - 2)/n g(du_a, du_b))
  """
  a = relation.dense()
  metric_grid = basis.metric_grid
  lam = basis.eigenvalue
  n = basis.dim
  du = basis.partials
  uu = relation_values(basis, relation)
  gg = np.einsum('ab,jaN,jkN,kbN->N', a, du, metric_grid.ginv, du, optimize=True)
  if mode == 'conformal':
    field = lam * uu + (n - 2) / n * gg
  else:
    dudu = np.einsum('ab,jaN,kbN->jkN', a, du, du, optimize=True)
    field = (0.5 * lam * uu + 0.5 * gg) * metric_grid.g - dudu
  scale = abs(lam) * _square_scale(basis) * max(relation.frobenius_norm(), 1e-300)
  return float(np.max(np.abs(field))) / scale


def square_sum_deviation(basis: EigenspaceBasis) -> float:
  """Relative deviation of sum u_a^2 from the constant m / vol_g."""
  total = np.sum(basis.values**2, axis=0)
  target = basis.m / float(np.sum(basis.metric_grid.density))
  return float(np.max(np.abs(total - target))) / target


def product_relation_matrix(m_first: int, m_second: int) -> SymMatrix:
  """diag(I/m_first, -I/m_second): the square-sum relation of a direct sum of two bases."""
  return SymMatrix.diag([1.0 / m_first] * m_first + [-1.0 / m_second] * m_second)
