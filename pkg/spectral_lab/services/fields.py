"""Band-limited fields on flat tori: trigonometric series, periodic grids, metrics.

A point of the torus is written x = B y with y in [0, 1)^n, where B is the lattice basis.
A frequency is stored by its integer dual coordinates k, so that
exp(2 pi i kappa . x) = exp(2 pi i k . y) with kappa = B^{-T} k.
"""

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from spectral_lab.errors import NotPositiveDefiniteError
from spectral_lab.services.torus_lattice import Lattice, dual_lattice

logger = logging.getLogger(__name__)

Index = tuple[int, ...]
SPD_FLOOR = 1e-10


def _lead_positive(k: Index) -> bool:
  return next((x > 0 for x in k if x != 0), False)


@dataclass(frozen=True)
class TrigSeries:
  """Real trigonometric polynomial stored as Hermitian exponential coefficients."""

  dim: int
  coeffs: dict[Index, complex] = field(default_factory=dict)

  @classmethod
  def constant(cls, dim: int, value: float) -> 'TrigSeries':
    """The constant function ``value``."""
    return cls(dim, {(0,) * dim: complex(value)} if value else {})

  @classmethod
  def cos(cls, k: Index, amplitude: float = 1.0) -> 'TrigSeries':
    """amplitude * cos(2 pi k.y)."""
    return cls.from_terms(len(k), [(k, amplitude, 0.0)])

  @classmethod
  def sin(cls, k: Index, amplitude: float = 1.0) -> 'TrigSeries':
    """amplitude * sin(2 pi k.y)."""
    return cls.from_terms(len(k), [(k, 0.0, amplitude)])

  @classmethod
  def from_terms(cls, dim: int, terms) -> 'TrigSeries':
    """Sum of ``a cos(2 pi k.y) + b sin(2 pi k.y)`` over ``(k, a, b)`` triples."""
    out: dict[Index, complex] = {}
    for k, a, b in terms:
      k = tuple(int(x) for x in k)
      if len(k) != dim:
        raise ValueError(f'frequency {k} does not have {dim} coordinates')
      if not any(k):
        out[k] = out.get(k, 0) + a
        continue
      neg = tuple(-x for x in k)
      out[k] = out.get(k, 0) + 0.5 * a - 0.5j * b
      out[neg] = out.get(neg, 0) + 0.5 * a + 0.5j * b
    return cls(dim, {k: complex(c) for k, c in out.items() if c != 0})

  def is_zero(self) -> bool:
    """Whether every coefficient vanishes."""
    return not self.coeffs

  def __add__(self, other: 'TrigSeries') -> 'TrigSeries':
    out = dict(self.coeffs)
    for k, c in other.coeffs.items():
      out[k] = out.get(k, 0) + c
    return TrigSeries(self.dim, {k: c for k, c in out.items() if c != 0})

  def __sub__(self, other: 'TrigSeries') -> 'TrigSeries':
    return self + other.scale(-1.0)

  def scale(self, c: float) -> 'TrigSeries':
    """c s."""
    if c == 0:
      return TrigSeries(self.dim)
    return TrigSeries(self.dim, {k: c * v for k, v in self.coeffs.items()})

  def __mul__(self, other: 'TrigSeries') -> 'TrigSeries':
    out: dict[Index, complex] = {}
    for k1, c1 in self.coeffs.items():
      for k2, c2 in other.coeffs.items():
        k = tuple(a + b for a, b in zip(k1, k2))
        out[k] = out.get(k, 0) + c1 * c2
    return TrigSeries(self.dim, {k: c for k, c in out.items() if c != 0})

  @property
  def max_index(self) -> int:
    """Largest |k_i| over stored frequencies."""
    return max((max(abs(x) for x in k) for k in self.coeffs), default=0)

  def bandwidth(self, lattice: Lattice) -> float:
    """Largest |kappa| over stored frequencies."""
    dual = dual_lattice(lattice)
    return max((float(np.linalg.norm(dual.vector(k))) for k in self.coeffs), default=0.0)

  def is_constant(self) -> bool:
    """Whether only the zero frequency is present."""
    return all(not any(k) for k in self.coeffs)

  def evaluate(self, grid: 'PeriodicGrid') -> np.ndarray:
    """Values at the grid nodes."""
    if not self.coeffs:
      return np.zeros(grid.num_nodes)
    ks = np.array(list(self.coeffs), dtype=float)
    cs = np.array(list(self.coeffs.values()), dtype=complex)
    return (cs @ np.exp(2j * np.pi * (ks @ grid.y))).real

  def reindexed(self, unimodular: np.ndarray) -> 'TrigSeries':
    """Same function indexed by the dual coordinates of the basis ``B U``: k -> U^T k."""
    u_t = np.asarray(unimodular, dtype=np.int64).T
    return TrigSeries(
      self.dim, {tuple(int(x) for x in u_t @ np.array(k)): c for k, c in self.coeffs.items()}
    )

  def to_terms(self) -> list[tuple[Index, float, float]]:
    """Inverse of :meth:`from_terms`, one triple per antipodal pair."""
    terms = []
    for k in sorted(self.coeffs):
      c = self.coeffs[k]
      if not any(k):
        terms.append((k, float(c.real), 0.0))
      elif _lead_positive(k):
        terms.append((k, float(2 * c.real), float(-2 * c.imag)))
    return terms


@dataclass(frozen=True)
class PeriodicGrid:
  """Uniform grid of ``size**n`` nodes on the fundamental cell with trapezoidal weights."""

  lattice: Lattice
  size: int

  def __post_init__(self):
    if self.size < 1:
      raise ValueError('grid size must be positive')

  @property
  def dim(self) -> int:
    """Torus dimension n."""
    return self.lattice.dim

  @property
  def shape(self) -> tuple[int, ...]:
    """Array shape of a grid function."""
    return (self.size,) * self.dim

  @property
  def num_nodes(self) -> int:
    """Total node count N."""
    return self.size**self.dim

  @property
  def weight(self) -> float:
    """Trapezoidal weight of one node."""
    return self.lattice.volume / self.num_nodes

  @cached_property
  def y(self) -> np.ndarray:
    """Lattice coordinates, shape ``(n, N)``."""
    axes = np.meshgrid(*([np.arange(self.size) / self.size] * self.dim), indexing='ij')
    return np.stack([a.ravel() for a in axes])

  @cached_property
  def x(self) -> np.ndarray:
    """Physical coordinates, shape ``(n, N)``."""
    return self.lattice.matrix @ self.y

  @cached_property
  def _modes(self) -> np.ndarray:
    """Integer FFT frequencies per axis, shape ``(n, *shape)``."""
    freqs = np.rint(np.fft.fftfreq(self.size, d=1.0 / self.size)).astype(np.int64)
    return np.stack(np.meshgrid(*([freqs] * self.dim), indexing='ij'))

  @cached_property
  def _wavevectors(self) -> np.ndarray:
    """2 pi i kappa_j per FFT mode, zero on Nyquist modes; shape ``(n, *shape)``."""
    dual = dual_lattice(self.lattice).basis
    kappa = np.einsum('jl,l...->j...', dual, self._modes)
    if self.size % 2 == 0:
      nyquist = np.any(self._modes == -self.size // 2, axis=0)
      kappa[:, nyquist] = 0.0
    return 2j * np.pi * kappa

  def derivative(self, values: np.ndarray, j: int) -> np.ndarray:
    """Spectral partial derivative d/dx_j of a grid function."""
    spectrum = np.fft.fftn(values.reshape(self.shape))
    return np.fft.ifftn(spectrum * self._wavevectors[j]).real.ravel()

  def gradient(self, values: np.ndarray) -> np.ndarray:
    """Spectral gradient, shape ``(n, N)``."""
    spectrum = np.fft.fftn(values.reshape(self.shape))
    return np.stack(
      [np.fft.ifftn(spectrum * self._wavevectors[j]).real.ravel() for j in range(self.dim)]
    )

  def band_excess(self, values: np.ndarray, max_index: int) -> float:
    """Largest Fourier coefficient with some |k_i| > max_index, relative to the largest."""
    spectrum = np.abs(np.fft.fftn(values.reshape(self.shape)))
    top = float(spectrum.max(initial=0.0))
    if top == 0.0:
      return 0.0
    outside = np.any(np.abs(self._modes) > max_index, axis=0)
    return float(spectrum[outside].max(initial=0.0)) / top

  def integrate(self, values: np.ndarray) -> float:
    """Trapezoidal integral over the fundamental cell."""
    return float(self.weight * np.sum(values))

  def node(self, flat_index: int) -> tuple[tuple[int, ...], list[float]]:
    """Grid multi-index and physical position of a node."""
    return tuple(int(i) for i in np.unravel_index(flat_index, self.shape)), self.x[
      :, flat_index
    ].tolist()


@dataclass(frozen=True)
class MetricGrid:
  """A metric sampled at grid nodes: g_jk, g^jk and sqrt|g|, each with trailing node axis."""

  grid: PeriodicGrid
  g: np.ndarray
  ginv: np.ndarray
  sqrt_det: np.ndarray

  @cached_property
  def density(self) -> np.ndarray:
    """Quadrature weights for d mu_g."""
    return self.grid.weight * self.sqrt_det

  def raise_indices(self, h: np.ndarray) -> np.ndarray:
    """h^{jk} = g^{ja} h_ab g^{bk}."""
    return np.einsum('jaN,abN,bkN->jkN', self.ginv, h, self.ginv)

  def trace(self, h: np.ndarray) -> np.ndarray:
    """tr_g h = g^{jk} h_jk."""
    return np.einsum('jkN,jkN->N', self.ginv, h)

  def inner(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """g(da, db) for gradients of shape ``(n, N)``."""
    return np.einsum('jN,jkN,kN->N', a, self.ginv, b)

  def laplacian(self, values: np.ndarray) -> np.ndarray:
    """|g|^{-1/2} d_j(|g|^{1/2} g^{jk} d_k u), spectrally differentiated."""
    grad = self.grid.gradient(values)
    flux = self.sqrt_det * np.einsum('jkN,kN->jN', self.ginv, grad)
    divergence = sum(self.grid.derivative(flux[j], j) for j in range(self.grid.dim))
    return divergence / self.sqrt_det


class MetricTerm(BaseModel):
  """One Fourier term of a metric or perturbation component in JSON form."""

  jk: tuple[int, int]
  freq: list[int]
  cos: float = 0.0
  sin: float = 0.0


class MetricSpec(BaseModel):
  """JSON form of a metric: lattice plus component terms (``freq`` in integer dual coordinates)."""

  lattice: Lattice
  terms: list[MetricTerm] = Field(default_factory=list)


def _components_from_terms(dim: int, terms: list[MetricTerm]) -> dict[tuple[int, int], TrigSeries]:
  grouped: dict[tuple[int, int], list] = {}
  for term in terms:
    j, k = sorted(term.jk)
    if not 0 <= j <= k < dim:
      raise ValueError(f'component index {term.jk} out of range for dimension {dim}')
    grouped.setdefault((j, k), []).append((term.freq, term.cos, term.sin))
  return {jk: TrigSeries.from_terms(dim, rows) for jk, rows in grouped.items()}


def _terms_from_components(components: dict[tuple[int, int], TrigSeries]) -> list[MetricTerm]:
  return [
    MetricTerm(jk=jk, freq=list(k), cos=a, sin=b)
    for jk in sorted(components)
    for k, a, b in components[jk].to_terms()
  ]


@dataclass(frozen=True)
class MetricField:
  """Riemannian metric on R^n / L with band-limited components g_jk, j <= k."""

  lattice: Lattice
  components: dict[tuple[int, int], TrigSeries]

  @property
  def dim(self) -> int:
    """Torus dimension n."""
    return self.lattice.dim

  def component(self, j: int, k: int) -> TrigSeries:
    """g_jk as a series."""
    return self.components.get((min(j, k), max(j, k)), TrigSeries(self.dim))

  @classmethod
  def flat(cls, lattice: Lattice) -> 'MetricField':
    """Constant metric delta on the lattice."""
    return cls(lattice, {(j, j): TrigSeries.constant(lattice.dim, 1.0) for j in range(lattice.dim)})

  @classmethod
  def conformal(cls, lattice: Lattice, factor: TrigSeries) -> 'MetricField':
    """g = factor * delta."""
    return cls(lattice, {(j, j): factor for j in range(lattice.dim)})

  @classmethod
  def from_spec(cls, spec: MetricSpec) -> 'MetricField':
    """Metric from its JSON form."""
    return cls(spec.lattice, _components_from_terms(spec.lattice.dim, spec.terms))

  @classmethod
  def from_file(cls, path: str | Path) -> 'MetricField':
    """Load a metric from a JSON file."""
    return cls.from_spec(MetricSpec.model_validate(json.loads(Path(path).read_text())))

  def to_spec(self) -> MetricSpec:
    """JSON form of the metric."""
    return MetricSpec(lattice=self.lattice, terms=_terms_from_components(self.components))

  def perturbed(self, h: 'PerturbationTensor', t: float) -> 'MetricField':
    """g + t h."""
    out = dict(self.components)
    for jk, series in h.tensor_components(self).items():
      out[jk] = out.get(jk, TrigSeries(self.dim)) + series.scale(t)
    return MetricField(self.lattice, {jk: s for jk, s in out.items() if not s.is_zero()})

  def rebased(self, unimodular: np.ndarray) -> 'MetricField':
    """The same metric written over the lattice basis ``B U``."""
    return MetricField(
      self.lattice.rebased(unimodular),
      {jk: s.reindexed(unimodular) for jk, s in self.components.items()},
    )

  @property
  def max_index(self) -> int:
    """Largest |k_i| over all components."""
    return max((s.max_index for s in self.components.values()), default=0)

  @property
  def bandwidth(self) -> float:
    """Largest |kappa| over all components."""
    return max((s.bandwidth(self.lattice) for s in self.components.values()), default=0.0)

  def is_flat(self) -> bool:
    """Whether every component is constant."""
    return all(s.is_constant() for s in self.components.values())

  def evaluate(self, grid: PeriodicGrid) -> np.ndarray:
    """g_jk at the nodes, shape ``(n, n, N)``."""
    n = self.dim
    g = np.zeros((n, n, grid.num_nodes))
    for (j, k), series in self.components.items():
      values = series.evaluate(grid)
      g[j, k] = values
      g[k, j] = values
    return g

  def on_grid(self, grid: PeriodicGrid) -> MetricGrid:
    """Sample the metric and its inverse.

    Raises:
        NotPositiveDefiniteError: If g is not positive definite at some node.
    """
    g = self.evaluate(grid)
    stacked = np.moveaxis(g, -1, 0)
    smallest = np.linalg.eigvalsh(stacked)[:, 0]
    bad = int(np.argmin(smallest))
    if smallest[bad] <= SPD_FLOOR:
      index, x = grid.node(bad)
      raise NotPositiveDefiniteError(
        f'metric is not positive definite at node {index} (x = {x}): '
        f'smallest eigenvalue {smallest[bad]:.3e}'
      )
    ginv = np.moveaxis(np.linalg.inv(stacked), 0, -1)
    sqrt_det = np.sqrt(np.linalg.det(stacked))
    return MetricGrid(grid, g, ginv, sqrt_det)


@dataclass(frozen=True)
class PerturbationTensor:
  """Symmetric (0,2)-tensor field h, either explicit or conformal (h = factor * g)."""

  dim: int
  components: dict[tuple[int, int], TrigSeries] | None = None
  factor: TrigSeries | None = None

  def __post_init__(self):
    if (self.components is None) == (self.factor is None):
      raise ValueError('give exactly one of components or factor')

  @property
  def conformal(self) -> bool:
    """Whether h is a multiple of the metric."""
    return self.factor is not None

  @classmethod
  def explicit(
    cls, dim: int, components: dict[tuple[int, int], TrigSeries]
  ) -> 'PerturbationTensor':
    """Tensor with the given components; index pairs are sorted."""
    return cls(dim, components={(min(j, k), max(j, k)): s for (j, k), s in components.items()})

  @classmethod
  def conformal_factor(cls, factor: TrigSeries) -> 'PerturbationTensor':
    """h = factor * g."""
    return cls(factor.dim, factor=factor)

  @classmethod
  def scaling(cls, dim: int, c: float) -> 'PerturbationTensor':
    """h = c g."""
    return cls(dim, factor=TrigSeries.constant(dim, c))

  @classmethod
  def zero(cls, dim: int) -> 'PerturbationTensor':
    """h = 0."""
    return cls(dim, components={})

  @classmethod
  def from_terms(cls, dim: int, terms: list[MetricTerm]) -> 'PerturbationTensor':
    """Explicit tensor from JSON terms."""
    return cls.explicit(dim, _components_from_terms(dim, terms))

  def tensor_components(self, metric: MetricField) -> dict[tuple[int, int], TrigSeries]:
    """Explicit components h_jk, j <= k."""
    if self.factor is None:
      return dict(self.components)
    return {jk: self.factor * s for jk, s in metric.components.items()}

  def as_explicit(self, metric: MetricField) -> 'PerturbationTensor':
    """Same tensor with components written out against ``metric``."""
    return PerturbationTensor.explicit(self.dim, self.tensor_components(metric))

  def max_index(self, metric: MetricField) -> int:
    """Largest |k_i| over the explicit components."""
    return max((s.max_index for s in self.tensor_components(metric).values()), default=0)

  def evaluate(self, metric: MetricField, grid: PeriodicGrid) -> np.ndarray:
    """h_jk at the nodes, shape ``(n, n, N)``."""
    n = self.dim
    h = np.zeros((n, n, grid.num_nodes))
    for (j, k), series in self.tensor_components(metric).items():
      values = series.evaluate(grid)
      h[j, k] = values
      h[k, j] = values
    return h

  def scale(self, c: float) -> 'PerturbationTensor':
    """c h."""
    if self.factor is not None:
      return PerturbationTensor(self.dim, factor=self.factor.scale(c))
    scaled = {jk: s.scale(c) for jk, s in self.components.items()}
    return PerturbationTensor(self.dim, components=scaled)

  def combine(self, other: 'PerturbationTensor', metric: MetricField) -> 'PerturbationTensor':
    """self + other; conformal tensors stay conformal."""
    if self.conformal and other.conformal:
      return PerturbationTensor(self.dim, factor=self.factor + other.factor)
    a, b = self.tensor_components(metric), other.tensor_components(metric)
    keys = set(a) | set(b)
    zero = TrigSeries(self.dim)
    summed = {jk: a.get(jk, zero) + b.get(jk, zero) for jk in keys}
    return PerturbationTensor.explicit(self.dim, summed)

  def to_terms(self, metric: MetricField) -> list[MetricTerm]:
    """JSON terms of the explicit components."""
    return _terms_from_components(self.tensor_components(metric))


@dataclass(frozen=True)
class TrigModes:
  """Ordered real trigonometric modes: optional constant, then cos and sin per frequency."""

  lattice: Lattice
  indices: np.ndarray
  include_constant: bool = True

  @property
  def size(self) -> int:
    """Number of modes."""
    return int(self.include_constant) + 2 * self.indices.shape[0]

  @property
  def max_index(self) -> int:
    """Largest |k_i| over the frequencies."""
    return int(np.abs(self.indices).max(initial=0))

  @cached_property
  def kappas(self) -> np.ndarray:
    """Physical frequency vectors, shape ``(count, n)``."""
    return self.indices @ dual_lattice(self.lattice).basis.T

  def values(self, grid: PeriodicGrid) -> np.ndarray:
    """Mode values at the nodes, shape ``(size, N)``."""
    phases = 2.0 * np.pi * (self.indices @ grid.y)
    rows = [np.ones((1, grid.num_nodes))] if self.include_constant else []
    pairs = np.stack([np.cos(phases), np.sin(phases)], axis=1).reshape(-1, grid.num_nodes)
    return np.concatenate([*rows, pairs])

  def partials(self, grid: PeriodicGrid) -> np.ndarray:
    """Exact physical partials d/dx_j of every mode, shape ``(n, size, N)``."""
    phases = 2.0 * np.pi * (self.indices @ grid.y)
    cos, sin = np.cos(phases), np.sin(phases)
    out = []
    for j in range(self.lattice.dim):
      scale = 2.0 * np.pi * self.kappas[:, j : j + 1]
      rows = [np.zeros((1, grid.num_nodes))] if self.include_constant else []
      pairs = np.stack([-scale * sin, scale * cos], axis=1).reshape(-1, grid.num_nodes)
      out.append(np.concatenate([*rows, pairs]))
    return np.stack(out)

  def rayleigh_norms(self) -> np.ndarray:
    """4 pi^2 |kappa|^2 per mode, the flat Laplacian eigenvalue magnitude."""
    norms = 4.0 * np.pi**2 * np.repeat(np.einsum('ij,ij->i', self.kappas, self.kappas), 2)
    return np.concatenate([[0.0], norms]) if self.include_constant else norms
