"""Tests for flat-torus spectra and their degeneracy classification."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from spectral_lab.errors import SingularLatticeError, ZeroEigenvalueError
from spectral_lab.services.linalg_core import numerical_nullspace
from spectral_lab.services.torus_lattice import (
  DegeneracyReport,
  Lattice,
  TorusEigenvalue,
  degeneracy_threshold,
  dual_lattice,
  dual_points_in_ball,
  enumerate_spectrum,
  full_degeneracy_system,
  multiplicity_exclusions_hold,
  relation_to_eigenbasis_matrix,
  torus_degeneracy,
)


def _by_norm(spectrum):
  return {round(e.norm_sq, 9): e for e in spectrum}


def _naive_counts(limit):
  counts = {}
  r = int(math.isqrt(limit))
  for a in range(-r, r + 1):
    for b in range(-r, r + 1):
      n = a * a + b * b
      if 0 < n <= limit:
        counts[n] = counts.get(n, 0) + 1
  return counts


def test_dual_lattice_examples():
  np.testing.assert_allclose(dual_lattice(Lattice.integer(2)).basis, np.eye(2))
  np.testing.assert_allclose(dual_lattice(Lattice.rectangular([1, 2])).basis, np.diag([1, 0.5]))
  tri = dual_lattice(Lattice.triangular()).basis
  np.testing.assert_allclose(tri[:, 0], [1, 1 / math.sqrt(3)], atol=1e-12)
  np.testing.assert_allclose(tri[:, 1], [0, 2 / math.sqrt(3)], atol=1e-12)
  pairings = Lattice.triangular().matrix.T @ tri
  np.testing.assert_allclose(pairings, np.round(pairings), atol=1e-12)


def test_singular_lattice_rejected():
  with pytest.raises(SingularLatticeError):
    Lattice(dim=2, basis=[[1.0, 2.0], [2.0, 4.0]])


def test_lattice_json_columns():
  lattice = Lattice.model_validate({'dim': 2, 'basis': [[1, 0], [0, 2]]})
  np.testing.assert_allclose(lattice.matrix, np.diag([1, 2]))


def test_integer_lattice_spectrum():
  spectrum = _by_norm(enumerate_spectrum(Lattice.integer(2), 30))
  assert spectrum[1].multiplicity == 4
  assert spectrum[5].multiplicity == 8
  assert spectrum[25].multiplicity == 12
  assert spectrum[5].indices == [(2, 1), (1, 2), (2, -1), (1, -2)]
  assert spectrum[1].eigenvalue == pytest.approx(-4 * math.pi**2)


def test_multiplicities_match_naive_count():
  counts = _naive_counts(100)
  spectrum = enumerate_spectrum(Lattice.integer(2), 100)
  assert {round(e.norm_sq): e.multiplicity for e in spectrum} == counts
  for e in spectrum:
    assert e.multiplicity % 2 == 0
    for kappa in e.representatives:
      assert abs(np.dot(kappa, kappa) - e.norm_sq) <= 1e-9 * (1 + e.norm_sq)


def test_triangular_and_rectangular_lowest():
  assert enumerate_spectrum(Lattice.triangular(), 1.5)[0].multiplicity == 6
  lowest = enumerate_spectrum(Lattice.rectangular([1, 2]), 1.0)[0]
  assert lowest.norm_sq == pytest.approx(0.25)
  assert lowest.multiplicity == 2


def test_degeneracy_examples():
  spectrum = _by_norm(enumerate_spectrum(Lattice.integer(2), 5))
  one = torus_degeneracy(spectrum[1])
  assert (one.conformal_nullity, one.full_nullity) == (1, 0)
  assert one.classification == 'conformally_degenerate'
  assert one.conformal_witnesses == [[1, -1]]
  five = torus_degeneracy(spectrum[5])
  assert five.classification == 'degenerate'
  assert five.full_witnesses == [[1, -1, -1, 1]]
  two = torus_degeneracy(spectrum[2])
  assert (two.conformal_nullity, two.full_nullity) == (1, 0)


def test_full_nullity_cannot_exceed_conformal_nullity():
  with pytest.raises(ValidationError, match='exceeds conformal nullity'):
    DegeneracyReport(
      classification='degenerate',
      multiplicity=4,
      conformal_nullity=0,
      full_nullity=1,
      witness_kind='pair_coefficients',
    )


def test_rectangular_has_nondegenerate_eigenvalue():
  spectrum = enumerate_spectrum(Lattice.rectangular([1, 2]), 1.0)
  classes = {round(e.norm_sq, 6): torus_degeneracy(e).classification for e in spectrum}
  assert classes[0.25] == 'nondegenerate'
  assert 'conformally_degenerate' in classes.values()


def test_zero_eigenvalue_rejected():
  zero = TorusEigenvalue(
    lattice=Lattice.integer(2), norm_sq=0.0, multiplicity=1, indices=[], representatives=[]
  )
  with pytest.raises(ZeroEigenvalueError):
    torus_degeneracy(zero)


def test_full_witnesses_sum_to_zero():
  for lattice in (Lattice.integer(2), Lattice.integer(3)):
    for e in enumerate_spectrum(lattice, 30):
      for mu in torus_degeneracy(e).full_witnesses:
        assert sum(mu) == 0


def test_integer_coordinates_match_physical_system():
  lattice = Lattice(dim=2, basis=[[1.0, 0.0], [0.5, 1.5]])
  for e in enumerate_spectrum(lattice, 20):
    kappas = np.array(e.representatives)
    physical = np.array([[k[a] * k[b] for k in kappas] for a, b in ((0, 0), (0, 1), (1, 1))])
    exact = torus_degeneracy(e).full_nullity
    assert numerical_nullspace(physical, 1e-10).nullity == exact
    assert full_degeneracy_system(e).cols == e.pairs


def test_multiplicity_exclusions_and_threshold():
  rng = np.random.default_rng(0)
  lattices = [Lattice.integer(2)]
  for _ in range(20):
    dim = int(rng.integers(2, 4))
    basis = np.eye(dim) + 0.3 * rng.standard_normal((dim, dim))
    lattices.append(Lattice(dim=dim, basis=basis.T.tolist()))
  for lattice in lattices:
    limit = 100 if lattice.dim == 2 and lattice.basis == [[1.0, 0.0], [0.0, 1.0]] else 20
    for e in enumerate_spectrum(lattice, limit):
      report = torus_degeneracy(e)
      assert multiplicity_exclusions_hold(report)
      assert report.full_nullity <= report.conformal_nullity
      if e.multiplicity >= degeneracy_threshold(lattice.dim):
        assert report.classification == 'degenerate'


def test_scaling_invariance():
  base = Lattice(dim=2, basis=[[1.0, 0.0], [0.25, 1.0]])
  scaled = base.scaled(2.0)
  a, b = enumerate_spectrum(base, 10), enumerate_spectrum(scaled, 10 / 4)
  assert len(a) == len(b)
  for x, y in zip(a, b):
    assert y.norm_sq == pytest.approx(x.norm_sq / 4)
    rx, ry = torus_degeneracy(x), torus_degeneracy(y)
    assert (rx.multiplicity, rx.conformal_nullity, rx.full_nullity, rx.classification) == (
      ry.multiplicity,
      ry.conformal_nullity,
      ry.full_nullity,
      ry.classification,
    )


def test_relation_matrix_vanishes_on_grid():
  spectrum = _by_norm(enumerate_spectrum(Lattice.integer(2), 5))
  e = spectrum[5]
  a = relation_to_eigenbasis_matrix(e, [1, -1, -1, 1])
  np.testing.assert_array_equal(np.diag(a.dense()), [1, 1, -1, -1, -1, -1, 1, 1])
  assert np.diag(relation_to_eigenbasis_matrix(spectrum[1], [1, -1]).dense()).tolist() == [
    1,
    1,
    -1,
    -1,
  ]
  mu = np.array([0.3, -1.1, 2.0, -1.2])
  a = relation_to_eigenbasis_matrix(e, mu).dense()
  y = np.stack(np.meshgrid(np.arange(64) / 64, np.arange(64) / 64, indexing='ij'), axis=-1)
  phases = [2 * np.pi * (y @ np.array(k)) for k in e.indices]
  u = np.stack([f(p) for p in phases for f in (np.cos, np.sin)])
  value = np.einsum('ab,axy,bxy->xy', a, u, u)
  assert np.max(np.abs(value)) <= 1e-12


def test_dual_points_in_ball():
  ks, kappas = dual_points_in_ball(Lattice.integer(2), 1.5)
  assert sorted(map(tuple, ks.tolist())) == [(0, 1), (1, -1), (1, 0), (1, 1)]
  np.testing.assert_allclose(kappas, ks)
