"""Exception hierarchy for the lab.

Every error carries the process exit code the CLI reports for it.
"""


class LabError(Exception):
  """Base class for all lab errors."""

  exit_code = 1


class ConfigError(LabError):
  """Invalid configuration or input file."""

  exit_code = 2


class ComputationError(LabError):
  """A numerical or exact computation could not be completed."""

  exit_code = 3


class AcceptanceError(LabError):
  """An acceptance assertion failed."""

  exit_code = 4


class NonFiniteInputError(ComputationError):
  """A matrix handed to the linear-algebra layer contains NaN or Inf."""


class NotPositiveDefiniteError(ComputationError):
  """A mass matrix or metric failed a positive-definiteness check."""


class SingularLatticeError(ConfigError):
  """A lattice basis is (numerically) singular."""


class ZeroEigenvalueError(ComputationError):
  """The zero eigenvalue was passed where a nonzero one is required."""


class ResourceLimitError(ComputationError):
  """A problem exceeds a configured size budget."""

  def __init__(self, message: str, *, required: int, limit: int):
    super().__init__(f'{message} (required {required}, limit {limit})')
    self.required = required
    self.limit = limit


class GridTooSmallError(ComputationError):
  """The quadrature grid cannot integrate the requested products exactly."""

  def __init__(self, grid: int, required: int):
    super().__init__(f'quadrature grid {grid} is too small, need at least {required} per axis')
    self.grid = grid
    self.required = required


class BandLimitError(ComputationError):
  """A grid function carries frequencies beyond what the grid resolves."""


class ClusterIsolationError(ComputationError):
  """An eigenvalue cluster is not separated from its neighbours."""


class QuadratureMismatchError(ComputationError):
  """Two independent assembly paths disagree."""


class BasisNotOrthonormalError(ComputationError):
  """An eigenspace basis fails its Gram or eigen-residual check."""


class InsufficientDirectionsError(ComputationError):
  """Too few perturbation directions to certify a submersion."""
