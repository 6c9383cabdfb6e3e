"""Exception hierarchy shared across the package.

The four category classes map one-to-one onto CLI exit codes
(config -> 2, geometry -> 3, solver -> 4, output -> 5).
"""


class IgaMortarError(Exception):
    """Base class for all library errors."""


class ConfigError(IgaMortarError):
    """Invalid user input: degree, mode, knot data, run parameters."""


class GeometryError(IgaMortarError):
    """Invalid or degenerate geometry / topology."""


class SolverError(IgaMortarError):
    """Linear algebra failure during assembly or solve."""


class OutputError(IgaMortarError):
    """Failure while writing result files."""


# --- knot vectors and 1D spaces ---

class NonMonotoneError(ConfigError):
    """Breakpoints are not strictly increasing."""


class MultiplicityOutOfRangeError(ConfigError):
    """A knot multiplicity is outside [1, degree+1]."""


class TooFewElementsError(ConfigError):
    """Not enough interior breakpoints for end-element merging."""


class DegreeTooLowError(ConfigError):
    """Requested construction needs a higher polynomial degree."""


class OutOfDomainError(ConfigError):
    """Evaluation point outside [0, 1]."""


class OrderOutOfRangeError(ConfigError):
    """Quadrature order outside the supported range."""


class MeshTooCoarseError(ConfigError):
    """Mesh too coarse for the corner-window eigenvalue test."""


# --- geometry / topology ---

class DegenerateJacobianError(GeometryError):
    """det(grad F) fell below tolerance."""


class NonConformingInterfaceError(GeometryError):
    """Matched interface traces carry different boundary knot vectors."""


class OrientationMismatchError(GeometryError):
    """Interface sides match as point sets but no orientation aligns them."""


class DanglingSideError(GeometryError):
    """A patch side matches more than one other side."""


# --- assembly / solve ---

class SingularFitError(SolverError):
    """Boundary least-squares fit is singular (degenerate edge geometry)."""


class SingularSystemError(SolverError):
    """Saddle system is rank deficient beyond tolerance."""


class ResidualTooLargeError(SolverError):
    """Linear solve did not reach the required relative residual."""


# --- output ---

class ExportIOError(OutputError):
    """Could not write a CSV/VTK artifact."""
