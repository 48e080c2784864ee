"""Exception hierarchy shared by all mfunclab modules.

Every failure mode that carries spectral meaning gets its own class, so
callers (in particular the scan driver) can translate exceptions into
per-point status flags instead of aborting a whole sweep.
"""


class MfunclabError(Exception):
    """Base class for all package errors."""


class SingularMatrix(MfunclabError):
    """Pivoted elimination met a pivot below pivot_eps * ||A||_inf.

    For boundary matrices this signals a spectral parameter sitting on
    (or numerically indistinguishable from) a spectral point, or a
    degenerate boundary realization.
    """


class StepUnderflow(MfunclabError):
    """The adaptive step controller drove the step size below the
    representable minimum, typically because the coefficients become
    near-singular for the requested spectral parameter."""


class GridMismatch(MfunclabError):
    """Two grid functions living on different grids were combined."""


class DirichletSpectrum(MfunclabError):
    """The Dirichlet-trace matrix on the solution kernel is singular:
    the spectral parameter lies in the spectrum of the Dirichlet-type
    reference realization."""


class SpectralPoint(MfunclabError):
    """The boundary matrix of the requested realization is singular:
    the spectral parameter is an eigenvalue of that realization (while
    the reference problem is still solvable)."""


class SamplerFailed(MfunclabError):
    """A contour node evaluation raised; the holomorphy residual is
    undefined for this contour."""


class CoefficientSingularity(MfunclabError):
    """A denominator built from the coefficients (lambda - c, or the
    coupling bracket 1 - ab/(lambda - c)) fell below den_eps."""


class NeumannEigenvalue(MfunclabError):
    """The closed-form M-matrix is undefined because the first basis
    solution has vanishing derivative at the right endpoint."""


class BracketSingular(MfunclabError):
    """One of the endpoint brackets ab/(lambda-c) - 1 entering the
    closed-form M-matrix vanishes."""


class HypothesisViolated(MfunclabError):
    """The twin construction was requested on an interval where the
    coupling coefficient b does not vanish identically."""


class SectorViolation(MfunclabError):
    """The square-root parameter mu left the open sector |arg mu| < pi/4."""


class DegenerateRoots(MfunclabError):
    """The two characteristic roots coincide (cannot occur for mu in the
    open sector; guarded against defensively)."""


class SymbolPole(MfunclabError):
    """The scalar boundary symbol has a pole: the symbol-level boundary
    operator is not invertible at this frequency."""


class ConfigError(MfunclabError):
    """A structured configuration file failed validation."""
