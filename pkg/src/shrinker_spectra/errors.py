"""Exception hierarchy shared by all pipeline stages."""


class SpectralLabError(Exception):
    """Base class for every error raised by the package."""


class DegenerateMetric(SpectralLabError):
    """The first fundamental form is not positive definite at a parameter point."""


class OddOrderRequested(SpectralLabError):
    """Newton tensors of odd order were requested; only even orders are supported."""


class DimensionMismatch(SpectralLabError):
    """An order, index or array shape is incompatible with the manifold dimension."""


class NotPositiveDefinite(SpectralLabError):
    """A tensor field that must be positive definite fails somewhere on the samples."""


class UnsupportedDimension(SpectralLabError):
    """The finite-element path only handles intrinsic dimension 1 and 2."""


class EmptyBoundary(SpectralLabError):
    """A Dirichlet problem was requested on a geometry without boundary."""


class SingularMass(SpectralLabError):
    """The mass matrix could not be factorized for a solve."""


class MassNotSPD(SpectralLabError):
    """The mass matrix failed its Cholesky factorization in the eigen solve."""


class OracleSpectrum(SpectralLabError):
    """Eigenfunctions were requested from an analytic spectrum that carries none."""


class InsufficientSpectrum(SpectralLabError):
    """Fewer eigenpairs are available than an inequality needs."""


class RankCollapse(SpectralLabError):
    """The Gram-Schmidt rotation could not annihilate the required moments."""


class ConfigError(SpectralLabError):
    """A scenario configuration is malformed."""
