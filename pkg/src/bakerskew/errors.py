"""Exception types shared across the package."""


class BakerSkewError(Exception):
    """Base class for package errors."""


class CertificateFailure(BakerSkewError):
    """A required hypothesis certificate did not pass (CLI exit code 2)."""


class NonConvergenceError(BakerSkewError):
    """An iteration failed to converge (CLI exit code 3)."""


class FibreEscapeError(BakerSkewError):
    """A fibre orbit left its configured guard interval."""


class RootSeparationError(BakerSkewError):
    """The fixed-point scan resolution cannot separate roots; refine and retry."""


class AnchorInsideAttractorError(BakerSkewError):
    """Pullback anchor was not outside the global attractor (monotonicity in depth failed)."""


class DomainError(BakerSkewError):
    """A stable fibre could not be integrated even on its guaranteed domain."""


class DualityGapError(BakerSkewError):
    """Dual pressure root and direct Markov optimization disagree beyond tolerance."""
