"""Exception types shared across the package."""


class DimensionMismatch(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class ShapeMismatch(ValueError):
    """Per-node matrices disagree in shape."""


class RankDeficient(ValueError):
    """Matrix does not have full numerical column rank."""


class RankCollapse(RuntimeError):
    """An iterate lost rank during orthonormalization."""


class NotPositiveDefinite(ValueError):
    """Matrix is not positive definite (a Cholesky pivot was too small)."""


class NotSymmetric(ValueError):
    """Matrix is not symmetric within tolerance."""


class NotPSD(ValueError):
    """Matrix has a significantly negative eigenvalue."""


class EigengapError(ValueError):
    """The r-th and (r+1)-th eigenvalues coincide, so the target subspace is ill-defined."""


class InvalidSpec(ValueError):
    """Spectrum specification violates its constraints."""


class TooFewItems(ValueError):
    """Not enough samples/features to give every node a nonempty shard."""


class TooSmall(ValueError):
    """Requested graph is below the minimum size for its family."""


class DisconnectedAfterRetries(RuntimeError):
    """Random graph sampling never produced a connected graph."""


class NotMixing(RuntimeError):
    """The chain does not mix (iteration cap exceeded or a unit-modulus eigenvalue)."""


class SlowConvergence(RuntimeError):
    """Per-vector power iteration hit its cap without converging."""


class ParseError(ValueError):
    """Malformed numeric text input."""


class RaggedRows(ParseError):
    """CSV rows have inconsistent lengths."""


class PeerTimeout(RuntimeError):
    """A socket peer did not respond within the deadline."""


class FrameCorruption(RuntimeError):
    """A framed matrix message failed validation."""


class ConfigError(ValueError):
    """Experiment configuration problem; `field` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
