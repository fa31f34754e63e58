"""Exception types shared across the toolkit."""


class RdskitError(Exception):
    """Base class for all toolkit errors."""


class DegenerateEmbedding(RdskitError):
    """A vector with (near-)zero norm cannot be placed on the unit sphere."""


class LengthMismatch(RdskitError):
    """Paired inputs (embeddings vs. weights, scores vs. labels) disagree in length."""


class InvalidLikelihood(RdskitError):
    """Non-finite or otherwise unusable likelihood input."""


class EmptyGeneration(RdskitError):
    """A generation with no tokens cannot be scored."""


class InvalidVector(RdskitError):
    """Vector contains non-finite components."""


class SchemaError(RdskitError):
    """Input file violates the record schema."""


class SchemaVersionError(SchemaError):
    """Record carries an unsupported schema version."""


class DuplicateId(SchemaError):
    """Two records in one file share an id."""


class EncoderInconsistency(RdskitError):
    """An embedding endpoint returned vectors of disagreeing dimension."""


class AuthenticationError(RdskitError):
    """Endpoint rejected the credentials; not retryable."""


class TransportError(RdskitError):
    """Request failed after exhausting retries."""


class PartialBatch(RdskitError):
    """Endpoint returned fewer completions than requested.

    Carries the samples that were returned so the caller can decide
    whether to keep or re-request.
    """

    def __init__(self, message: str, samples: list):
        super().__init__(message)
        self.samples = samples


class ConfigError(RdskitError):
    """Invalid or infeasible configuration."""
