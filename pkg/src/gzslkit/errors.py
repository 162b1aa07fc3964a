"""Exception types shared across the toolkit."""


class GzslError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(GzslError, ValueError):
    """Operands have incompatible or undeclared shapes."""


class FormatError(GzslError, ValueError):
    """On-disk container violates the declared format."""


class ValidationError(GzslError, ValueError):
    """Dataset content violates the split contract."""


class UnsupportedOperationError(GzslError, TypeError):
    """Graph contains a node type outside the closed operator set."""


class TrainingDivergedError(GzslError, RuntimeError):
    """A loss or gradient became non-finite during optimization."""


class GenerationError(GzslError, ValueError):
    """Latent-set generation cannot satisfy its per-class contract."""


class DegenerateTrainingError(GzslError, ValueError):
    """Classifier training set does not span at least two classes."""


class UsageError(GzslError, ValueError):
    """An operation was called outside its documented contract."""


class DomainError(GzslError, ValueError):
    """A numeric argument lies outside the valid domain."""
