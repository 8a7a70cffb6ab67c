"""Exception hierarchy shared across the pipeline."""


class MalbenchError(Exception):
    """Base class for all pipeline errors."""


# --- ingest ---------------------------------------------------------------

class MalformedJson(MalbenchError):
    """A line could not be parsed as JSON."""

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


class SchemaViolation(MalbenchError):
    """A record is missing a field, or a field has wrong arity/type/value."""

    def __init__(self, field_path, message, record_ordinal=None):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path
        self.record_ordinal = record_ordinal


class IoFailure(MalbenchError):
    """A file could not be read or written."""


class MissingFragment(MalbenchError):
    """A manifest references a fragment file that does not exist."""


class InconsistentManifest(MalbenchError):
    """Manifest row counts disagree with actual fragment contents."""


# --- sample ---------------------------------------------------------------

class EmptyPool(MalbenchError):
    """One of the four sampling pools is empty."""


class InsufficientPool(MalbenchError):
    """A pool is too small for the requested draw."""

    def __init__(self, pool_name, requested, available):
        super().__init__(
            f"pool '{pool_name}' has {available} rows, {requested} requested "
            f"(short by {requested - available})"
        )
        self.pool_name = pool_name
        self.requested = requested
        self.available = available


class DanglingRowId(MalbenchError):
    """A dataset row id does not resolve to any fragment row."""


# --- learn ----------------------------------------------------------------

class DegenerateLabels(MalbenchError):
    """Training labels contain a single class."""


class NonFiniteFeature(MalbenchError):
    """Training matrix contains NaN or infinity."""


class WidthMismatch(MalbenchError):
    """Prediction matrix width differs from the training width."""


class Unsupported(MalbenchError):
    """The model does not support the requested operation (e.g. SVM scores)."""


class VersionMismatch(MalbenchError):
    """A saved model file carries an unknown format version."""


class CorruptModel(MalbenchError):
    """A saved model file is truncated or otherwise unreadable."""


# --- evaluate -------------------------------------------------------------

class LengthMismatch(MalbenchError):
    """Paired label/prediction vectors have different lengths."""


class EmptyInput(MalbenchError):
    """An operation received zero samples."""


class SingleClass(MalbenchError):
    """ROC analysis needs both classes present."""


class NoPositives(MalbenchError):
    """Recall is undefined without positive samples."""


# --- analyze --------------------------------------------------------------

class ZeroVariance(MalbenchError):
    """Correlation is undefined when a variable is constant."""


class NonDoublingLevels(MalbenchError):
    """Sensitivity series sizes do not form a doubling chain."""


class DegenerateX(MalbenchError):
    """Linear fit needs at least two distinct x values."""


# --- orchestrate / cli ----------------------------------------------------

class InvalidLevels(MalbenchError):
    """Experiment configuration levels are empty or not a doubling chain."""


class MissingColumn(MalbenchError):
    """A plot spec references a column absent from the input table."""
