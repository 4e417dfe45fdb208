"""Exception hierarchy.

Everything derives from :class:`BiomassError`.  :class:`InputError` covers
bad or insufficient data supplied by the caller; :class:`NumericalError`
covers failures of the linear algebra itself.  The CLI maps the two families
to distinct exit codes.
"""


class BiomassError(Exception):
    pass


class InputError(BiomassError, ValueError):
    pass


class NumericalError(BiomassError, ArithmeticError):
    pass


# --- ingestion -------------------------------------------------------------

class EmptyInput(InputError):
    def __init__(self, what="input"):
        super().__init__(f"{what} is empty")


class MissingColumn(InputError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"missing column {name!r}")


class BadNumeric(InputError):
    def __init__(self, row, column, value=None):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}: column {column!r} is not a valid number ({value!r})")


class InvalidRecord(InputError):
    pass


# --- datasets / splitting --------------------------------------------------

class EmptyDataset(InputError):
    def __init__(self, what="dataset"):
        super().__init__(f"{what} has no records")


class BadFraction(InputError):
    def __init__(self, fraction):
        self.fraction = fraction
        super().__init__(f"test_fraction must lie in (0, 1), got {fraction!r}")


class MissingField(InputError):
    def __init__(self, kind, field, row=None):
        self.kind = kind
        self.field = field
        self.row = row
        where = "" if row is None else f" (record {row})"
        super().__init__(f"{kind} requires field {field!r}, which is absent{where}")


class NonpositiveInput(InputError):
    pass


# --- gpr -------------------------------------------------------------------

class NonpositiveLengthScale(InputError):
    def __init__(self, value):
        super().__init__(f"length scale must be > 0, got {value!r}")


class EmptyTraining(InputError):
    def __init__(self):
        super().__init__("training inputs are empty")


class DegenerateData(InputError):
    pass


class SearchRangeInvalid(InputError):
    pass


class FactorizationFailure(NumericalError):
    def __init__(self, jitter):
        self.jitter = jitter
        super().__init__(f"Cholesky factorization failed even with diagonal jitter {jitter:g}")


# --- allometry -------------------------------------------------------------

class RankDeficient(NumericalError):
    pass


# --- evaluation / uncertainty ----------------------------------------------

class LengthMismatch(InputError):
    def __init__(self, n1, n2):
        super().__init__(f"length mismatch: {n1} vs {n2}")


class ZeroVariance(InputError):
    pass


class ZeroGroundTruth(InputError):
    pass


class TooFewPoints(InputError):
    pass


class EmptyPlot(InputError):
    pass


class NonpositiveLogBiomass(InputError):
    pass


class AllPocketsEmpty(InputError):
    pass


class ModelFormatError(InputError):
    pass
