"""Exception hierarchy.

Every error raised by the package derives from :class:`SynthTestError`. The three
intermediate classes map onto CLI exit codes (config 2, data 3, numeric 4).
"""


class SynthTestError(Exception):
    exit_code = 1


class ConfigError(SynthTestError):
    exit_code = 2


class DataError(SynthTestError):
    exit_code = 3


class NumericError(SynthTestError):
    exit_code = 4


# -- ingestion / schema ---------------------------------------------------------------


class SchemaError(ConfigError):
    pass


class MissingColumn(DataError):
    pass


class UnknownCategory(DataError):
    def __init__(self, feature, value, row):
        super().__init__(f"row {row}: value {value!r} is not a declared category of {feature!r}")
        self.feature = feature
        self.value = value
        self.row = row


class UnparseableNumber(DataError):
    def __init__(self, feature, value, row):
        super().__init__(f"row {row}: cannot parse {value!r} as a number for {feature!r}")
        self.feature = feature
        self.value = value
        self.row = row


class MissingValue(DataError):
    pass


class EmptyFile(DataError):
    pass


class EmptyDataset(DataError):
    pass


class BadFractions(ConfigError):
    pass


class UnknownFeature(ConfigError):
    pass


class NotContinuous(ConfigError):
    pass


class KindMismatch(ConfigError):
    pass


# -- predictors ------------------------------------------------------------------------


class DegenerateLabel(DataError):
    pass


class BadHyper(ConfigError):
    pass


class MissingPrediction(DataError):
    pass


class BadConfidence(DataError):
    pass


# -- generator / shifts ----------------------------------------------------------------


class SingularCorrelation(NumericError):
    pass


class ConditionOutOfSupport(NumericError):
    pass


class EmptyConditional(NumericError):
    pass


class DimensionMismatch(ConfigError):
    pass


class DegenerateBase(NumericError):
    pass


class AcceptanceStall(NumericError):
    pass


class NeighborhoodStall(NumericError):
    pass


# -- evaluation ------------------------------------------------------------------------


class EmptySubgroup(DataError):
    pass


class LengthMismatch(ConfigError):
    pass


class UndefinedRate(NumericError):
    pass


class TooFewRows(DataError):
    pass


class MissingResults(DataError):
    pass


class BadSpec(ConfigError):
    pass
