"""Exception hierarchy.

Every error belongs to one pipeline stage; the stage base class decides the
CLI exit code (config 2, data 3, crypto 4, training 5).
"""


class PrivfedError(Exception):
    stage = "pipeline"
    exit_code = 1


class ConfigError(PrivfedError):
    stage = "config"
    exit_code = 2


class DataError(PrivfedError):
    stage = "data"
    exit_code = 3


class CryptoError(PrivfedError):
    stage = "crypto"
    exit_code = 4


class TrainingError(PrivfedError):
    stage = "training"
    exit_code = 5


class DimensionMismatch(PrivfedError, ValueError):
    pass


class LengthMismatch(PrivfedError, ValueError):
    pass


# data ingest
class MissingFile(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class ParseError(DataError):
    def __init__(self, row: int, col: int, value: str):
        super().__init__(f"cannot parse {value!r} at row {row}, column {col}")
        self.row = row
        self.col = col
        self.value = value


class EmptyData(DataError):
    pass


class DegenerateSplit(DataError):
    pass


class TooFewRows(DataError):
    def __init__(self, label: int, count: int, k: int):
        super().__init__(f"class {label} has {count} rows, fewer than k={k} clients")
        self.label = label
        self.count = count
        self.k = k


# smote
class TooFewMinority(DataError):
    pass


class SingleClass(DataError):
    pass


# learner
class SingleClassInit(TrainingError):
    pass


class InvalidHyper(ConfigError):
    pass


class MalformedModel(TrainingError):
    pass


# crypto envelope
class InvalidToken(CryptoError):
    pass


class InvalidSignature(InvalidToken):
    pass


class Expired(InvalidToken):
    pass


class InvalidPadding(InvalidToken):
    pass


class CryptoFailure(CryptoError):
    def __init__(self, client_id: int, cause: Exception):
        super().__init__(f"client {client_id}: {type(cause).__name__}: {cause}")
        self.client_id = client_id
        self.cause = cause


# dp
class InvalidEpsilon(ConfigError, ValueError):
    pass


class InvalidScore(PrivfedError, ValueError):
    pass


# federation / metrics
class AllZeroMass(TrainingError):
    pass


class TrainingFailure(TrainingError):
    pass


class EmptyInput(PrivfedError, ValueError):
    pass
