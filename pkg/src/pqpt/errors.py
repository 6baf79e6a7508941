"""Exception types raised across the package."""


class PqptError(Exception):
    """Base class for every error raised by pqpt."""


class ParseError(PqptError):
    def __init__(self, position: int, message: str = "malformed document"):
        self.position = position
        super().__init__(f"{message} at position {position}")


class SchemaError(PqptError):
    def __init__(self, field: str, message: str = "missing or invalid field"):
        self.field = field
        super().__init__(f"{message}: {field!r}")


class DuplicateId(PqptError):
    def __init__(self, finding_id: str):
        self.id = finding_id
        super().__init__(f"duplicate finding id {finding_id}")


class UnsupportedMethodology(PqptError):
    pass


class NonMonotoneTimestamp(PqptError):
    pass


class UnregisteredParams(PqptError):
    pass


class MessageLengthMismatch(PqptError):
    pass


class ParamMismatch(PqptError):
    pass


class MalformedBlob(PqptError):
    pass


class NoSuchCategoryInSet(PqptError):
    pass


class EmptySet(PqptError):
    pass


class IllegalEvent(PqptError):
    pass


class LedgerCorrupt(PqptError):
    def __init__(self, outcome):
        self.outcome = outcome
        super().__init__(f"ledger verification failed: {outcome}")


class ConfigInvalid(PqptError):
    pass
