"""Exception hierarchy shared by every ddns subsystem."""


class DdnsError(Exception):
    """Base class for all errors raised by this package."""


# -- names / asset paths ---------------------------------------------------


class ValidationFailure(DdnsError, ValueError):
    pass


class EmptyLabel(ValidationFailure):
    pass


class IllegalCharacter(ValidationFailure):
    pass


class TooLong(ValidationFailure):
    pass


class RootTooLong(TooLong):
    pass


class SubpathTooLong(TooLong):
    pass


class NotDdnsName(ValidationFailure):
    pass


class InvalidCid(ValidationFailure):
    pass


# -- record files ----------------------------------------------------------


class RecordFileError(DdnsError, ValueError):
    pass


class MalformedJson(RecordFileError):
    pass


class MissingTypeKey(RecordFileError):
    pass


class BadAddressSyntax(RecordFileError):
    pass


class BadRecordField(RecordFileError):
    pass


# -- content store ---------------------------------------------------------


class StoreError(DdnsError):
    pass


class EmptyPayload(StoreError, ValueError):
    pass


class PayloadTooLarge(StoreError, ValueError):
    pass


class StorageFailure(StoreError):
    pass


class NotFound(StoreError, KeyError):
    pass


class IntegrityMismatch(StoreError):
    pass


class SentinelCid(StoreError):
    pass


class PinningError(StoreError):
    pass


class AuthFailure(PinningError):
    pass


class QuotaExceeded(PinningError):
    pass


class RemoteMismatch(PinningError):
    pass


class NetworkFailure(PinningError):
    pass


# -- ledger ----------------------------------------------------------------


class LedgerError(DdnsError):
    pass


class DuplicateAsset(LedgerError):
    pass


class UnknownAsset(LedgerError, KeyError):
    pass


class NotOwner(LedgerError, PermissionError):
    pass


class InsufficientFunds(LedgerError):
    pass


class BadSignature(LedgerError):
    pass


class BadNonce(LedgerError):
    pass


class ChainCorrupted(LedgerError):
    pass


# -- wire ------------------------------------------------------------------


class WireError(DdnsError):
    """A datagram could not be decoded.

    ``msg_id`` carries the 16-bit message id when the first two bytes were
    readable, so a server can still answer with an error response.
    """

    def __init__(self, message: str, msg_id: int | None = None) -> None:
        super().__init__(message)
        self.msg_id = msg_id


class Truncated(WireError):
    pass


class FormErr(WireError):
    pass


class UnsupportedOpcode(WireError):
    pass


class BindFailure(DdnsError, OSError):
    pass


class ConfigError(DdnsError):
    pass
