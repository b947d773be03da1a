"""Exception hierarchy shared by every fedfocal module."""


class FedFocalError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(FedFocalError):
    """A config object or argument combination is invalid."""


class DimensionError(FedFocalError):
    """Array shapes or lengths do not line up."""


class NumericError(FedFocalError):
    """A computation produced or received non-finite values."""


class DomainError(FedFocalError):
    """A value lies outside its mathematical domain."""


class DataFormatError(FedFocalError):
    """A data file violates its binary or textual format."""


class DataLengthError(DataFormatError):
    """A data file is truncated or has trailing garbage."""


class ParseError(DataFormatError):
    """A cell or record could not be parsed; message carries row/column."""


class PartitionError(FedFocalError):
    """A federated split would leave some client without data."""


class ImbalanceError(FedFocalError):
    """A class-imbalance transform cannot retain any samples."""


class AggregationError(FedFocalError):
    """Server-side aggregation received unusable updates."""


class IntegrityError(FedFocalError):
    """Internal bookkeeping invariants were violated by the caller."""
