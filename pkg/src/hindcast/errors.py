"""Exception types shared across the package."""


class HindcastError(Exception):
    """Base class for all package errors."""


class ConfigError(HindcastError):
    """Invalid configuration value or document."""


class DataError(HindcastError):
    """Base class for dataset ingestion problems."""


class SchemaError(DataError):
    """Column schema is invalid or does not match the file."""


class RowError(DataError):
    """A specific row holds an unparseable cell (1-based data row index)."""

    def __init__(self, row_number, message):
        self.row_number = row_number
        super().__init__(f"data row {row_number}: {message}")


class LabelError(DataError):
    """A label cell is not binary."""


class FitError(HindcastError):
    """Preprocessor fitting requested on an unusable row set."""


class RangeError(HindcastError):
    """A deployment date lies outside the valid range for a regime."""


class DegenerateLabelError(HindcastError):
    """Training labels contain a single class."""


class DivergenceError(HindcastError):
    """Model training produced a non-finite loss."""


class GridError(HindcastError):
    """No grid-search candidate could be fitted."""


class ShapeError(HindcastError):
    """Feature dimensions do not match the fitted model."""


class AggregationError(HindcastError):
    """Staleness aggregation is missing required baseline cells."""
