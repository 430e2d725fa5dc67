"""Shared exception types.

Everything user-facing raises a subclass of SortpipeError so the CLI and the
service can map failures to one exit code / HTTP status.
"""


class SortpipeError(Exception):
    """Base class for all expected failures (bad input, bad file, bad plan)."""


class SchemaError(SortpipeError):
    """A structured document (model, plan, device, stages) violates its schema."""


class ShapeError(SortpipeError):
    """Shape inference failed or an input tensor has the wrong dimensions."""


class WeightFormatError(SortpipeError):
    """A weight blob fails magic/length/finiteness checks."""


class LogFormatError(SortpipeError):
    """A prediction-log CSV is malformed."""


class RateError(SortpipeError):
    """A requested frame rate exceeds the pipeline's sustained capacity."""
