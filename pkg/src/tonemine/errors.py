"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for everything this package raises on purpose."""


class ValidationError(PipelineError):
    """Input data violates a format or invariant."""


class ParseError(ValidationError):
    """A corpus file could not be parsed; message carries the line number."""


class NoConnectiveThreshold(PipelineError):
    """Every candidate threshold produced an edgeless graph."""


class NoSurvivingTypes(PipelineError):
    """Community pruning removed every community."""


class CategorySkipped(PipelineError):
    """A category cannot be used for prediction (e.g. too few instances)."""
