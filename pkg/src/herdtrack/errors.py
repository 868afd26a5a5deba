"""Exception hierarchy shared across the pipeline.

Everything raised on purpose derives from PipelineError so the CLI can map
"our" failures to the data-error exit code and let genuine bugs escape.
"""


class PipelineError(Exception):
    """Base class for all errors this package raises deliberately."""


class SourceNotFoundError(PipelineError):
    """Input path is missing or holds no usable frames."""


class FrameFormatError(PipelineError):
    """A frame, raster, or CSV payload could not be decoded."""


class MissingArtifactError(PipelineError):
    """A file-backed provider has no stored artifact for the request."""


class DegenerateInputError(PipelineError):
    """Input admits no two-class split (e.g. a constant raster)."""


class GeometryError(PipelineError):
    """Degenerate geometry: too few points, collinear set, image too small."""


class SelectionError(PipelineError):
    """Target selection referenced no valid instance."""


class PropagationError(PipelineError):
    """Label propagation had no labelled previous frame to draw from."""


class FlagError(PipelineError):
    """Cleansing flags referenced unknown dataset rows."""


class AlignmentError(PipelineError):
    """Predictions and ground truth cover different instance ids."""


class ContractError(PipelineError):
    """Feature arity or column order violates the model contract."""


class DegenerateTrainingError(PipelineError):
    """Training data contains only a single class."""


class DeserializationError(PipelineError):
    """Serialized model payload is corrupt or has the wrong version."""


class IncompatibleModelError(DeserializationError):
    """Serialized model was trained against a different feature contract."""


class ScenarioError(PipelineError):
    """Synthetic scenario configuration is infeasible."""


class ArgumentError(PipelineError):
    """An operation argument is out of range."""
