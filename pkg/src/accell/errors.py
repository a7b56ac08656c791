"""Exception hierarchy for the accell pipeline.

Every error raised by the library derives from :class:`AccellError`, so
callers (notably the CLI) can catch a single base class and turn any
pipeline failure into a diagnostic message and a nonzero exit status.
"""


class AccellError(Exception):
    """Base class for all accell errors."""


class InvalidImage(AccellError):
    """Raised for empty or malformed image input."""


class DegenerateImage(AccellError):
    """Raised when an image has a single intensity and cannot be thresholded."""


class InvalidRange(AccellError):
    """Raised when a (min, max) range is inverted."""


class InvalidAlpha(AccellError):
    """Raised when a cutoff scale factor lies outside (0, 1]."""


class NoAnteriorSegment(AccellError):
    """Raised when mean-intensity binarization produces no object at all."""


class PromptOutsideAllMasks(AccellError):
    """Raised when no segmenter candidate contains any prompt point."""


class ShapeError(AccellError):
    """Raised on array dimension mismatches."""


class EmptyDataset(AccellError):
    """Raised when an operation requires at least one sample."""


class DivergedTraining(AccellError):
    """Raised when the classifier loss becomes non-finite."""


class AlphaSearchFailed(AccellError):
    """Raised when every candidate cutoff scale scores zero F1."""


class InvalidConfig(AccellError):
    """Raised for infeasible configuration values."""


class BackendError(AccellError):
    """Raised when an external segmenter process fails outright."""


class BackendTimeout(BackendError):
    """Raised when an external segmenter does not answer in time."""


class ProtocolError(BackendError):
    """Raised on malformed messages from an external segmenter."""
