"""Exception types shared across the toolkit."""


class HyperAugError(Exception):
    """Base class for all toolkit errors."""


class FormatError(HyperAugError):
    """A file does not follow its declared format (bad magic, bad field)."""


class TruncatedError(FormatError):
    """A file header promises more payload than the file contains."""


class DataError(HyperAugError):
    """Loaded values violate a type invariant (e.g. NaN/Inf in a cube)."""


class DimError(HyperAugError):
    """Array arguments have incompatible shapes or lengths."""


class DegenerateError(HyperAugError):
    """An estimator received too little data to produce a model."""


class InsufficientClassError(HyperAugError):
    """A class lacks enough labeled pixels to fill its sampling quota."""

    def __init__(self, class_id: int, needed: int, available: int):
        self.class_id = class_id
        self.needed = needed
        self.available = available
        super().__init__(
            f"class {class_id} has {available} labeled pixels, {needed} required"
        )


class ClassError(HyperAugError):
    """A sample's class id is unknown to the model that must process it."""


class ConfigError(HyperAugError):
    """A configuration value or combination is invalid."""


class NumericError(HyperAugError):
    """A computation produced non-finite or otherwise unusable numbers."""
