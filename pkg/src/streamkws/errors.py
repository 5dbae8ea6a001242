"""Exception hierarchy shared across the package."""


class StreamKwsError(Exception):
    """Base class for all errors raised by this package."""


# --- posterior file / bundle errors ---------------------------------------

class BundleError(StreamKwsError):
    """Base class for posterior-bundle loading and validation errors."""


class MagicMismatch(BundleError):
    """File does not start with the KPF magic or carries a bad version."""


class TruncatedTensor(BundleError):
    """File payload is shorter than the header-declared tensor sizes."""


class NonStochasticRow(BundleError):
    """A probability row does not sum to 1 within tolerance."""

    def __init__(self, tensor: str, index, row_sum: float, tolerance: float):
        self.tensor = tensor
        self.index = index
        self.row_sum = row_sum
        self.tolerance = tolerance
        super().__init__(
            f"{tensor} row {index} sums to {row_sum!r}, "
            f"outside 1 +/- {tolerance}"
        )


class InvalidProbability(BundleError):
    """A stored value is outside [0, 1] or is not a number."""

    def __init__(self, tensor: str, index, value: float):
        self.tensor = tensor
        self.index = index
        self.value = value
        super().__init__(f"{tensor} value at {index} is {value!r}, outside [0, 1]")


class MissingDurationForTDT(BundleError):
    """Bundle is flagged as TDT but carries no duration matrix."""


class IoFailure(BundleError):
    """Underlying file write failed."""


# --- decoding errors --------------------------------------------------------

class DecodeError(StreamKwsError):
    """Base class for decoder-side errors."""


class FrameShapeMismatch(DecodeError):
    """A pushed frame does not match the decoder's expected dimensions."""


class DurationMissing(DecodeError):
    """A TDT step was driven without a duration distribution."""


class LengthMismatch(DecodeError):
    """Two streams that must align frame-by-frame have different lengths."""


class InconsistentConfig(DecodeError):
    """Decode configuration fields contradict each other."""


class MissingTensorForConfig(DecodeError):
    """The bundle lacks a tensor that the configuration requires."""


# --- evaluation / synthesis errors ------------------------------------------

class EmptyCorpus(StreamKwsError):
    """Sweep was asked to evaluate an empty corpus."""


class EmptyMap(StreamKwsError):
    """Macro average over an empty keyword map."""


class OverlappingPlants(StreamKwsError):
    """Two planted keyword regions overlap in a synthesis spec."""


class InstanceTooLarge(StreamKwsError):
    """Brute-force oracle called beyond its enumeration bound."""
