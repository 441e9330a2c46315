"""Exception types raised by the dermoscan pipeline."""


class DermoscanError(Exception):
    pass


# metadata / dataset
class MissingColumn(DermoscanError):
    pass


class UnknownLabel(DermoscanError):
    pass


class OutputNotWritable(DermoscanError):
    pass


class EmptyDataset(DermoscanError):
    pass


# images / augmentation
class EmptyImage(DermoscanError):
    pass


class ShapeMismatch(DermoscanError):
    pass


class ZeroStd(DermoscanError):
    pass


class BatchTooSmall(DermoscanError):
    pass


# models
class UnknownArchitecture(DermoscanError):
    pass


class WeightsUnavailable(DermoscanError):
    pass


class CheckpointCorrupt(DermoscanError):
    pass


# training
class NonFiniteLogits(DermoscanError):
    pass


class CorpusIncomplete(DermoscanError):
    pass


class DivergedLoss(DermoscanError):
    """Training loss went non-finite. Carries the epoch logs gathered so far."""

    def __init__(self, message, logs=None):
        super().__init__(message)
        self.logs = logs or []


# evaluation / service
class MissingTruth(DermoscanError):
    pass


class SweepUnavailable(DermoscanError):
    pass


class PortUnavailable(DermoscanError):
    pass
