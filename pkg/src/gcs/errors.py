"""Exception types shared across the toolkit."""


class GcsError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(GcsError):
    pass


class RankDeficient(GcsError):
    pass


class NotOrthonormal(GcsError):
    pass


class DomainError(GcsError):
    pass


class InvalidM(GcsError):
    pass


class NoBiases(GcsError):
    pass


class Unsupported(GcsError):
    pass


class DegenerateRange(GcsError):
    pass


class BadMagic(GcsError):
    pass


class TruncatedFile(GcsError):
    pass


class EmptyDataset(GcsError):
    pass


class NonfiniteLoss(GcsError):
    pass


class ZeroSignal(GcsError):
    pass
