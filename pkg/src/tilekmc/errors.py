"""Exception types raised across the package."""


class TileKMCError(Exception):
    """Base class for all package errors."""


class ConfigError(TileKMCError, ValueError):
    """Invalid or unreadable configuration."""


class SiteOccupied(TileKMCError):
    pass


class SiteEmpty(TileKMCError):
    pass


class TargetOccupied(TileKMCError):
    pass


class NotAdjacent(TileKMCError):
    pass


class UnknownLabel(TileKMCError, KeyError):
    pass


class NonPositiveTemperature(TileKMCError, ValueError):
    pass


class NoEmptySite(TileKMCError):
    pass


class EncodingFailure(TileKMCError):
    pass


class EmptyInput(TileKMCError, ValueError):
    pass


class ZeroLength(TileKMCError, ValueError):
    pass


class TooFewPoints(TileKMCError, ValueError):
    pass


class DegenerateMatrix(TileKMCError, ValueError):
    pass


class BadK(TileKMCError, ValueError):
    pass


class EmptyRange(ConfigError):
    pass


class IoFailure(TileKMCError, OSError):
    pass
