"""Exception hierarchy shared by every module of the package."""


class SocialRewardError(ValueError):
    """Base class for all data and configuration errors raised here."""


# -- vector math ------------------------------------------------------------

class ZeroVector(SocialRewardError):
    pass


class NonFinite(SocialRewardError):
    pass


class Negative(SocialRewardError):
    pass


class DimensionMismatch(SocialRewardError):
    pass


class ConfigError(SocialRewardError):
    """A configuration value violates a documented invariant."""


# -- wire format ------------------------------------------------------------

class FrameError(SocialRewardError):
    """A single wire-format line was rejected; the stream continues."""


class MalformedLine(FrameError):
    pass


class UnknownChannel(FrameError):
    pass


class UnknownLabel(FrameError):
    pass


class NonMonotonicTimestamp(FrameError):
    pass


class BadVector(FrameError):
    pass


class InvalidSpec(SocialRewardError):
    pass


# -- evaluation -------------------------------------------------------------

class EmptyClip(SocialRewardError):
    pass


class ZeroVariance(SocialRewardError):
    pass


class LengthMismatch(SocialRewardError):
    pass


class EmptyPredictions(SocialRewardError):
    pass


class TooFewActors(SocialRewardError):
    pass
