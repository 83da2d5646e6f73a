"""Exception hierarchy shared by all modules."""


class ReachPCError(Exception):
    """Base class for every error raised by the package."""


class ZeroMatrix(ReachPCError):
    pass


class DimensionMismatch(ReachPCError):
    pass


class StepMismatch(ReachPCError):
    pass


class InadmissibleBase(ReachPCError):
    pass


class SingularExcitation(ReachPCError):
    pass


class DegenerateGain(ReachPCError):
    pass


class OutsideDomain(ReachPCError):
    pass


class DriftDominates(ReachPCError):
    """Drift magnitude reaches the input authority, so the spherical proxy is empty."""


class InvalidInputBall(ReachPCError):
    pass


class RestViolation(ReachPCError):
    """Actuated state too close to the origin for the unactuated construction."""


class NearRest(ReachPCError):
    pass


class AnchorMismatch(ReachPCError):
    pass


class ZeroDisplacement(ReachPCError):
    pass


class NoIntersection(ReachPCError):
    """The state left the tube of radius r around the reference segment."""


class DegenerateSegment(ReachPCError):
    pass


class EmptyCloud(ReachPCError):
    pass


class MissingLog(ReachPCError):
    pass


class Unsafe(ReachPCError):
    """Raised by the safety monitor when the plant enters the unsafe set."""

    def __init__(self, message: str, t: float, reason: str):
        super().__init__(message)
        self.t = t
        self.reason = reason


class ConfigError(ReachPCError):
    """Invalid run configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
