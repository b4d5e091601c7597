"""Exception types shared across the package."""


class CamReframeError(Exception):
    """Base class for all package-specific errors."""


# geometry
class NonPositiveDepth(CamReframeError):
    pass


# trajectory
class MalformedLine(CamReframeError):
    def __init__(self, line_number, message=""):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}" if message else f"line {line_number}")


class EmptyTrajectory(CamReframeError):
    pass


class LengthMismatch(CamReframeError):
    pass


class InvalidFrameCount(CamReframeError):
    pass


class MissingOrbitRadius(CamReframeError):
    pass


# alignment
class TooFewFrames(CamReframeError):
    pass


class WindowTooSmall(CamReframeError):
    pass


class InconsistentShapes(CamReframeError):
    pass


class DisconnectedGraph(CamReframeError):
    def __init__(self, frames):
        self.frames = list(frames)
        super().__init__(f"frames not reachable in the edge graph: {self.frames}")


class NonFiniteLoss(CamReframeError):
    def __init__(self, step):
        self.step = step
        super().__init__(f"loss became non-finite at optimizer step {step}")


# scheduler
class InvalidBetaRange(CamReframeError):
    pass


class ShapeMismatch(CamReframeError):
    pass


class DegenerateAlpha(CamReframeError):
    pass


class StepOrderViolation(CamReframeError):
    pass


class InvalidCounts(CamReframeError):
    pass


# reframe
class PoseCountMismatch(CamReframeError):
    pass


class NonDivisibleFactor(CamReframeError):
    pass


# rehab
class NonFiniteLatent(CamReframeError):
    def __init__(self, step):
        self.step = step
        super().__init__(f"latent became non-finite at sampling step {step}")


# metrics
class EmptyMask(CamReframeError):
    pass


# synthscene
class InvalidSpec(CamReframeError):
    pass


class FrameOutOfRange(CamReframeError):
    pass


# io
class BadMagic(CamReframeError):
    pass


class BadCRC(CamReframeError):
    pass


class UnsupportedVersion(CamReframeError):
    pass


class TruncatedFile(CamReframeError):
    pass
