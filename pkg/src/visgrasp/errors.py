"""Exception hierarchy.

Two families matter to callers: ``InputError`` covers malformed or
out-of-contract data (the CLI maps it to exit code 2), ``ComputationError``
covers numerical failures such as fits or registrations that cannot be
completed (exit code 3).
"""


class GraspError(Exception):
    pass


class InputError(GraspError, ValueError):
    pass


class ComputationError(GraspError, RuntimeError):
    pass


# scene geometry
class NonPositiveDepth(InputError):
    pass


class OutOfImage(InputError):
    pass


class EmptyRegion(InputError):
    pass


class EmptyResult(InputError):
    pass


class TooFewPoints(InputError):
    pass


class EmptyCloud(InputError):
    pass


# hand kinematics
class DegenerateBox(InputError):
    pass


class CollinearPalm(ComputationError):
    pass


class ZeroLengthSegment(ComputationError):
    pass


# gesture model
class TooFewSamples(InputError):
    pass


class IllConditioned(ComputationError):
    pass


class DegenerateRange(InputError):
    pass


class ClassNotFound(ComputationError):
    pass


class GestureMismatch(ComputationError):
    def __init__(self, message, rmse=None):
        super().__init__(message)
        self.rmse = rmse


class SchemaError(InputError):
    pass


# intent estimation
class TooFewPositions(InputError):
    pass


class ParallelPlanes(ComputationError):
    pass


class DegenerateDirection(ComputationError):
    pass


class NoObjects(InputError):
    pass


# controller
class MissingLibraryEntry(ComputationError):
    pass


# metrics
class ZeroReferenceVariance(ComputationError):
    pass


class EmptyTrials(InputError):
    pass


# episode generation
class UnknownTarget(InputError):
    pass
