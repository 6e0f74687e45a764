"""Exception hierarchy shared by every stage of the pipeline."""


class PlantDxError(Exception):
    """Base class; the CLI maps these to exit code 1."""


class RootNotFound(PlantDxError):
    pass


class NoClassesFound(PlantDxError):
    pass


class DecodeError(PlantDxError):
    pass


class InvalidFraction(PlantDxError, ValueError):
    pass


class HeaderMismatch(PlantDxError):
    pass


class MalformedRow(PlantDxError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InvalidSigma(PlantDxError, ValueError):
    pass


class EmptyForeground(PlantDxError):
    pass


class LengthMismatch(PlantDxError, ValueError):
    pass


class TooFewSamples(PlantDxError, ValueError):
    pass


class EmptyNode(PlantDxError, ValueError):
    pass


class DegenerateTrainingSet(PlantDxError, ValueError):
    pass


class MissingFeature(PlantDxError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnsupportedVersion(PlantDxError):
    pass


class CorruptModel(PlantDxError):
    pass


class LabelOutOfRange(PlantDxError, ValueError):
    pass


class EmptyMatrix(PlantDxError, ValueError):
    pass


class TooFewSamplesPerClass(PlantDxError, ValueError):
    pass


class SingleClassInput(PlantDxError, ValueError):
    pass


class UnknownPlant(PlantDxError, KeyError):
    def __str__(self):
        return Exception.__str__(self)
