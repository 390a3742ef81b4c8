"""Exception hierarchy.

Data problems (bad files, invalid graphs, cold nodes) derive from
:class:`DataError`; numerical blow-ups derive from :class:`NumericalError`.
The CLI maps these to distinct exit codes.
"""


class MGEmbedError(Exception):
    pass


class DataError(MGEmbedError, ValueError):
    pass


class EdgeListParseError(DataError):
    def __init__(self, lineno, line, reason):
        self.lineno = lineno
        self.line = line
        super().__init__(f"line {lineno}: {reason}: {line!r}")


class GraphValidationError(DataError):
    pass


class FileFormatError(DataError):
    def __init__(self, path, expected, detail=""):
        self.path = str(path)
        msg = f"{path}: expected {expected}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class ArtifactMismatchError(DataError):
    pass


class ColdNodeError(DataError):
    """Raised when a node has no neighbor with a trained embedding."""


class UnresolvableEntityError(DataError):
    pass


class NumericalError(MGEmbedError, ArithmeticError):
    pass


class TrainingDivergedError(NumericalError):
    def __init__(self, epoch, index, detail="non-finite update"):
        self.epoch = epoch
        self.index = index
        super().__init__(f"{detail} at epoch {epoch}, step {index}")
