"""Exception hierarchy shared by every numlex module.

Each class carries a stable ``exit_code`` that the CLI maps to the process
exit status.
"""


class NumlexError(Exception):
    exit_code = 1


# configuration and input ---------------------------------------------------

class ConfigError(NumlexError, ValueError):
    exit_code = 3


class ParseError(ConfigError):
    def __init__(self, message, line=None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ValidationError(ConfigError):
    def __init__(self, key, reason):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}")


class MalformedRecord(NumlexError, ValueError):
    exit_code = 4

    def __init__(self, line, reason):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class CheckpointMissing(NumlexError, FileNotFoundError):
    exit_code = 4


# tokenization --------------------------------------------------------------

class BaseTokenizerError(NumlexError):
    exit_code = 5


class OffsetMismatch(BaseTokenizerError):
    pass


class MalformedNumber(NumlexError, ValueError):
    exit_code = 5


# tensors and models ----------------------------------------------------------

class ShapeMismatch(NumlexError, ValueError):
    exit_code = 5

    def __init__(self, op, *shapes):
        self.shapes = shapes
        rendered = ", ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {rendered}")


class NotScalarLoss(NumlexError, ValueError):
    exit_code = 5


class MissingGradient(NumlexError, RuntimeError):
    exit_code = 5


class DimMismatch(ShapeMismatch):
    pass


class EmptyNumber(NumlexError, ValueError):
    exit_code = 5


class ArchMismatch(NumlexError, ValueError):
    exit_code = 5


# pre-training and probing -----------------------------------------------------

class EmptySequence(NumlexError, ValueError):
    exit_code = 5


class PlanMismatch(NumlexError, ValueError):
    exit_code = 5


class NonDistribution(NumlexError, ValueError):
    exit_code = 5


class DegenerateTask(NumlexError, RuntimeError):
    exit_code = 5


class LengthMismatch(NumlexError, ValueError):
    exit_code = 5
