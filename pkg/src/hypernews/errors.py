"""Exception hierarchy.

Errors fall into three families that the CLI maps to exit codes:
``ConfigError`` (1), ``DataError`` (2) and ``NumericError`` (3).
Everything else derives from ``HyperNewsError`` directly.
"""


class HyperNewsError(Exception):
    pass


class ConfigError(HyperNewsError, ValueError):
    pass


class DataError(HyperNewsError, ValueError):
    pass


class NumericError(HyperNewsError, ArithmeticError):
    pass


# -- configuration -----------------------------------------------------------

class InvalidConfig(ConfigError):
    pass


# -- data / structure --------------------------------------------------------

class EmptyHyperedge(DataError):
    pass


class IndexOutOfRange(DataError, IndexError):
    pass


class ParseError(DataError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class CountMismatch(DataError):
    pass


class MissingId(DataError, KeyError):
    def __init__(self, ident):
        self.ident = ident
        super().__init__(f"missing id: {ident}")

    def __str__(self):
        return self.args[0]


class DimensionMismatch(DataError):
    pass


class MissingTimestamps(DataError):
    pass


class MissingLabels(DataError):
    pass


class TooFewEdges(DataError):
    pass


# -- tensors / numerics ------------------------------------------------------

class ShapeMismatch(HyperNewsError, ValueError):
    pass


class EmptyGroup(HyperNewsError, ValueError):
    pass


class BatchTooSmall(HyperNewsError, ValueError):
    pass


class NonFiniteValue(NumericError):
    pass


class NonFiniteLoss(NumericError):
    def __init__(self, epoch, message=""):
        self.epoch = epoch
        super().__init__(f"non-finite loss at epoch {epoch}" + (f": {message}" if message else ""))


# -- statistics --------------------------------------------------------------

class LengthMismatch(HyperNewsError, ValueError):
    pass


class TooFewSamples(HyperNewsError, ValueError):
    pass
