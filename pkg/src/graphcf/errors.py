"""Exception types raised across the package."""

import numpy as np


class GraphCFError(Exception):
    """Base class for all package errors."""


class MalformedLine(GraphCFError, ValueError):
    def __init__(self, line_number, reason=""):
        self.line_number = line_number
        msg = f"malformed rating line {line_number}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class EmptyDataset(GraphCFError, ValueError):
    pass


class IndexMissing(GraphCFError, KeyError):
    pass


class UnknownId(GraphCFError, KeyError):
    pass


class IndexOutOfRange(GraphCFError, IndexError):
    pass


class DimensionMismatch(GraphCFError, ValueError):
    pass


class InvalidGraph(GraphCFError, ValueError):
    pass


class NotPositiveDefinite(GraphCFError, np.linalg.LinAlgError):
    pass


class DegenerateFeatures(GraphCFError, ValueError):
    pass


class EigensolverNoConvergence(GraphCFError, RuntimeError):
    pass


class EmptyNeighborhood(GraphCFError, ValueError):
    pass


class TooFewItems(GraphCFError, ValueError):
    pass


class LengthMismatch(GraphCFError, ValueError):
    pass


class EmptyInput(GraphCFError, ValueError):
    pass


class ConfigError(GraphCFError, ValueError):
    pass
