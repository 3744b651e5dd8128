# utils/errors.py
# One exception tree for the whole package. Validation-type errors also
# derive from ValueError and index errors from IndexError, so callers can
# catch either the domain type or the builtin one.

from __future__ import annotations


class NetPrivError(Exception):
    """Base class for every error raised by this package."""


# -------------------------
# graph_model
# -------------------------
class GraphError(NetPrivError, ValueError):
    pass


class DisconnectedGraph(GraphError):
    pass


class InfeasibleBounds(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class IndexOutOfRange(NetPrivError, IndexError):
    pass


class DimensionMismatch(NetPrivError, ValueError):
    pass


class NonSymmetricInput(NetPrivError, ValueError):
    pass


class InfeasibleWeights(NetPrivError, ValueError):
    pass


# -------------------------
# gramian
# -------------------------
class InvalidWindow(NetPrivError, ValueError):
    pass


class NegativeTime(NetPrivError, ValueError):
    pass


class StaleCache(NetPrivError, ValueError):
    pass


class NonPositivePerturbation(NetPrivError, ValueError):
    pass


class NonPositiveHorizon(NetPrivError, ValueError):
    pass


# -------------------------
# online_opt
# -------------------------
class EmptyEdgeSet(NetPrivError, ValueError):
    pass


class InfeasibleSet(NetPrivError, ValueError):
    pass


class NonSPDMetric(NetPrivError, ValueError):
    pass


class SingularAccumulator(NetPrivError, ArithmeticError):
    pass


class MaxIterationsExceeded(NetPrivError, RuntimeError):
    pass


class MissingHindsight(NetPrivError, ValueError):
    pass


# -------------------------
# scenario
# -------------------------
class ScheduleOutOfRange(NetPrivError, ValueError):
    pass


class NonPositiveStep(NetPrivError, ValueError):
    pass


class EmptyTrace(NetPrivError, ValueError):
    pass


# -------------------------
# cli_io
# -------------------------
class ScenarioSyntaxError(NetPrivError, ValueError):
    def __init__(self, line: int | None, message: str):
        self.line = line
        self.message = message
        where = f"line {line}" if line is not None else "document"
        super().__init__(f"{where}: {message}")


class ScenarioValidationError(NetPrivError, ValueError):
    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class ExportError(NetPrivError, OSError):
    pass
