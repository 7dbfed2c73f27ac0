"""Exception types shared by the solvers and file readers."""

from __future__ import annotations


class MapfError(Exception):
    """Base class for every error raised by mgmapf."""


class ParseError(MapfError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StructuralError(MapfError):
    """A plan teleports, starts in the wrong place, or leaves the graph."""

    def __init__(self, message: str, agent: int, time: int):
        self.agent = agent
        self.time = time
        super().__init__(f"agent {agent}, t={time}: {message}")


class IncompletePlanError(MapfError):
    pass


class InfeasibleError(MapfError):
    """Some agent cannot reach all of its goals (disconnected terminals)."""


class NoSolutionError(MapfError):
    """The search finished (or hit the cost cap) without a solution."""


class StateLimitError(MapfError):
    pass


class SolverTimeout(MapfError):
    def __init__(self, message: str, stats: dict | None = None):
        self.stats = dict(stats or {})
        super().__init__(message)
