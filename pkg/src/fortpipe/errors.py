"""Exception hierarchy shared across the compiler and simulator."""

from __future__ import annotations


class FortpipeError(Exception):
    """Base class for all errors raised by this package."""


class SourceError(FortpipeError):
    """Error tied to a location in a source file."""

    def __init__(self, message: str, path: str = "<input>", line: int = 0, col: int = 0):
        self.message = message
        self.path = path
        self.line = line
        self.col = col
        super().__init__(f"{path}:{line}:{col}: {message}")


class ParseError(SourceError):
    """Malformed statement inside the supported subset."""


class UnsupportedFeature(SourceError):
    """Construct outside the supported FORTRAN 77 subset."""

    def __init__(self, feature: str, path: str = "<input>", line: int = 0, col: int = 0):
        self.feature = feature
        super().__init__(f"unsupported feature: {feature}", path, line, col)


class LinkError(FortpipeError):
    """Whole-program linking failure."""


class UnresolvedCallee(LinkError):
    def __init__(self, name: str, caller: str):
        self.name = name
        self.caller = caller
        super().__init__(f"'{caller}' calls '{name}' which resolves to no unit or intrinsic")


class DuplicateUnit(LinkError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"program unit '{name}' defined more than once")


class NoProgramUnit(LinkError):
    def __init__(self) -> None:
        super().__init__("no PROGRAM unit among the linked sources")


class RefactorError(FortpipeError):
    """Refactoring transform could not preserve semantics."""


class ConflictingDeclaration(RefactorError):
    def __init__(self, unit: str, name: str, why: str):
        self.unit = unit
        self.name = name
        super().__init__(f"in '{unit}': conflicting declaration for '{name}': {why}")


class AnalyzerError(FortpipeError):
    """Dataflow analysis failure."""


class IrTypeMismatch(AnalyzerError):
    def __init__(self, edge: str, lhs: str, rhs: str):
        super().__init__(f"stream '{edge}' element type mismatch: {lhs} vs {rhs}")


class CodegenError(FortpipeError):
    """Pipeline lowering failure."""


class BudgetExceeded(CodegenError):
    def __init__(self, stream: str, buffer_len: int, budget: int):
        self.buffer_len = buffer_len
        self.budget = budget
        super().__init__(
            f"smart-cache buffer for '{stream}' needs {buffer_len} elements, budget is {budget}"
        )


class NonLinearizableStencil(CodegenError):
    def __init__(self, array: str, offset: tuple):
        super().__init__(f"stencil offset {offset} on '{array}' outside the row-stride window")


class SimulationError(FortpipeError):
    """Runtime failure inside the pipeline simulator."""


class ShapeMismatch(SimulationError):
    pass


class WriteAfterClose(SimulationError):
    pass


class NonTermination(SimulationError):
    def __init__(self, steps: int):
        super().__init__(f"scheduler exceeded {steps} steps without terminating")


class DeadlockDetected(SimulationError):
    def __init__(self, blocked: tuple):
        self.blocked = tuple(sorted(blocked))
        super().__init__(f"deadlock: all live processes blocked: {', '.join(self.blocked)}")


class ModelError(FortpipeError):
    """Invalid shallow-water model configuration or state."""


class CflViolation(ModelError):
    def __init__(self, dt: float, limit: float):
        self.dt = dt
        self.limit = limit
        super().__init__(f"time step {dt} violates the CFL bound {limit}")


class NonFiniteField(ModelError):
    def __init__(self, name: str):
        super().__init__(f"field '{name}' contains NaN or Inf")


class EvalError(FortpipeError):
    """Subset evaluator failure (out-of-bounds index, missing value, ...)."""


class UsageError(FortpipeError):
    """Bad command-line invocation."""
