"""Closure-compiled evaluator for the FORTRAN 77 subset.

REAL arithmetic is IEEE binary32: every operation rounds to float32
(numpy scalars), so results are bit-comparable with the numpy oracle and the
pipeline simulator.  INTEGER is evaluated as exact Python int (the corpus
never overflows 32 bits), LOGICAL as bool.

Arguments pass by reference (arrays as objects, scalars as cells) and COMMON
blocks are shared storage matched positionally across units, so refactored
and original programs can be executed and compared bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import EvalError
from .frontend.linker import parameter_env
from .frontend.nodes import (
    ArrayRef,
    Assignment,
    BinOp,
    Call,
    CommonDecl,
    Const,
    Continue,
    DoLoop,
    Expr,
    FType,
    FuncCall,
    IfThenElse,
    IntrinsicCall,
    ProgramAst,
    Return,
    ScalarRef,
    SourceUnit,
    Stmt,
    Symbol,
    UnaryOp,
)

F32 = np.float32

_DTYPES = {FType.REAL: np.float32, FType.INTEGER: np.int32, FType.LOGICAL: np.bool_}


class Cell:
    """Scalar storage with reference semantics."""

    __slots__ = ("value",)

    def __init__(self, value=None):
        self.value = value


class FArray:
    """Array storage with declared lower bounds, row-major over numpy."""

    __slots__ = ("data", "bounds")

    def __init__(self, ftype: FType, bounds: Tuple[Tuple[int, int], ...]):
        shape = tuple(hi - lo + 1 for lo, hi in bounds)
        self.data = np.zeros(shape, dtype=_DTYPES[ftype])
        self.bounds = bounds

    def index(self, idx: Tuple[int, ...]) -> Tuple[int, ...]:
        out = []
        for i, (lo, hi) in zip(idx, self.bounds):
            if i < lo or i > hi:
                raise EvalError(f"index {i} outside bounds {lo}:{hi}")
            out.append(i - lo)
        return tuple(out)

    def get(self, *idx):
        return self.data[self.index(idx)]

    def set(self, value, *idx):
        self.data[self.index(idx)] = value


@dataclass
class AccessTrace:
    """Per-invocation dataflow record used by the intent checks."""

    unit: str
    reads: set = field(default_factory=set)
    writes: set = field(default_factory=set)
    first: dict = field(default_factory=dict)  # name -> "read" | "write"

    def read(self, name: str) -> None:
        self.reads.add(name)
        self.first.setdefault(name, "read")

    def write(self, name: str) -> None:
        self.writes.add(name)
        self.first.setdefault(name, "write")


class Frame:
    __slots__ = ("slots", "trace")

    def __init__(self, slots: Dict[str, object], trace: Optional[AccessTrace]):
        self.slots = slots
        self.trace = trace


class _ReturnSignal(Exception):
    pass


def expr_type(e: Expr, symtab: Dict[str, Symbol], result_types: Dict[str, FType]) -> FType:
    if isinstance(e, Const):
        return e.ftype
    if isinstance(e, ScalarRef):
        sym = symtab.get(e.name)
        if sym is None:
            raise EvalError(f"unknown identifier '{e.name}'")
        return sym.ftype
    if isinstance(e, ArrayRef):
        return symtab[e.name].ftype
    if isinstance(e, UnaryOp):
        if e.op == "not":
            return FType.LOGICAL
        return expr_type(e.operand, symtab, result_types)
    if isinstance(e, BinOp):
        if e.op in ("and", "or") or e.op in ("==", "/=", "<", "<=", ">", ">="):
            return FType.LOGICAL
        lt = expr_type(e.left, symtab, result_types)
        rt = expr_type(e.right, symtab, result_types)
        return FType.REAL if FType.REAL in (lt, rt) else lt
    if isinstance(e, IntrinsicCall):
        if e.name == "sqrt":
            return FType.REAL
        types = [expr_type(a, symtab, result_types) for a in e.args]
        return FType.REAL if FType.REAL in types else FType.INTEGER
    if isinstance(e, FuncCall):
        return result_types[e.name]
    raise EvalError(f"cannot type {type(e).__name__}")


class UnitCode:
    """Compiled form of one unit: a callable body over a fresh frame."""

    def __init__(self, unit: SourceUnit, body: List[Callable], locals_spec, commons_map):
        self.unit = unit
        self.body = body
        self.locals_spec = locals_spec  # name -> (kind, ftype, bounds)
        self.commons_map = commons_map  # local name -> (block, position)


class Evaluator:
    """Executes a linked ProgramAst; see module docstring for semantics."""

    def __init__(self, ast: ProgramAst, trace: bool = False):
        self.ast = ast
        self.tracing = trace
        self.traces: List[AccessTrace] = []
        self.result_types = {
            u.name: (u.result_type or _implicit(u.name)) for u in ast.units if u.kind == "function"
        }
        self._common_storage: Dict[str, List[object]] = {}
        self._common_layout: Dict[str, List[Tuple[FType, Tuple]]] = {}
        self._build_commons()
        self.code: Dict[str, UnitCode] = {}
        for u in ast.units:
            self.code[u.name] = self._compile_unit(u)

    # -- common blocks -------------------------------------------------------

    def _build_commons(self) -> None:
        for u in self.ast.units:
            table = self.ast.symtabs[u.name]
            for d in u.decls:
                if not isinstance(d, CommonDecl):
                    continue
                layout = []
                for ent in d.entities:
                    sym = table[ent.name]
                    layout.append((sym.ftype, sym.bounds))
                known = self._common_layout.get(d.block)
                if known is None:
                    self._common_layout[d.block] = layout
                    slots: List[object] = []
                    for ftype, bounds in layout:
                        slots.append(FArray(ftype, bounds) if bounds else Cell(_zero(ftype)))
                    self._common_storage[d.block] = slots
                elif known != layout:
                    raise EvalError(
                        f"common /{d.block}/ declared with a different layout in '{u.name}'"
                    )

    # -- compilation ----------------------------------------------------------

    def _compile_unit(self, unit: SourceUnit) -> UnitCode:
        table = self.ast.symtabs[unit.name]
        params = parameter_env(unit)
        commons_map: Dict[str, Tuple[str, int]] = {}
        for d in unit.decls:
            if isinstance(d, CommonDecl):
                for pos, ent in enumerate(d.entities):
                    commons_map[ent.name] = (d.block, pos)

        locals_spec: Dict[str, Tuple[str, FType, Tuple]] = {}
        for name, sym in table.items():
            if sym.kind == "parameter" or name in commons_map:
                continue
            if unit.kind == "function" and name == unit.name:
                locals_spec[name] = ("result", sym.ftype, ())
                continue
            if name in unit.args:
                continue  # bound at call time
            locals_spec[name] = ("array" if sym.rank else "scalar", sym.ftype, sym.bounds)

        ctx = _CompileCtx(self, unit, table, params)
        body = [ctx.stmt(st) for st in unit.body]
        return UnitCode(unit, body, locals_spec, commons_map)

    # -- frames and invocation -------------------------------------------------

    def _new_frame(self, name: str, args: Tuple[object, ...] = ()) -> Frame:
        code = self.code[name]
        slots: Dict[str, object] = {}
        for local, (block, pos) in code.commons_map.items():
            slots[local] = self._common_storage[block][pos]
        for local, (kind, ftype, bounds) in code.locals_spec.items():
            if kind == "array":
                slots[local] = FArray(ftype, bounds)
            else:
                slots[local] = Cell(_zero(ftype))
        for dummy, actual in zip(code.unit.args, args):
            slots[dummy] = actual
        trace = None
        if self.tracing:
            trace = AccessTrace(name)
            self.traces.append(trace)
        return Frame(slots, trace)

    def call_unit(self, name: str, args: Tuple[object, ...]) -> Frame:
        frame = self._new_frame(name, args)
        try:
            for st in self.code[name].body:
                st(frame)
        except _ReturnSignal:
            pass
        return frame

    # -- whole-program runs -----------------------------------------------------

    def run(self) -> Dict[str, object]:
        """Run the program unit to completion; return its visible state."""
        main = self.ast.main
        frame = self.call_unit(main.name, ())
        return self._snapshot(frame)

    def _snapshot(self, frame: Frame) -> Dict[str, object]:
        out: Dict[str, object] = {}
        for name, slot in frame.slots.items():
            if isinstance(slot, FArray):
                out[name] = slot.data.copy()
            elif isinstance(slot, Cell):
                out[name] = slot.value
        return out

    def split_host_run(self):
        """Run main's host prelude; return (state_view, time_loop, finish).

        `state_view` maps main's names to live storage (arrays shared, not
        copied).  `finish()` executes the host epilogue and returns the final
        snapshot.  The time loop itself is returned unexecuted, for the
        pipeline runner to take over.
        """
        main = self.ast.main
        split = find_time_loop(main)
        if split is None:
            raise EvalError("program has no time loop over kernel calls")
        idx, loop = split
        frame = self._new_frame(main.name, ())
        compiled = self.code[main.name].body
        for st in compiled[:idx]:
            st(frame)

        view = dict(frame.slots)

        def finish() -> Dict[str, object]:
            try:
                for st in compiled[idx + 1:]:
                    st(frame)
            except _ReturnSignal:
                pass
            return self._snapshot(frame)

        return view, loop, finish


def find_time_loop(main: SourceUnit) -> Optional[Tuple[int, DoLoop]]:
    """Locate main's time loop: an outermost DO whose body is CALLs only."""
    for idx, st in enumerate(main.body):
        if isinstance(st, DoLoop) and st.body and all(
            isinstance(s, (Call, Continue)) for s in st.body
        ) and any(isinstance(s, Call) for s in st.body):
            return idx, st
    return None


def _zero(ftype: FType):
    if ftype is FType.REAL:
        return F32(0.0)
    if ftype is FType.INTEGER:
        return 0
    return False


def _implicit(name: str) -> FType:
    return FType.INTEGER if name[0] in "ijklmn" else FType.REAL


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


class _CompileCtx:
    """Compiles statements and expressions of one unit into closures."""

    def __init__(self, ev: Evaluator, unit: SourceUnit, symtab, params):
        self.ev = ev
        self.unit = unit
        self.symtab = symtab
        self.params = params

    # -- expressions ------------------------------------------------------------

    def etype(self, e: Expr) -> FType:
        return expr_type(e, self.symtab, self.ev.result_types)

    def expr(self, e: Expr) -> Callable:
        if isinstance(e, Const):
            if e.ftype is FType.REAL:
                v = F32(e.value)
            elif e.ftype is FType.INTEGER:
                v = int(e.value)
            else:
                v = bool(e.value)
            return lambda fr: v

        if isinstance(e, ScalarRef):
            sym = self.symtab[e.name]
            if sym.kind == "parameter":
                v = F32(sym.value) if sym.ftype is FType.REAL else sym.value
                return lambda fr: v
            name = e.name

            def read_scalar(fr, name=name):
                if fr.trace is not None:
                    fr.trace.read(name)
                return fr.slots[name].value

            return read_scalar

        if isinstance(e, ArrayRef):
            idx = [self.expr(i) for i in e.indices]
            name = e.name
            if len(idx) == 1:
                i0 = idx[0]

                def read1(fr, name=name, i0=i0):
                    if fr.trace is not None:
                        fr.trace.read(name)
                    return fr.slots[name].get(i0(fr))

                return read1
            if len(idx) == 2:
                i0, i1 = idx

                def read2(fr, name=name, i0=i0, i1=i1):
                    if fr.trace is not None:
                        fr.trace.read(name)
                    return fr.slots[name].get(i0(fr), i1(fr))

                return read2

            def readn(fr, name=name, idx=tuple(idx)):
                if fr.trace is not None:
                    fr.trace.read(name)
                return fr.slots[name].get(*(i(fr) for i in idx))

            return readn

        if isinstance(e, UnaryOp):
            sub = self.expr(e.operand)
            if e.op == "not":
                return lambda fr: not sub(fr)
            if self.etype(e.operand) is FType.REAL:
                return lambda fr: F32(-sub(fr))
            return lambda fr: -sub(fr)

        if isinstance(e, BinOp):
            return self._binop(e)

        if isinstance(e, IntrinsicCall):
            return self._intrinsic(e)

        if isinstance(e, FuncCall):
            return self._funccall(e)

        raise EvalError(f"cannot compile {type(e).__name__}")

    def _coerce_real(self, e: Expr, fn: Callable) -> Callable:
        if self.etype(e) is FType.REAL:
            return fn
        return lambda fr: F32(fn(fr))

    def _binop(self, e: BinOp) -> Callable:
        op = e.op
        if op in ("and", "or"):
            a, b = self.expr(e.left), self.expr(e.right)
            if op == "and":
                return lambda fr: bool(a(fr)) and bool(b(fr))
            return lambda fr: bool(a(fr)) or bool(b(fr))

        lt, rt = self.etype(e.left), self.etype(e.right)
        real = FType.REAL in (lt, rt)
        a, b = self.expr(e.left), self.expr(e.right)
        if real:
            a = self._coerce_real(e.left, a)
            b = self._coerce_real(e.right, b)

        if op in ("==", "/=", "<", "<=", ">", ">="):
            table = {
                "==": lambda x, y: x == y,
                "/=": lambda x, y: x != y,
                "<": lambda x, y: x < y,
                "<=": lambda x, y: x <= y,
                ">": lambda x, y: x > y,
                ">=": lambda x, y: x >= y,
            }
            cmp = table[op]
            return lambda fr: bool(cmp(a(fr), b(fr)))

        if real:
            if op == "+":
                return lambda fr: a(fr) + b(fr)
            if op == "-":
                return lambda fr: a(fr) - b(fr)
            if op == "*":
                return lambda fr: a(fr) * b(fr)
            if op == "/":
                return lambda fr: a(fr) / b(fr)
            if op == "**":
                return lambda fr: F32(float(a(fr)) ** float(b(fr)))
        else:
            if op == "+":
                return lambda fr: a(fr) + b(fr)
            if op == "-":
                return lambda fr: a(fr) - b(fr)
            if op == "*":
                return lambda fr: a(fr) * b(fr)
            if op == "/":
                return lambda fr: _trunc_div(a(fr), b(fr))
            if op == "**":
                return lambda fr: a(fr) ** b(fr)
        raise EvalError(f"unknown operator '{op}'")

    def _intrinsic(self, e: IntrinsicCall) -> Callable:
        name = e.name
        args = [self.expr(a) for a in e.args]
        types = [self.etype(a) for a in e.args]
        real = FType.REAL in types

        if name == "sqrt":
            (a,) = args
            return lambda fr: F32(math.sqrt(a(fr)))
        if name == "abs":
            (a,) = args
            return lambda fr: abs(a(fr))
        if name in ("min", "max"):
            pick = min if name == "min" else max
            if real:
                coerced = [self._coerce_real(x, c) for x, c in zip(e.args, args)]
                return lambda fr: pick(c(fr) for c in coerced)
            return lambda fr: pick(a(fr) for a in args)
        if name == "mod":
            a, b = args
            if real:
                a = self._coerce_real(e.args[0], a)
                b = self._coerce_real(e.args[1], b)
                return lambda fr: F32(math.fmod(a(fr), b(fr)))
            return lambda fr: a(fr) - _trunc_div(a(fr), b(fr)) * b(fr)
        raise EvalError(f"unknown intrinsic '{name}'")

    def _funccall(self, e: FuncCall) -> Callable:
        callee = self.ev.ast.unit(e.name)
        binder = self._arg_binder(callee, e.args)
        ev = self.ev
        fname = e.name

        def call(fr):
            frame = ev._new_frame(fname, binder(fr))
            try:
                for st in ev.code[fname].body:
                    st(frame)
            except _ReturnSignal:
                pass
            return frame.slots[fname].value

        return call

    def _arg_binder(self, callee: SourceUnit, actuals) -> Callable:
        """Build a closure returning the tuple of argument references."""
        parts: List[Callable] = []
        for actual in actuals:
            if isinstance(actual, ScalarRef) and self.symtab[actual.name].rank > 0:
                name = actual.name
                parts.append(lambda fr, name=name: fr.slots[name])
            elif isinstance(actual, ScalarRef) and self.symtab[actual.name].kind != "parameter":
                name = actual.name
                parts.append(lambda fr, name=name: fr.slots[name])
            else:
                if isinstance(actual, ArrayRef):
                    raise EvalError(
                        "array-element actual arguments are outside the subset"
                    )
                val = self.expr(actual)
                parts.append(lambda fr, val=val: Cell(val(fr)))
        return lambda fr: tuple(p(fr) for p in parts)

    # -- statements ---------------------------------------------------------------

    def stmt(self, st: Stmt) -> Callable:
        if isinstance(st, Assignment):
            return self._assignment(st)
        if isinstance(st, DoLoop):
            return self._doloop(st)
        if isinstance(st, IfThenElse):
            cond = self.expr(st.cond)
            then_body = [self.stmt(s) for s in st.then_body]
            else_body = [self.stmt(s) for s in st.else_body]

            def run_if(fr):
                for s in (then_body if cond(fr) else else_body):
                    s(fr)

            return run_if
        if isinstance(st, Call):
            callee = self.ev.ast.unit(st.name)
            binder = self._arg_binder(callee, st.args)
            ev = self.ev
            name = st.name

            def run_call(fr):
                ev.call_unit(name, binder(fr))

            return run_call
        if isinstance(st, Return):
            def run_return(fr):
                raise _ReturnSignal()

            return run_return
        if isinstance(st, Continue):
            return lambda fr: None
        raise EvalError(f"cannot compile statement {type(st).__name__}")

    def _cast_for(self, target_type: FType, value_expr: Expr, fn: Callable) -> Callable:
        vt = self.etype(value_expr)
        if target_type is vt:
            return fn
        if target_type is FType.REAL:
            return lambda fr: F32(fn(fr))
        if target_type is FType.INTEGER:
            return lambda fr: int(fn(fr))
        return lambda fr: bool(fn(fr))

    def _assignment(self, st: Assignment) -> Callable:
        value = self.expr(st.value)
        if isinstance(st.target, ScalarRef):
            name = st.target.name
            sym = self.symtab[name]
            if sym.kind == "parameter":
                raise EvalError(f"assignment to parameter '{name}'")
            value = self._cast_for(sym.ftype, st.value, value)

            def assign_scalar(fr, name=name, value=value):
                if fr.trace is not None:
                    fr.trace.write(name)
                fr.slots[name].value = value(fr)

            return assign_scalar

        name = st.target.name
        sym = self.symtab[name]
        value = self._cast_for(sym.ftype, st.value, value)
        idx = [self.expr(i) for i in st.target.indices]
        if len(idx) == 2:
            i0, i1 = idx

            def assign2(fr, name=name, value=value, i0=i0, i1=i1):
                if fr.trace is not None:
                    fr.trace.write(name)
                fr.slots[name].set(value(fr), i0(fr), i1(fr))

            return assign2

        def assignn(fr, name=name, value=value, idx=tuple(idx)):
            if fr.trace is not None:
                fr.trace.write(name)
            fr.slots[name].set(value(fr), *(i(fr) for i in idx))

        return assignn

    def _doloop(self, st: DoLoop) -> Callable:
        if self.etype(st.lo) is not FType.INTEGER or self.etype(st.hi) is not FType.INTEGER:
            raise EvalError(f"DO bounds for '{st.var}' must be integer-typed")
        if st.step is not None and not (
            isinstance(st.step, Const) or (
                isinstance(st.step, UnaryOp) and isinstance(st.step.operand, Const))
        ):
            raise EvalError(f"DO step for '{st.var}' must be a constant")
        lo = self.expr(st.lo)
        hi = self.expr(st.hi)
        step = self.expr(st.step) if st.step is not None else (lambda fr: 1)
        body = [self.stmt(s) for s in st.body]
        var = st.var

        def run_do(fr):
            cell = fr.slots[var]
            lo_v, hi_v, st_v = lo(fr), hi(fr), step(fr)
            if st_v == 0:
                raise EvalError(f"zero DO step for '{var}'")
            trips = max(0, _trunc_div(hi_v - lo_v + st_v, st_v))
            value = lo_v
            for _ in range(trips):
                cell.value = value
                for s in body:
                    s(fr)
                value += st_v
            cell.value = value

        return run_do
