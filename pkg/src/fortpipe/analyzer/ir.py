"""Map/fold dataflow IR over streams, plus its executable semantics.

Nodes carry the elemental loop body extracted from the source, with array
accesses normalized to constant offsets from the induction vector.  The
`compile_elemental` function turns a node into a per-element closure over
injected read/write callables; both the IR evaluator here and the pipeline
simulator execute kernels through it, so all routes share one float32
semantics.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from ..errors import AnalyzerError, EvalError
from ..frontend.nodes import (
    ArrayRef,
    Assignment,
    BinOp,
    Const,
    Continue,
    DoLoop,
    Expr,
    FType,
    IfThenElse,
    IntrinsicCall,
    Return,
    ScalarRef,
    Stmt,
    UnaryOp,
)

F32 = np.float32

Offset = Tuple[int, ...]
Box = Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class MapNode:
    """Elementwise kernel over the full index box, with an optional interior
    guard; reads at fixed offsets, writes at offset zero."""

    name: str
    ivars: Tuple[str, ...]
    bounds: Box
    guard: Optional[Box]
    body: Tuple[Stmt, ...]
    reads: Dict[str, FrozenSet[Offset]]
    writes: Tuple[str, ...]
    elem_types: Dict[str, FType]
    local_types: Dict[str, FType]
    host_params: Dict[str, FType]
    const_params: Dict[str, object]
    fused_from: Optional[tuple] = None

    @property
    def kind(self) -> str:
        return "map"

    def stenciled(self) -> bool:
        zero = tuple(0 for _ in self.ivars)
        return any(offs != frozenset({zero}) for offs in self.reads.values())


@dataclass(frozen=True)
class FoldNode:
    """Reduction of a stream into one scalar, canonical ascending order."""

    name: str
    ivars: Tuple[str, ...]
    bounds: Box
    combine_op: str  # + * min max
    accumulator: str
    body: Tuple[Stmt, ...]
    reads: Dict[str, FrozenSet[Offset]]
    elem_types: Dict[str, FType]
    local_types: Dict[str, FType]
    host_params: Dict[str, FType]
    const_params: Dict[str, object]
    init: Optional[float] = None

    @property
    def kind(self) -> str:
        return "fold"

    @property
    def writes(self) -> Tuple[str, ...]:
        return ()

    def stenciled(self) -> bool:
        zero = tuple(0 for _ in self.ivars)
        return any(offs != frozenset({zero}) for offs in self.reads.values())


@dataclass(frozen=True)
class SeqNode:
    """Opaque sequential nest kept in place to preserve ordering."""

    name: str
    body: Tuple[Stmt, ...]
    reason: str
    reads: Dict[str, FrozenSet[Offset]]
    writes: Tuple[str, ...]

    @property
    def kind(self) -> str:
        return "seq"


@dataclass(frozen=True)
class ArrayInfo:
    name: str
    ftype: FType
    bounds: Box

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(hi - lo + 1 for lo, hi in self.bounds)

    @property
    def size(self) -> int:
        n = 1
        for s in self.shape:
            n *= s
        return n


@dataclass
class FunctionalIR:
    nodes: List[object]
    edges: List[Tuple[str, str, str]]  # (producer, consumer, array)
    arrays: Dict[str, ArrayInfo]
    live_out: FrozenSet[str]
    step_inputs: FrozenSet[str] = frozenset()  # state consumed from last step
    time_var: str = "n"
    nt_param: Optional[str] = None  # host name holding the step count

    def node(self, name: str):
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def producers_of(self, consumer: str) -> List[str]:
        return sorted({p for (p, c, a) in self.edges if c == consumer})

    def consumers_of(self, producer: str) -> List[str]:
        return sorted({c for (p, c, a) in self.edges if p == producer})


def ir_to_json(ir: FunctionalIR) -> dict:
    nodes = []
    for n in ir.nodes:
        entry = {"name": n.name, "kind": n.kind}
        if n.kind in ("map", "fold"):
            entry["reads"] = {
                a: [list(o) for o in sorted(offs)] for a, offs in sorted(n.reads.items())
            }
            entry["bounds"] = [list(b) for b in n.bounds]
            if n.kind == "map":
                entry["writes"] = list(n.writes)
                entry["guard"] = None if n.guard is None else [list(b) for b in n.guard]
            else:
                entry["combineOp"] = n.combine_op
                entry["accumulator"] = n.accumulator
        else:
            entry["reason"] = n.reason
            entry["reads"] = sorted(n.reads)
            entry["writes"] = list(n.writes)
        nodes.append(entry)
    return {
        "nodes": nodes,
        "edges": [{"from": p, "to": c, "array": a} for (p, c, a) in ir.edges],
        "liveOut": sorted(ir.live_out),
        "arrays": {
            a: {"type": str(info.ftype), "bounds": [list(b) for b in info.bounds]}
            for a, info in sorted(ir.arrays.items())
        },
    }


def dump_ir(ir: FunctionalIR) -> str:
    return json.dumps(ir_to_json(ir), indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# Elemental compilation

_DTYPES = {FType.REAL: np.float32, FType.INTEGER: np.int32, FType.LOGICAL: np.bool_}


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


class _ElemCompiler:
    """Compiles a node body into closures over (env, read, write)."""

    def __init__(self, node, host_values: Dict[str, object],
                 read: Callable, write: Callable):
        self.node = node
        self.read = read
        self.write = write
        self.values: Dict[str, object] = dict(node.const_params)
        for name, ftype in node.host_params.items():
            if name not in host_values:
                raise EvalError(f"kernel '{node.name}' needs host value '{name}'")
            v = host_values[name]
            self.values[name] = F32(v) if ftype is FType.REAL else v
        self.ivars = node.ivars

    def etype(self, e: Expr) -> FType:
        node = self.node
        if isinstance(e, Const):
            return e.ftype
        if isinstance(e, ScalarRef):
            if e.name in self.ivars:
                return FType.INTEGER
            if e.name in node.host_params:
                return node.host_params[e.name]
            if e.name in node.const_params:
                v = node.const_params[e.name]
                return FType.INTEGER if isinstance(v, int) else FType.REAL
            if e.name in node.local_types:
                return node.local_types[e.name]
            raise EvalError(f"unknown scalar '{e.name}' in kernel '{node.name}'")
        if isinstance(e, ArrayRef):
            return node.elem_types[e.name]
        if isinstance(e, UnaryOp):
            return FType.LOGICAL if e.op == "not" else self.etype(e.operand)
        if isinstance(e, BinOp):
            if e.op in ("and", "or", "==", "/=", "<", "<=", ">", ">="):
                return FType.LOGICAL
            lt, rt = self.etype(e.left), self.etype(e.right)
            return FType.REAL if FType.REAL in (lt, rt) else lt
        if isinstance(e, IntrinsicCall):
            if e.name == "sqrt":
                return FType.REAL
            types = [self.etype(a) for a in e.args]
            return FType.REAL if FType.REAL in types else FType.INTEGER
        raise EvalError(f"cannot type {type(e).__name__} in elemental body")

    def _offset(self, ref: ArrayRef) -> Offset:
        out = []
        for ix, ivar in zip(ref.indices, self.ivars):
            out.append(_index_const_offset(ix, ivar))
        return tuple(out)

    def expr(self, e: Expr) -> Callable:
        if isinstance(e, Const):
            v = F32(e.value) if e.ftype is FType.REAL else (
                int(e.value) if e.ftype is FType.INTEGER else bool(e.value))
            return lambda env: v
        if isinstance(e, ScalarRef):
            name = e.name
            if name in self.values:
                v = self.values[name]
                return lambda env: v
            return lambda env: env[name]
        if isinstance(e, ArrayRef):
            off = self._offset(e)
            name = e.name
            read = self.read
            return lambda env: read(name, off, env["__idx"])
        if isinstance(e, UnaryOp):
            sub = self.expr(e.operand)
            if e.op == "not":
                return lambda env: not sub(env)
            if self.etype(e.operand) is FType.REAL:
                return lambda env: F32(-sub(env))
            return lambda env: -sub(env)
        if isinstance(e, BinOp):
            return self._binop(e)
        if isinstance(e, IntrinsicCall):
            return self._intrinsic(e)
        raise EvalError(f"cannot compile {type(e).__name__} in elemental body")

    def _coerce_real(self, e: Expr, fn: Callable) -> Callable:
        if self.etype(e) is FType.REAL:
            return fn
        return lambda env: F32(fn(env))

    def _binop(self, e: BinOp) -> Callable:
        op = e.op
        a, b = self.expr(e.left), self.expr(e.right)
        if op == "and":
            return lambda env: bool(a(env)) and bool(b(env))
        if op == "or":
            return lambda env: bool(a(env)) or bool(b(env))
        if op in ("==", "/=", "<", "<=", ">", ">="):
            lt, rt = self.etype(e.left), self.etype(e.right)
            if FType.REAL in (lt, rt):
                a = self._coerce_real(e.left, a)
                b = self._coerce_real(e.right, b)
            table = {
                "==": lambda x, y: x == y, "/=": lambda x, y: x != y,
                "<": lambda x, y: x < y, "<=": lambda x, y: x <= y,
                ">": lambda x, y: x > y, ">=": lambda x, y: x >= y,
            }
            cmp = table[op]
            return lambda env: bool(cmp(a(env), b(env)))
        real = FType.REAL in (self.etype(e.left), self.etype(e.right))
        if real:
            a = self._coerce_real(e.left, a)
            b = self._coerce_real(e.right, b)
            if op == "+":
                return lambda env: a(env) + b(env)
            if op == "-":
                return lambda env: a(env) - b(env)
            if op == "*":
                return lambda env: a(env) * b(env)
            if op == "/":
                return lambda env: a(env) / b(env)
            if op == "**":
                return lambda env: F32(float(a(env)) ** float(b(env)))
        else:
            if op == "+":
                return lambda env: a(env) + b(env)
            if op == "-":
                return lambda env: a(env) - b(env)
            if op == "*":
                return lambda env: a(env) * b(env)
            if op == "/":
                return lambda env: _trunc_div(a(env), b(env))
            if op == "**":
                return lambda env: a(env) ** b(env)
        raise EvalError(f"unknown operator '{op}'")

    def _intrinsic(self, e: IntrinsicCall) -> Callable:
        args = [self.expr(a) for a in e.args]
        real = FType.REAL in [self.etype(a) for a in e.args]
        if e.name == "sqrt":
            (a,) = args
            return lambda env: F32(math.sqrt(a(env)))
        if e.name == "abs":
            (a,) = args
            return lambda env: abs(a(env))
        if e.name in ("min", "max"):
            pick = min if e.name == "min" else max
            if real:
                args = [self._coerce_real(x, fn) for x, fn in zip(e.args, args)]
            return lambda env: pick(fn(env) for fn in args)
        if e.name == "mod":
            a, b = args
            if real:
                a = self._coerce_real(e.args[0], a)
                b = self._coerce_real(e.args[1], b)
                return lambda env: F32(math.fmod(a(env), b(env)))
            return lambda env: a(env) - _trunc_div(a(env), b(env)) * b(env)
        raise EvalError(f"unknown intrinsic '{e.name}'")

    def stmt(self, st: Stmt) -> Callable:
        if isinstance(st, Assignment):
            value = self.expr(st.value)
            if isinstance(st.target, ScalarRef):
                name = st.target.name
                tt = self.etype(st.target)
                value = self._cast(tt, st.value, value)
                def assign(env, name=name, value=value):
                    env[name] = value(env)
                return assign
            name = st.target.name
            off = self._offset(st.target)
            tt = self.node.elem_types[name]
            value = self._cast(tt, st.value, value)
            write = self.write
            def store(env, name=name, off=off, value=value):
                write(name, off, value(env), env["__idx"])
            return store
        if isinstance(st, IfThenElse):
            cond = self.expr(st.cond)
            then_body = [self.stmt(s) for s in st.then_body]
            else_body = [self.stmt(s) for s in st.else_body]
            def run_if(env):
                for s in (then_body if cond(env) else else_body):
                    s(env)
            return run_if
        if isinstance(st, (Return, Continue)):
            return lambda env: None
        if isinstance(st, DoLoop):
            raise EvalError("nested sequential loops inside elemental bodies "
                            "are not supported by the pipeline backends")
        raise EvalError(f"cannot compile statement {type(st).__name__}")

    def _cast(self, target_type: FType, value_expr: Expr, fn: Callable) -> Callable:
        vt = self.etype(value_expr)
        if target_type is vt:
            return fn
        if target_type is FType.REAL:
            return lambda env: F32(fn(env))
        if target_type is FType.INTEGER:
            return lambda env: int(fn(env))
        return lambda env: bool(fn(env))


def _index_const_offset(ix: Expr, ivar: str) -> int:
    if isinstance(ix, ScalarRef) and ix.name == ivar:
        return 0
    if isinstance(ix, BinOp) and ix.op in ("+", "-"):
        if isinstance(ix.left, ScalarRef) and ix.left.name == ivar \
                and isinstance(ix.right, Const):
            return ix.right.value if ix.op == "+" else -ix.right.value
        if ix.op == "+" and isinstance(ix.right, ScalarRef) and ix.right.name == ivar \
                and isinstance(ix.left, Const):
            return ix.left.value
    raise EvalError(f"index not affine in '{ivar}'")


def compile_elemental(node, host_values: Dict[str, object],
                      read: Callable, write: Callable) -> Callable:
    """Build fn(idx_tuple) running the node body at one index.

    `read(name, offset, idx)` returns the element at idx+offset;
    `write(name, offset, value, idx)` stores at idx+offset (offset is always
    the zero vector for map writes).
    """
    comp = _ElemCompiler(node, host_values, read, write)
    stmts = [comp.stmt(s) for s in node.body]
    ivars = comp.ivars

    def run(idx, seed=None):
        env = {"__idx": idx}
        if seed is not None:
            env.update(seed)
        for i, var in enumerate(ivars):
            env[var] = idx[i]
        for s in stmts:
            s(env)
        return env

    return run


# --------------------------------------------------------------------------
# Direct IR evaluation (canonical order): the reference used in rewrite tests


def evaluate_ir(ir: FunctionalIR, arrays: Dict[str, np.ndarray],
                host_values: Dict[str, object]) -> Dict[str, object]:
    """Run every node once, in order, over numpy storage; returns scalar
    results of fold nodes keyed by accumulator name."""
    out_scalars: Dict[str, object] = {}
    for node in ir.nodes:
        if node.kind == "seq":
            raise AnalyzerError(f"SeqNode '{node.name}' is not executable in IR form")
        info = {a: ir.arrays[a] for a in set(node.reads) | set(node.writes)}

        def read(name, off, idx, info=info):
            lo = info[name].bounds
            pos = tuple(idx[d] + off[d] - lo[d][0] for d in range(len(off)))
            return arrays[name][pos]

        def write(name, off, value, idx, info=info):
            lo = info[name].bounds
            pos = tuple(idx[d] + off[d] - lo[d][0] for d in range(len(off)))
            arrays[name][pos] = value

        if node.kind == "map":
            fn = compile_elemental(node, host_values, read, write)
            for idx in _iter_box(node.bounds):
                fn(idx)
        else:
            fn = compile_elemental(node, host_values, read, write)
            acc_name = node.accumulator
            acc = host_values.get(acc_name, _init_for(node))
            for idx in _iter_box(node.bounds):
                acc = fn(idx, {acc_name: acc})[acc_name]
            out_scalars[acc_name] = acc
    return out_scalars


def _init_for(node: FoldNode):
    if node.init is not None:
        return F32(node.init)
    if node.combine_op == "+":
        return F32(0.0)
    if node.combine_op == "*":
        return F32(1.0)
    if node.combine_op == "min":
        return F32(np.inf)
    return F32(-np.inf)


def _iter_box(bounds: Box):
    if len(bounds) == 1:
        (lo, hi), = bounds
        for j in range(lo, hi + 1):
            yield (j,)
    elif len(bounds) == 2:
        (jlo, jhi), (klo, khi) = bounds
        for j in range(jlo, jhi + 1):
            for k in range(klo, khi + 1):
                yield (j, k)
    else:
        raise AnalyzerError(f"rank {len(bounds)} nests are not supported")
