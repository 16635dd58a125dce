"""Loop-nest classification: map, fold, or sequential, with access patterns.

The dependence test covers constant-offset affine accesses only: index d of
a rank-r array inside a depth-r nest must be `ivar_d` or `ivar_d +/- c`.
Anything else (variable offsets, transposed induction use, calls in the
body) is opaque and forces the safe Sequential classification.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from ..frontend.dataflow import FirstAccessAnalysis
from ..frontend.nodes import (
    ArrayRef,
    Assignment,
    BinOp,
    Call,
    Const,
    Continue,
    DoLoop,
    Expr,
    FuncCall,
    IfThenElse,
    IntrinsicCall,
    Return,
    ScalarRef,
    Stmt,
    UnaryOp,
    walk_exprs,
)

Offset = Tuple[int, ...]

_FOLD_OPS = {"+": "+", "*": "*"}
_FOLD_INTRINSICS = {"min", "max"}


@dataclass(frozen=True)
class AccessPattern:
    """Offsets of one array in one mode, relative to the induction vector."""

    array: str
    mode: str  # read | write
    offsets: FrozenSet[Offset]

    def sorted_offsets(self) -> List[Offset]:
        return sorted(self.offsets)


@dataclass(frozen=True)
class LoopClass:
    kind: str  # map | fold | sequential
    reason: str = ""
    accumulator: Optional[str] = None
    combine_op: Optional[str] = None

    @property
    def is_map(self) -> bool:
        return self.kind == "map"

    @property
    def is_fold(self) -> bool:
        return self.kind == "fold"


@dataclass
class NestInfo:
    """A perfect loop nest: induction variables, bounds and the inner body."""

    ivars: Tuple[str, ...]
    bounds: Tuple[Tuple[Expr, Expr, Optional[Expr]], ...]  # (lo, hi, step) per level
    body: Tuple[Stmt, ...]


def peel_nest(loop: DoLoop) -> NestInfo:
    """Extract the maximal perfect nest starting at `loop`."""
    ivars: List[str] = []
    bounds: List[Tuple[Expr, Expr, Optional[Expr]]] = []
    cur: Stmt = loop
    while isinstance(cur, DoLoop):
        ivars.append(cur.var)
        bounds.append((cur.lo, cur.hi, cur.step))
        inner = [s for s in cur.body if not isinstance(s, Continue)]
        if len(inner) == 1 and isinstance(inner[0], DoLoop):
            cur = inner[0]
        else:
            return NestInfo(tuple(ivars), tuple(bounds), cur.body)
    raise AssertionError("unreachable")


class _Opaque(Exception):
    def __init__(self, reason: str):
        self.reason = reason


def _index_offset(ix: Expr, ivar: str) -> int:
    """Match `ivar`, `ivar+c`, `ivar-c`, `c+ivar`; raise _Opaque otherwise."""
    if isinstance(ix, ScalarRef):
        if ix.name == ivar:
            return 0
        raise _Opaque(f"index '{ix.name}' is not the loop induction variable")
    if isinstance(ix, BinOp) and ix.op in ("+", "-"):
        left, right = ix.left, ix.right
        if isinstance(left, ScalarRef) and left.name == ivar and isinstance(right, Const) \
                and isinstance(right.value, int):
            return right.value if ix.op == "+" else -right.value
        if ix.op == "+" and isinstance(right, ScalarRef) and right.name == ivar \
                and isinstance(left, Const) and isinstance(left.value, int):
            return left.value
    raise _Opaque("non-affine or variable-offset index")


def _offset_of(ref: ArrayRef, ivars: Sequence[str]) -> Offset:
    if len(ref.indices) != len(ivars):
        raise _Opaque(
            f"'{ref.name}' has rank {len(ref.indices)}, nest depth is {len(ivars)}"
        )
    return tuple(_index_offset(ix, ivar) for ix, ivar in zip(ref.indices, ivars))


@dataclass
class _Accesses:
    reads: Dict[str, Set[Offset]] = field(default_factory=dict)
    writes: Dict[str, Set[Offset]] = field(default_factory=dict)
    scalar_written: Set[str] = field(default_factory=set)
    scalar_read: Set[str] = field(default_factory=set)
    fold_updates: Dict[str, Set[str]] = field(default_factory=dict)  # acc -> ops
    plain_scalar_writes: Set[str] = field(default_factory=set)

    def read_array(self, name: str, off: Offset) -> None:
        self.reads.setdefault(name, set()).add(off)

    def write_array(self, name: str, off: Offset) -> None:
        self.writes.setdefault(name, set()).add(off)

    def read_scalar(self, name: str) -> None:
        self.scalar_read.add(name)

    def write_scalar(self, name: str) -> None:
        self.scalar_written.add(name)


def _expr_accesses(e: Expr, ivars: Sequence[str], acc: _Accesses) -> None:
    if isinstance(e, ScalarRef):
        acc.read_scalar(e.name)
    elif isinstance(e, ArrayRef):
        for ix in e.indices:
            for sub in walk_exprs(ix):
                if isinstance(sub, ScalarRef) and sub.name not in ivars:
                    acc.read_scalar(sub.name)
                elif isinstance(sub, ArrayRef):
                    raise _Opaque("array reference inside an index expression")
        acc.read_array(e.name, _offset_of(e, ivars))
    elif isinstance(e, BinOp):
        _expr_accesses(e.left, ivars, acc)
        _expr_accesses(e.right, ivars, acc)
    elif isinstance(e, UnaryOp):
        _expr_accesses(e.operand, ivars, acc)
    elif isinstance(e, IntrinsicCall):
        for a in e.args:
            _expr_accesses(a, ivars, acc)
    elif isinstance(e, FuncCall):
        raise _Opaque(f"call to '{e.name}' inside the loop body")


def _fold_update(st: Assignment, ivars: Sequence[str], acc: _Accesses) -> bool:
    """Recognize `s = s op expr` / `s = min(s, expr)` accumulation shapes."""
    if not isinstance(st.target, ScalarRef):
        return False
    name = st.target.name
    v = st.value
    if isinstance(v, BinOp) and v.op in _FOLD_OPS:
        for this, other in ((v.left, v.right), (v.right, v.left)):
            if isinstance(this, ScalarRef) and this.name == name:
                sub = _Accesses()
                _expr_accesses(other, ivars, sub)
                if name in sub.scalar_read:
                    return False
                _merge_sub(acc, sub)
                acc.fold_updates.setdefault(name, set()).add(v.op)
                return True
    if isinstance(v, IntrinsicCall) and v.name in _FOLD_INTRINSICS and len(v.args) == 2:
        for this, other in ((v.args[0], v.args[1]), (v.args[1], v.args[0])):
            if isinstance(this, ScalarRef) and this.name == name:
                sub = _Accesses()
                _expr_accesses(other, ivars, sub)
                if name in sub.scalar_read:
                    return False
                _merge_sub(acc, sub)
                acc.fold_updates.setdefault(name, set()).add(v.name)
                return True
    return False


def _merge_sub(acc: _Accesses, sub: _Accesses) -> None:
    for n, offs in sub.reads.items():
        for o in offs:
            acc.read_array(n, o)
    for n in sub.scalar_read:
        acc.read_scalar(n)


def _stmt_accesses(st: Stmt, ivars: Sequence[str], acc: _Accesses) -> None:
    if isinstance(st, Assignment):
        if _fold_update(st, ivars, acc):
            return
        _expr_accesses(st.value, ivars, acc)
        if isinstance(st.target, ArrayRef):
            for ix in st.target.indices:
                for sub in walk_exprs(ix):
                    if isinstance(sub, ScalarRef) and sub.name not in ivars:
                        acc.read_scalar(sub.name)
            acc.write_array(st.target.name, _offset_of(st.target, ivars))
        else:
            acc.write_scalar(st.target.name)
            acc.plain_scalar_writes.add(st.target.name)
    elif isinstance(st, IfThenElse):
        _expr_accesses(st.cond, ivars, acc)
        for s in st.then_body:
            _stmt_accesses(s, ivars, acc)
        for s in st.else_body:
            _stmt_accesses(s, ivars, acc)
    elif isinstance(st, DoLoop):
        # an imperfectly nested inner loop is part of the elemental body
        _expr_accesses(st.lo, ivars, acc)
        _expr_accesses(st.hi, ivars, acc)
        if st.step is not None:
            _expr_accesses(st.step, ivars, acc)
        acc.write_scalar(st.var)
        acc.plain_scalar_writes.add(st.var)
        for s in st.body:
            _stmt_accesses(s, ivars, acc)
    elif isinstance(st, Call):
        raise _Opaque(f"call to '{st.name}' inside the loop body")
    elif isinstance(st, (Return, Continue)):
        pass


def classify_loop_nest(loop: DoLoop) -> Tuple[LoopClass, List[AccessPattern], NestInfo]:
    """Classify one top-level nest and report its access patterns."""
    nest = peel_nest(loop)
    acc = _Accesses()
    try:
        for st in nest.body:
            _stmt_accesses(st, nest.ivars, acc)
    except _Opaque as ex:
        return LoopClass("sequential", ex.reason), [], nest

    patterns = _patterns(acc)

    # array-carried dependences
    zero: Offset = tuple(0 for _ in nest.ivars)
    for name, offs in acc.writes.items():
        if offs != {zero}:
            off = sorted(offs - {zero})[0] if offs - {zero} else zero
            return (
                LoopClass("sequential", f"'{name}' written at offset {off}"),
                patterns, nest,
            )
    for name, offs in acc.writes.items():
        reads = acc.reads.get(name, set())
        if reads - {zero}:
            off = sorted(reads - {zero})[0]
            return (
                LoopClass("sequential", f"'{name}' carried at offset {off}"),
                patterns, nest,
            )

    # scalar-carried dependences: a written scalar whose first access on some
    # path is a read survives across iterations (path-sensitive check)
    fa = FirstAccessAnalysis().run(nest.body)
    array_names = set(acc.reads) | set(acc.writes)
    carried = {
        n for n in fa.written
        if n not in array_names and n not in nest.ivars
        and fa.state[n].first in ("r", "rw")
    }
    accumulators = set(acc.fold_updates)
    plain_carried = carried - accumulators

    if plain_carried:
        name = sorted(plain_carried)[0]
        return (
            LoopClass("sequential", f"scalar '{name}' carried across iterations"),
            patterns, nest,
        )

    if accumulators:
        bad = accumulators & (acc.plain_scalar_writes | acc.scalar_read)
        if bad or len(accumulators) > 1:
            why = ("multiple accumulators" if len(accumulators) > 1
                   else f"accumulator '{sorted(bad)[0]}' also used directly")
            return LoopClass("sequential", why), patterns, nest
        if acc.writes:
            return (
                LoopClass("sequential", "reduction mixed with array writes"),
                patterns, nest,
            )
        name = accumulators.pop()
        ops = acc.fold_updates[name]
        if len(ops) != 1:
            return (
                LoopClass("sequential", f"accumulator '{name}' mixes operators"),
                patterns, nest,
            )
        return LoopClass("fold", accumulator=name, combine_op=ops.pop()), patterns, nest

    return LoopClass("map"), patterns, nest


def _patterns(acc: _Accesses) -> List[AccessPattern]:
    out: List[AccessPattern] = []
    for name in sorted(acc.reads):
        out.append(AccessPattern(name, "read", frozenset(acc.reads[name])))
    for name in sorted(acc.writes):
        out.append(AccessPattern(name, "write", frozenset(acc.writes[name])))
    return out
