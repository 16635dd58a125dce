"""Typed AST for the supported FORTRAN 77 subset.

Node equality ignores source locations so that round-trip tests can compare
`parse(print(parse(text)))` against `parse(text)` directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Tuple, Union


class FType(Enum):
    REAL = "real"
    INTEGER = "integer"
    LOGICAL = "logical"

    def __str__(self) -> str:
        return self.value


class Intent(Enum):
    IN = "in"
    OUT = "out"
    INOUT = "inout"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Loc:
    path: str = "<input>"
    line: int = 0
    col: int = 0


_NOLOC = Loc()


# --------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Const(Expr):
    value: Union[int, float, bool]
    ftype: FType
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class ScalarRef(Expr):
    name: str
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class ArrayRef(Expr):
    name: str
    indices: Tuple[Expr, ...]
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # + - * / ** > >= < <= == /= and or
    left: Expr
    right: Expr
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class UnaryOp(Expr):
    op: str  # - not
    operand: Expr
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class IntrinsicCall(Expr):
    name: str  # abs min max sqrt mod
    args: Tuple[Expr, ...]
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class FuncCall(Expr):
    """Reference to a user FUNCTION unit (resolved during linking)."""

    name: str
    args: Tuple[Expr, ...]
    loc: Loc = field(default=_NOLOC, compare=False)


INTRINSICS = ("abs", "min", "max", "sqrt", "mod")


# --------------------------------------------------------------------------
# Statements


@dataclass(frozen=True)
class Stmt:
    pass


@dataclass(frozen=True)
class Assignment(Stmt):
    target: Union[ScalarRef, ArrayRef]
    value: Expr
    label: Optional[int] = None
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class DoLoop(Stmt):
    """DO loop; `term_label` is set for the label-terminated F77 form."""

    var: str
    lo: Expr
    hi: Expr
    step: Optional[Expr]
    body: Tuple[Stmt, ...]
    term_label: Optional[int] = None
    label: Optional[int] = None
    loc: Loc = field(default=_NOLOC, compare=False)

    @property
    def is_labeled(self) -> bool:
        return self.term_label is not None


@dataclass(frozen=True)
class IfThenElse(Stmt):
    cond: Expr
    then_body: Tuple[Stmt, ...]
    else_body: Tuple[Stmt, ...] = ()
    label: Optional[int] = None
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class Call(Stmt):
    name: str
    args: Tuple[Expr, ...]
    label: Optional[int] = None
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class Return(Stmt):
    label: Optional[int] = None
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class Continue(Stmt):
    label: Optional[int] = None
    loc: Loc = field(default=_NOLOC, compare=False)


# --------------------------------------------------------------------------
# Declarations


@dataclass(frozen=True)
class Entity:
    """Declared name with an optional dimension spec (bound expressions)."""

    name: str
    dims: Optional[Tuple[Tuple[Optional[Expr], Expr], ...]] = None  # (lo, hi) per dim

    @property
    def is_array(self) -> bool:
        return self.dims is not None


@dataclass(frozen=True)
class Decl:
    pass


@dataclass(frozen=True)
class TypeDecl(Decl):
    ftype: FType
    entities: Tuple[Entity, ...]
    intent: Optional[Intent] = None  # set by the refactorer on dummy arguments
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class DimensionDecl(Decl):
    entities: Tuple[Entity, ...]
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class ParameterDecl(Decl):
    names: Tuple[str, ...]
    values: Tuple[Expr, ...]
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class CommonDecl(Decl):
    block: str  # "" for blank common
    entities: Tuple[Entity, ...]
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class ImplicitNone(Decl):
    loc: Loc = field(default=_NOLOC, compare=False)


@dataclass(frozen=True)
class UseDecl(Decl):
    """USE <module>, ONLY: <names> (appears only on refactored units)."""

    module: str
    only: Tuple[str, ...]
    loc: Loc = field(default=_NOLOC, compare=False)


# --------------------------------------------------------------------------
# Units and the linked program


@dataclass(frozen=True)
class SourceUnit:
    kind: str  # program | subroutine | function
    name: str
    args: Tuple[str, ...]
    decls: Tuple[Decl, ...]
    body: Tuple[Stmt, ...]
    result_type: Optional[FType] = None  # for functions
    module_name: Optional[str] = None  # set by the modularizer
    intents: Tuple[Tuple[str, Intent], ...] = ()  # (dummy, intent), set by the refactorer
    path: str = field(default="<input>", compare=False)
    loc: Loc = field(default=_NOLOC, compare=False)

    def with_(self, **kw) -> "SourceUnit":
        return replace(self, **kw)

    @property
    def common_blocks(self):
        """List of (block name, entity tuple) in declaration order."""
        return [(d.block, d.entities) for d in self.decls if isinstance(d, CommonDecl)]


@dataclass(frozen=True)
class Symbol:
    name: str
    ftype: FType
    rank: int  # 0 for scalars
    bounds: Tuple[Tuple[int, int], ...]  # constant-folded (lo, hi) per dim
    origin: str  # explicit | implicit
    kind: str  # scalar | array | parameter | dummy_scalar | dummy_array
    value: Optional[Union[int, float, bool]] = None  # parameters only

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(hi - lo + 1 for lo, hi in self.bounds)


@dataclass
class ProgramAst:
    """Linked whole program: units, call graph and per-unit symbol tables."""

    units: Tuple[SourceUnit, ...]
    call_graph: Tuple[Tuple[str, str], ...]  # (caller, callee), deduplicated, ordered
    symtabs: dict  # unit name -> {identifier -> Symbol}

    def unit(self, name: str) -> SourceUnit:
        for u in self.units:
            if u.name == name:
                return u
        raise KeyError(name)

    @property
    def main(self) -> SourceUnit:
        for u in self.units:
            if u.kind == "program":
                return u
        raise NoProgramUnit()

    def callees_of(self, name: str) -> Tuple[str, ...]:
        return tuple(c for (a, c) in self.call_graph if a == name)

    def replace_unit(self, new_unit: SourceUnit) -> "ProgramAst":
        units = tuple(new_unit if u.name == new_unit.name else u for u in self.units)
        return ProgramAst(units=units, call_graph=self.call_graph, symtabs=self.symtabs)


from ..errors import NoProgramUnit  # noqa: E402  (avoid cycle at import time)


# --------------------------------------------------------------------------
# Small traversal helpers used across the compiler


def walk_exprs(node):
    """Yield every sub-expression of an expression, statement or body."""
    if isinstance(node, (tuple, list)):
        for n in node:
            yield from walk_exprs(n)
    elif isinstance(node, Expr):
        yield node
        if isinstance(node, ArrayRef):
            yield from walk_exprs(node.indices)
        elif isinstance(node, BinOp):
            yield from walk_exprs(node.left)
            yield from walk_exprs(node.right)
        elif isinstance(node, UnaryOp):
            yield from walk_exprs(node.operand)
        elif isinstance(node, (IntrinsicCall, FuncCall)):
            yield from walk_exprs(node.args)
    elif isinstance(node, Assignment):
        yield from walk_exprs(node.target)
        yield from walk_exprs(node.value)
    elif isinstance(node, DoLoop):
        yield from walk_exprs(node.lo)
        yield from walk_exprs(node.hi)
        if node.step is not None:
            yield from walk_exprs(node.step)
        yield from walk_exprs(node.body)
    elif isinstance(node, IfThenElse):
        yield from walk_exprs(node.cond)
        yield from walk_exprs(node.then_body)
        yield from walk_exprs(node.else_body)
    elif isinstance(node, Call):
        yield from walk_exprs(node.args)


def walk_stmts(body):
    """Yield every statement in a body, depth first."""
    for st in body:
        yield st
        if isinstance(st, DoLoop):
            yield from walk_stmts(st.body)
        elif isinstance(st, IfThenElse):
            yield from walk_stmts(st.then_body)
            yield from walk_stmts(st.else_body)


def map_body(body, fn):
    """Rebuild a statement tuple, applying `fn` bottom-up to each statement.

    `fn` receives a statement whose children are already rewritten and returns
    a statement, a list of statements, or None to drop it.
    """
    out = []
    for st in body:
        if isinstance(st, DoLoop):
            st = replace(st, body=map_body(st.body, fn))
        elif isinstance(st, IfThenElse):
            st = replace(
                st,
                then_body=map_body(st.then_body, fn),
                else_body=map_body(st.else_body, fn),
            )
        res = fn(st)
        if res is None:
            continue
        if isinstance(res, (list, tuple)):
            out.extend(res)
        else:
            out.append(res)
    return tuple(out)


def map_exprs_in_stmt(st: Stmt, fn) -> Stmt:
    """Rebuild one statement with every expression mapped bottom-up by `fn`."""

    def ex(e: Expr) -> Expr:
        if isinstance(e, ArrayRef):
            e = replace(e, indices=tuple(ex(i) for i in e.indices))
        elif isinstance(e, BinOp):
            e = replace(e, left=ex(e.left), right=ex(e.right))
        elif isinstance(e, UnaryOp):
            e = replace(e, operand=ex(e.operand))
        elif isinstance(e, (IntrinsicCall, FuncCall)):
            e = replace(e, args=tuple(ex(a) for a in e.args))
        return fn(e)

    if isinstance(st, Assignment):
        return replace(st, target=ex(st.target), value=ex(st.value))
    if isinstance(st, DoLoop):
        return replace(
            st,
            lo=ex(st.lo),
            hi=ex(st.hi),
            step=None if st.step is None else ex(st.step),
            body=tuple(map_exprs_in_stmt(s, fn) for s in st.body),
        )
    if isinstance(st, IfThenElse):
        return replace(
            st,
            cond=ex(st.cond),
            then_body=tuple(map_exprs_in_stmt(s, fn) for s in st.then_body),
            else_body=tuple(map_exprs_in_stmt(s, fn) for s in st.else_body),
        )
    if isinstance(st, Call):
        return replace(st, args=tuple(ex(a) for a in st.args))
    return st
