"""Whole-program linking: call graph, symbol tables, arity checks."""

from __future__ import annotations

from typing import Dict, List, Sequence, Set, Tuple

from ..errors import DuplicateUnit, EvalError, LinkError, NoProgramUnit, UnresolvedCallee
from .nodes import (
    ArrayRef,
    BinOp,
    Call,
    CommonDecl,
    Const,
    DimensionDecl,
    Expr,
    FType,
    FuncCall,
    ParameterDecl,
    ProgramAst,
    ScalarRef,
    SourceUnit,
    Symbol,
    TypeDecl,
    UnaryOp,
    walk_exprs,
    walk_stmts,
)


def implicit_type(name: str) -> FType:
    """F77 default rule: names starting i-n are INTEGER, the rest REAL."""
    return FType.INTEGER if name[0] in "ijklmn" else FType.REAL


def fold_const(e: Expr, env: Dict[str, object]) -> object:
    """Evaluate a constant expression (parameters allowed via `env`)."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, ScalarRef):
        if e.name not in env:
            raise EvalError(f"'{e.name}' is not a constant")
        return env[e.name]
    if isinstance(e, UnaryOp):
        v = fold_const(e.operand, env)
        if e.op == "-":
            return -v
        if e.op == "not":
            return not v
    if isinstance(e, BinOp):
        a = fold_const(e.left, env)
        b = fold_const(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if isinstance(a, int) and isinstance(b, int):
                q = abs(a) // abs(b)
                return q if (a >= 0) == (b >= 0) else -q
            return a / b
        if e.op == "**":
            return a ** b
    raise EvalError(f"expression is not constant: {type(e).__name__}")


def parameter_env(unit: SourceUnit) -> Dict[str, object]:
    env: Dict[str, object] = {}
    for d in unit.decls:
        if isinstance(d, ParameterDecl):
            for name, value in zip(d.names, d.values):
                env[name] = fold_const(value, env)
    return env


def _declared_types(unit: SourceUnit) -> Dict[str, FType]:
    out: Dict[str, FType] = {}
    for d in unit.decls:
        if isinstance(d, TypeDecl):
            for ent in d.entities:
                out[ent.name] = d.ftype
    return out


def _declared_dims(unit: SourceUnit) -> Dict[str, tuple]:
    out: Dict[str, tuple] = {}
    for d in unit.decls:
        if isinstance(d, (TypeDecl, DimensionDecl, CommonDecl)):
            for ent in d.entities:
                if ent.dims is not None:
                    if ent.name in out and out[ent.name] != ent.dims:
                        raise LinkError(
                            f"'{ent.name}' in '{unit.name}' declared with conflicting shapes"
                        )
                    out[ent.name] = ent.dims
    return out


def fold_bounds(dims, env) -> Tuple[Tuple[int, int], ...]:
    out: List[Tuple[int, int]] = []
    for lo, hi in dims:
        lo_v = 1 if lo is None else int(fold_const(lo, env))
        hi_v = int(fold_const(hi, env))
        if hi_v < lo_v:
            raise LinkError(f"array bound {lo_v}:{hi_v} is empty")
        out.append((lo_v, hi_v))
    return tuple(out)


def common_members(unit: SourceUnit) -> Dict[str, str]:
    """Map identifier -> common block name for this unit."""
    out: Dict[str, str] = {}
    for d in unit.decls:
        if isinstance(d, CommonDecl):
            for ent in d.entities:
                out[ent.name] = d.block
    return out


def has_implicit_none(unit: SourceUnit) -> bool:
    from .nodes import ImplicitNone

    return any(isinstance(d, ImplicitNone) for d in unit.decls)


def referenced_names(unit: SourceUnit) -> Set[str]:
    names: Set[str] = set()
    for e in walk_exprs(unit.body):
        if isinstance(e, ScalarRef):
            names.add(e.name)
        elif isinstance(e, ArrayRef):
            names.add(e.name)
    for st in walk_stmts(unit.body):
        from .nodes import DoLoop

        if isinstance(st, DoLoop):
            names.add(st.var)
    return names


def build_symtab(unit: SourceUnit, function_names: Dict[str, FType]) -> Dict[str, Symbol]:
    env = parameter_env(unit)
    types = _declared_types(unit)
    dims = _declared_dims(unit)
    args = set(unit.args)
    table: Dict[str, Symbol] = {}

    for name, value in env.items():
        table[name] = Symbol(name, FType.INTEGER if isinstance(value, int) else FType.REAL,
                             0, (), "explicit", "parameter", value)

    declared = set(types) | set(dims) | set(common_members(unit))
    for name in sorted(declared):
        if name in table:
            # a TypeDecl naming a PARAMETER constant only fixes its type
            if name in dims:
                raise LinkError(f"'{name}' in '{unit.name}' is both a parameter and an array")
            continue
        ftype = types.get(name)
        origin = "explicit"
        if ftype is None:
            ftype = implicit_type(name)
            origin = "implicit" if name not in types else "explicit"
        if name in dims:
            bounds = fold_bounds(dims[name], env)
            kind = "dummy_array" if name in args else "array"
            table[name] = Symbol(name, ftype, len(bounds), bounds, origin, kind)
        else:
            kind = "dummy_scalar" if name in args else "scalar"
            table[name] = Symbol(name, ftype, 0, (), origin, kind)

    for name in sorted(referenced_names(unit) | args):
        if name in table or name in function_names:
            continue
        kind = "dummy_scalar" if name in args else "scalar"
        table[name] = Symbol(name, implicit_type(name), 0, (), "implicit", kind)

    if unit.kind == "function" and unit.name not in table:
        ftype = unit.result_type or implicit_type(unit.name)
        table[unit.name] = Symbol(unit.name, ftype, 0, (), "explicit" if unit.result_type else "implicit", "scalar")
    return table


def link_units(units: Sequence[SourceUnit]) -> ProgramAst:
    """Link parsed units into a whole program with a closed call graph."""
    seen: Dict[str, SourceUnit] = {}
    for u in units:
        if u.name in seen:
            raise DuplicateUnit(u.name)
        seen[u.name] = u
    programs = [u for u in units if u.kind == "program"]
    if not programs:
        raise NoProgramUnit()
    if len(programs) > 1:
        raise DuplicateUnit(programs[1].name)

    subroutines = {u.name for u in units if u.kind == "subroutine"}
    functions = {u.name: (u.result_type or implicit_type(u.name))
                 for u in units if u.kind == "function"}

    edges: List[Tuple[str, str]] = []
    for u in units:
        found: List[str] = []
        for st in walk_stmts(u.body):
            if isinstance(st, Call):
                if st.name not in subroutines:
                    raise UnresolvedCallee(st.name, u.name)
                found.append(st.name)
        for e in walk_exprs(u.body):
            if isinstance(e, FuncCall):
                if e.name not in functions:
                    raise UnresolvedCallee(e.name, u.name)
                found.append(e.name)
        for callee in found:
            if (u.name, callee) not in edges:
                edges.append((u.name, callee))

    symtabs = {u.name: build_symtab(u, functions) for u in units}

    # arity and argument-count checks
    for u in units:
        table = symtabs[u.name]
        for e in walk_exprs(u.body):
            if isinstance(e, ArrayRef):
                sym = table.get(e.name)
                if sym is None or sym.rank == 0:
                    raise LinkError(f"'{e.name}' indexed in '{u.name}' but not an array")
                if len(e.indices) != sym.rank:
                    raise LinkError(
                        f"'{e.name}' in '{u.name}' has rank {sym.rank}, "
                        f"indexed with {len(e.indices)} subscripts"
                    )
        for st in walk_stmts(u.body):
            if isinstance(st, Call):
                callee = seen[st.name]
                if len(st.args) != len(callee.args):
                    raise LinkError(
                        f"'{u.name}' calls '{st.name}' with {len(st.args)} args, "
                        f"expected {len(callee.args)}"
                    )
        for e in walk_exprs(u.body):
            if isinstance(e, FuncCall):
                callee = seen[e.name]
                if len(e.args) != len(callee.args):
                    raise LinkError(
                        f"'{u.name}' references '{e.name}' with {len(e.args)} args, "
                        f"expected {len(callee.args)}"
                    )

    return ProgramAst(units=tuple(units), call_graph=tuple(edges), symtabs=symtabs)


def call_graph_is_acyclic(ast: ProgramAst) -> bool:
    graph: Dict[str, List[str]] = {}
    for a, b in ast.call_graph:
        graph.setdefault(a, []).append(b)
    state: Dict[str, int] = {}

    def visit(n: str) -> bool:
        state[n] = 1
        for m in graph.get(n, ()):
            s = state.get(m, 0)
            if s == 1:
                return False
            if s == 0 and not visit(m):
                return False
        state[n] = 2
        return True

    return all(visit(u.name) for u in ast.units if state.get(u.name, 0) == 0)
