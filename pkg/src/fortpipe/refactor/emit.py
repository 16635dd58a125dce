"""Free-form Fortran 95 emitter for refactored programs.

Output is deterministic: one .f95 file per original input file, modules
wrapping non-program units, IMPLICIT NONE in every unit, per-dummy intent
declarations.  The restricted free-form reader can re-ingest everything
emitted here.
"""

from __future__ import annotations

from typing import Dict, List, Tuple

from ..frontend.nodes import (
    Assignment,
    Call,
    Continue,
    Decl,
    DimensionDecl,
    DoLoop,
    Entity,
    FType,
    IfThenElse,
    ParameterDecl,
    ProgramAst,
    Return,
    SourceUnit,
    Stmt,
    TypeDecl,
    UseDecl,
)
from ..frontend.printer import _entity_text, expr_text

_WRAP = 96


class _Writer:
    def __init__(self) -> None:
        self.lines: List[str] = []

    def put(self, indent: int, text: str) -> None:
        line = " " * indent + text
        while len(line) > _WRAP:
            cut = line.rfind(" ", indent + 8, _WRAP - 2)
            if cut <= indent:
                break
            self.lines.append(line[:cut] + " &")
            line = " " * (indent + 4) + line[cut + 1:]
        self.lines.append(line)

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _param_decls(unit: SourceUnit) -> List[Tuple[FType, List[str], ParameterDecl]]:
    out = []
    for d in unit.decls:
        if isinstance(d, ParameterDecl):
            ints = [n for n, v in zip(d.names, d.values) if _is_int(v)]
            reals = [n for n in d.names if n not in ints]
            out.append((d, ints, reals))
    return out


def _is_int(value) -> bool:
    from ..frontend.linker import fold_const

    try:
        return isinstance(fold_const(value, {}), (int, bool))
    except Exception:
        return False


def _entity_map(unit: SourceUnit) -> Dict[str, Entity]:
    ents: Dict[str, Entity] = {}
    for d in unit.decls:
        if isinstance(d, (TypeDecl, DimensionDecl)):
            for ent in d.entities:
                if ent.dims is not None or ent.name not in ents:
                    ents[ent.name] = ent
    return ents


def _type_map(unit: SourceUnit) -> Dict[str, FType]:
    types: Dict[str, FType] = {}
    for d in unit.decls:
        if isinstance(d, TypeDecl):
            for ent in d.entities:
                types[ent.name] = d.ftype
    return types


def emit_unit(unit: SourceUnit, w: _Writer, indent: int) -> None:
    pad = indent
    if unit.kind == "program":
        w.put(pad, f"program {unit.name}")
    elif unit.kind == "subroutine":
        args = f"({', '.join(unit.args)})" if unit.args else "()"
        w.put(pad, f"subroutine {unit.name}{args}")
    else:
        prefix = f"{unit.result_type} " if unit.result_type else ""
        w.put(pad, f"{prefix}function {unit.name}({', '.join(unit.args)})")
    inner = pad + 2

    for d in unit.decls:
        if isinstance(d, UseDecl):
            only = f", only: {', '.join(d.only)}" if d.only else ""
            w.put(inner, f"use {d.module}{only}")
    w.put(inner, "implicit none")

    for d, ints, reals in _param_decls(unit):
        if ints:
            w.put(inner, f"integer :: {', '.join(ints)}")
        if reals:
            w.put(inner, f"real :: {', '.join(reals)}")
        items = ", ".join(f"{n} = {expr_text(v, 'f95')}" for n, v in zip(d.names, d.values))
        w.put(inner, f"parameter ({items})")

    types = _type_map(unit)
    ents = _entity_map(unit)
    intent_of = dict(unit.intents)

    for arg in unit.args:
        ftype = types.get(arg)
        if ftype is None:
            from ..frontend.linker import implicit_type

            ftype = implicit_type(arg)
        ent = ents.get(arg, Entity(arg))
        intent = intent_of.get(arg)
        attr = f", intent({intent})" if intent is not None else ""
        w.put(inner, f"{ftype}{attr} :: {_entity_text(ent, 'f95')}")

    arg_set = set(unit.args)
    for ftype in (FType.INTEGER, FType.REAL, FType.LOGICAL):
        names = sorted(
            n for n, t in types.items()
            if t is ftype and n not in arg_set and not _is_param(unit, n)
        )
        if unit.kind == "function" and unit.name in names:
            names.remove(unit.name)
            w.put(inner, f"{ftype} :: {unit.name}")
        if names:
            items = ", ".join(_entity_text(ents.get(n, Entity(n)), "f95") for n in names)
            w.put(inner, f"{ftype} :: {items}")

    _emit_body(unit.body, w, inner)
    w.put(pad, f"end {unit.kind} {unit.name}")


def _is_param(unit: SourceUnit, name: str) -> bool:
    for d in unit.decls:
        if isinstance(d, ParameterDecl) and name in d.names:
            return True
    return False


def _emit_body(body, w: _Writer, indent: int) -> None:
    for st in body:
        _emit_stmt(st, w, indent)


def _emit_stmt(st: Stmt, w: _Writer, indent: int) -> None:
    if isinstance(st, Assignment):
        w.put(indent, f"{expr_text(st.target, 'f95')} = {expr_text(st.value, 'f95')}")
    elif isinstance(st, Call):
        args = f"({', '.join(expr_text(a, 'f95') for a in st.args)})" if st.args else ""
        w.put(indent, f"call {st.name}{args}")
    elif isinstance(st, Return):
        w.put(indent, "return")
    elif isinstance(st, Continue):
        w.put(indent, "continue")
    elif isinstance(st, DoLoop):
        head = f"do {st.var} = {expr_text(st.lo, 'f95')}, {expr_text(st.hi, 'f95')}"
        if st.step is not None:
            head += f", {expr_text(st.step, 'f95')}"
        w.put(indent, head)
        _emit_body(st.body, w, indent + 2)
        w.put(indent, "end do")
    elif isinstance(st, IfThenElse):
        if (len(st.then_body) == 1 and not st.else_body
                and isinstance(st.then_body[0], (Assignment, Call, Return, Continue))):
            inner = st.then_body[0]
            if isinstance(inner, Assignment):
                tail = f"{expr_text(inner.target, 'f95')} = {expr_text(inner.value, 'f95')}"
            elif isinstance(inner, Call):
                args = f"({', '.join(expr_text(a, 'f95') for a in inner.args)})" if inner.args else ""
                tail = f"call {inner.name}{args}"
            elif isinstance(inner, Return):
                tail = "return"
            else:
                tail = "continue"
            w.put(indent, f"if ({expr_text(st.cond, 'f95')}) {tail}")
            return
        w.put(indent, f"if ({expr_text(st.cond, 'f95')}) then")
        _emit_body(st.then_body, w, indent + 2)
        node = st
        while len(node.else_body) == 1 and isinstance(node.else_body[0], IfThenElse):
            node = node.else_body[0]
            w.put(indent, f"else if ({expr_text(node.cond, 'f95')}) then")
            _emit_body(node.then_body, w, indent + 2)
        if node.else_body:
            w.put(indent, "else")
            _emit_body(node.else_body, w, indent + 2)
        w.put(indent, "end if")
    else:
        raise TypeError(f"cannot emit statement {type(st).__name__}")


def emit_f95(ast: ProgramAst) -> Dict[str, str]:
    """Render the refactored program: output file name -> free-form text."""
    by_file: Dict[str, List[SourceUnit]] = {}
    order: List[str] = []
    for u in ast.units:
        key = u.path
        if key not in by_file:
            by_file[key] = []
            order.append(key)
        by_file[key].append(u)

    out: Dict[str, str] = {}
    for path in order:
        w = _Writer()
        first = True
        for u in by_file[path]:
            if not first:
                w.put(0, "")
            first = False
            if u.module_name is not None:
                w.put(0, f"module {u.module_name}")
                w.put(0, "contains")
                emit_unit(u, w, 2)
                w.put(0, f"end module {u.module_name}")
            else:
                emit_unit(u, w, 0)
        out[_out_name(path)] = w.text()
    return out


def _out_name(path: str) -> str:
    stem = path.rsplit("/", 1)[-1]
    if "." in stem:
        stem = stem.rsplit(".", 1)[0]
    return f"{stem}.f95"
