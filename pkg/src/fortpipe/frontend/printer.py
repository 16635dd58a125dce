"""Deterministic pretty-printers: fixed-form F77 and shared expression text.

The fixed-form printer supports the round-trip contract:
parse(print(parse(text))) equals parse(text) up to source locations, so
expression printing is parenthesized to preserve tree shape exactly.
"""

from __future__ import annotations

from typing import List, Optional

from .nodes import (
    ArrayRef,
    Assignment,
    BinOp,
    Call,
    CommonDecl,
    Const,
    Continue,
    Decl,
    DimensionDecl,
    DoLoop,
    Entity,
    Expr,
    FType,
    FuncCall,
    ImplicitNone,
    IntrinsicCall,
    IfThenElse,
    ParameterDecl,
    Return,
    ScalarRef,
    SourceUnit,
    Stmt,
    TypeDecl,
    UnaryOp,
    UseDecl,
)

_PREC = {
    "or": 1,
    "and": 2,
    "==": 4, "/=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6,
    "**": 7,
}

_F77_OPS = {
    "==": ".eq.", "/=": ".ne.", "<": ".lt.", "<=": ".le.", ">": ".gt.", ">=": ".ge.",
    "and": ".and.", "or": ".or.",
}


def _const_text(c: Const) -> str:
    if c.ftype is FType.LOGICAL:
        return ".true." if c.value else ".false."
    if c.ftype is FType.INTEGER:
        return str(int(c.value))
    return repr(float(c.value))


def expr_text(e: Expr, style: str = "f77") -> str:
    """Render an expression; `style` picks f77 dotted or f95 symbolic operators."""
    return _expr(e, 0, style)


def _op_text(op: str, style: str) -> str:
    if style == "f77" and op in _F77_OPS:
        return _F77_OPS[op]
    if op in ("and", "or"):
        return f".{op}."
    return op


def _expr(e: Expr, parent_prec: int, style: str, right_of_same: bool = False) -> str:
    if isinstance(e, Const):
        return _const_text(e)
    if isinstance(e, ScalarRef):
        return e.name
    if isinstance(e, ArrayRef):
        return f"{e.name}({', '.join(_expr(i, 0, style) for i in e.indices)})"
    if isinstance(e, (IntrinsicCall, FuncCall)):
        return f"{e.name}({', '.join(_expr(a, 0, style) for a in e.args)})"
    if isinstance(e, UnaryOp):
        if e.op == "not":
            inner = _expr(e.operand, 3, style)
            if _prec_of(e.operand) < 3:
                inner = f"({inner})"
            text = f".not. {inner}"
            return f"({text})" if parent_prec > 3 else text
        inner = _expr(e.operand, 5, style)
        if _prec_of(e.operand) < 5:
            inner = f"({inner})"
        text = f"-{inner}"
        return f"({text})" if parent_prec > 5 or right_of_same else text
    if isinstance(e, BinOp):
        prec = _PREC[e.op]
        left = _expr(e.left, prec, style, right_of_same=(e.op == "**"))
        right = _expr(e.right, prec, style, right_of_same=(e.op != "**"))
        sep = _op_text(e.op, style)
        text = f"{left}{sep}{right}" if e.op == "**" else f"{left} {sep} {right}"
        if prec < parent_prec or (prec == parent_prec and right_of_same):
            return f"({text})"
        return text
    raise TypeError(f"cannot print {type(e).__name__}")


def _prec_of(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, UnaryOp):
        return 3 if e.op == "not" else 5
    return 9


def _entity_text(ent: Entity, style: str) -> str:
    if ent.dims is None:
        return ent.name
    dims = []
    for lo, hi in ent.dims:
        if lo is None:
            dims.append(_compact(_expr(hi, 0, style)))
        else:
            dims.append(f"{_compact(_expr(lo, 0, style))}:{_compact(_expr(hi, 0, style))}")
    return f"{ent.name}({','.join(dims)})"


def _compact(text: str) -> str:
    return text.replace(" ", "")


def decl_text(d: Decl, style: str = "f77") -> str:
    if isinstance(d, ImplicitNone):
        return "implicit none"
    if isinstance(d, ParameterDecl):
        items = ", ".join(f"{n} = {_expr(v, 0, style)}" for n, v in zip(d.names, d.values))
        return f"parameter ({items})"
    if isinstance(d, TypeDecl):
        ents = ", ".join(_entity_text(x, style) for x in d.entities)
        if style == "f95":
            attr = f", intent({d.intent})" if d.intent is not None else ""
            return f"{d.ftype}{attr} :: {ents}"
        return f"{d.ftype} {ents}"
    if isinstance(d, DimensionDecl):
        return "dimension " + ", ".join(_entity_text(x, style) for x in d.entities)
    if isinstance(d, CommonDecl):
        ents = ", ".join(_entity_text(x, style) for x in d.entities)
        blk = f"/{d.block}/ " if d.block else ""
        return f"common {blk}{ents}"
    if isinstance(d, UseDecl):
        only = f", only: {', '.join(d.only)}" if d.only else ""
        return f"use {d.module}{only}"
    raise TypeError(f"cannot print declaration {type(d).__name__}")


_ONE_LINER = (Assignment, Call, Return, Continue)


class FixedFormPrinter:
    """Prints units back to fixed-form text, wrapping at column 72."""

    def __init__(self) -> None:
        self.lines: List[str] = []

    def print_units(self, units) -> str:
        self.lines = []
        for i, unit in enumerate(units):
            if i:
                self.lines.append("")
            self._unit(unit)
        return "\n".join(self.lines) + "\n"

    def _emit(self, text: str, label: Optional[int] = None, indent: int = 0) -> None:
        label_field = f"{label:>5d}" if label is not None else "     "
        body = " " * indent + text
        room = 72 - 6
        if len(body) <= room:
            self.lines.append(f"{label_field} {body}".rstrip())
            return
        # wrap on spaces; continuation marker '+' in column 6
        words = body.split(" ")
        cur = ""
        first = True
        for word in words:
            candidate = word if not cur else f"{cur} {word}"
            if len(candidate) > room and cur:
                self.lines.append((f"{label_field} {cur}" if first else f"     +{cur}").rstrip())
                first = False
                cur = "  " + word
            else:
                cur = candidate
        if cur:
            self.lines.append((f"{label_field} {cur}" if first else f"     +{cur}").rstrip())

    def _unit(self, unit: SourceUnit) -> None:
        if unit.kind == "program":
            self._emit(f"program {unit.name}")
        elif unit.kind == "subroutine":
            args = f"({', '.join(unit.args)})" if unit.args else ""
            self._emit(f"subroutine {unit.name}{args}")
        else:
            prefix = f"{unit.result_type} " if unit.result_type is not None else ""
            self._emit(f"{prefix}function {unit.name}({', '.join(unit.args)})")
        for d in unit.decls:
            self._emit(decl_text(d, "f77"))
        self._body(unit.body, 0)
        self._emit("end")

    def _body(self, body, indent: int) -> None:
        for st in body:
            self._stmt(st, indent)

    def _stmt(self, st: Stmt, indent: int) -> None:
        if isinstance(st, Assignment):
            self._emit(f"{expr_text(st.target)} = {expr_text(st.value)}", st.label, indent)
        elif isinstance(st, Call):
            args = f"({', '.join(expr_text(a) for a in st.args)})" if st.args else ""
            self._emit(f"call {st.name}{args}", st.label, indent)
        elif isinstance(st, Return):
            self._emit("return", st.label, indent)
        elif isinstance(st, Continue):
            self._emit("continue", st.label, indent)
        elif isinstance(st, DoLoop):
            if st.term_label is not None:
                # directly nested loops sharing the terminal label print one
                # CONTINUE, matching how the parser closes them
                chain = [st]
                cur = st
                while (len(cur.body) == 1 and isinstance(cur.body[0], DoLoop)
                       and cur.body[0].term_label == st.term_label):
                    cur = cur.body[0]
                    chain.append(cur)
                for depth, loop in enumerate(chain):
                    head = (f"do {loop.term_label} {loop.var} = "
                            f"{expr_text(loop.lo)}, {expr_text(loop.hi)}")
                    if loop.step is not None:
                        head += f", {expr_text(loop.step)}"
                    self._emit(head, loop.label if depth == 0 else None,
                               indent + 2 * depth)
                self._body(chain[-1].body, indent + 2 * len(chain))
                self._emit("continue", st.term_label, indent)
                return
            head = f"do {st.var} = {expr_text(st.lo)}, {expr_text(st.hi)}"
            if st.step is not None:
                head += f", {expr_text(st.step)}"
            self._emit(head, st.label, indent)
            self._body(st.body, indent + 2)
            self._emit("end do", None, indent)
        elif isinstance(st, IfThenElse):
            if (len(st.then_body) == 1 and not st.else_body
                    and isinstance(st.then_body[0], _ONE_LINER)
                    and st.then_body[0].label is None):
                inner = st.then_body[0]
                if isinstance(inner, Assignment):
                    tail = f"{expr_text(inner.target)} = {expr_text(inner.value)}"
                elif isinstance(inner, Call):
                    args = f"({', '.join(expr_text(a) for a in inner.args)})" if inner.args else ""
                    tail = f"call {inner.name}{args}"
                elif isinstance(inner, Return):
                    tail = "return"
                else:
                    tail = "continue"
                self._emit(f"if ({expr_text(st.cond)}) {tail}", st.label, indent)
                return
            self._emit(f"if ({expr_text(st.cond)}) then", st.label, indent)
            self._body(st.then_body, indent + 2)
            node = st
            while (len(node.else_body) == 1 and isinstance(node.else_body[0], IfThenElse)
                   and node.else_body[0].label is None):
                node = node.else_body[0]
                self._emit(f"else if ({expr_text(node.cond)}) then", None, indent)
                self._body(node.then_body, indent + 2)
            if node.else_body:
                self._emit("else", None, indent)
                self._body(node.else_body, indent + 2)
            self._emit("end if", None, indent)
        else:
            raise TypeError(f"cannot print statement {type(st).__name__}")


def print_fixed(units) -> str:
    """Render program units as fixed-form FORTRAN 77 text."""
    return FixedFormPrinter().print_units(units)
