"""Path-sensitive first-access dataflow over subset AST bodies.

Shared by intent inference (argument dataflow direction) and loop
classification (scalar privatization)."""

from __future__ import annotations

from typing import Dict, Optional, Set

from .nodes import (
    ArrayRef,
    Assignment,
    BinOp,
    Call,
    Continue,
    DoLoop,
    Expr,
    FuncCall,
    IfThenElse,
    Intent,
    IntrinsicCall,
    Return,
    ScalarRef,
    UnaryOp,
)


class Access:
    """First-access record per name: kind in {'r','w','rw'}, plus whether the
    access is known to happen on every control path reaching this point."""

    __slots__ = ("first", "definite")

    def __init__(self, first: str, definite: bool):
        self.first = first
        self.definite = definite

    def copy(self) -> "_Access":
        return Access(self.first, self.definite)

    def __eq__(self, other) -> bool:
        return (isinstance(other, _Access)
                and self.first == other.first and self.definite == other.definite)


_State = Dict[str, Access]


class FirstAccessAnalysis:
    """Path-sensitive first-access analysis over one unit body.

    Tracks, per name, the kind of the first access ('r', 'w', or 'rw' when
    paths disagree) plus whether an access occurs on every path, and the
    flat sets of names read/written anywhere.
    """

    def __init__(self, known: Optional[Dict[str, Dict[str, Intent]]] = None):
        self.known = known or {}
        self.state: _State = {}
        self.written: Set[str] = set()
        self.read: Set[str] = set()

    def touch(self, state: _State, name: str, kind: str) -> None:
        if kind in ("w", "rw"):
            self.written.add(name)
        if kind in ("r", "rw"):
            self.read.add(name)
        acc = state.get(name)
        if acc is None:
            state[name] = Access(kind, True)
        elif not acc.definite:
            # a path with no prior access now sees `kind` first
            acc.first = acc.first if acc.first == kind else "rw"
            acc.definite = True

    @staticmethod
    def merge(base: _State, s1: _State, s2: _State) -> None:
        base.clear()
        for name in set(s1) | set(s2):
            a1, a2 = s1.get(name), s2.get(name)
            if a1 is None:
                base[name] = Access(a2.first, False)
            elif a2 is None:
                base[name] = Access(a1.first, False)
            elif a1.first == a2.first:
                base[name] = Access(a1.first, a1.definite and a2.definite)
            else:
                base[name] = Access("rw", a1.definite and a2.definite)

    def expr(self, e: Expr, state: _State) -> None:
        if isinstance(e, ScalarRef):
            self.touch(state, e.name, "r")
        elif isinstance(e, ArrayRef):
            for ix in e.indices:
                self.expr(ix, state)
            self.touch(state, e.name, "r")
        elif isinstance(e, BinOp):
            self.expr(e.left, state)
            self.expr(e.right, state)
        elif isinstance(e, UnaryOp):
            self.expr(e.operand, state)
        elif isinstance(e, IntrinsicCall):
            for a in e.args:
                self.expr(a, state)
        elif isinstance(e, FuncCall):
            self.actuals(e.name, e.args, state)

    def actuals(self, callee: str, args, state: _State) -> None:
        callee_intents = self.known.get(callee, {})
        names = list(callee_intents)
        for pos, actual in enumerate(args):
            intent = callee_intents.get(names[pos]) if pos < len(names) else Intent.INOUT
            if isinstance(actual, (ScalarRef, ArrayRef)):
                if isinstance(actual, ArrayRef):
                    for ix in actual.indices:
                        self.expr(ix, state)
                if intent is Intent.IN:
                    self.touch(state, actual.name, "r")
                elif intent is Intent.OUT:
                    self.touch(state, actual.name, "w")
                else:
                    self.touch(state, actual.name, "rw")
            else:
                self.expr(actual, state)

    def body(self, stmts, state: _State) -> None:
        for st in stmts:
            if isinstance(st, Assignment):
                self.expr(st.value, state)
                if isinstance(st.target, ArrayRef):
                    for ix in st.target.indices:
                        self.expr(ix, state)
                self.touch(state, st.target.name, "w")
            elif isinstance(st, DoLoop):
                self.expr(st.lo, state)
                self.expr(st.hi, state)
                if st.step is not None:
                    self.expr(st.step, state)
                self.touch(state, st.var, "w")
                taken = {k: v.copy() for k, v in state.items()}
                self.body(st.body, taken)
                skipped = {k: v.copy() for k, v in state.items()}
                self.merge(state, taken, skipped)
            elif isinstance(st, IfThenElse):
                self.expr(st.cond, state)
                s1 = {k: v.copy() for k, v in state.items()}
                s2 = {k: v.copy() for k, v in state.items()}
                self.body(st.then_body, s1)
                self.body(st.else_body, s2)
                self.merge(state, s1, s2)
            elif isinstance(st, Call):
                self.actuals(st.name, st.args, state)
            elif isinstance(st, (Return, Continue)):
                pass

    def run(self, stmts) -> "FirstAccessAnalysis":
        self.body(stmts, self.state)
        return self


