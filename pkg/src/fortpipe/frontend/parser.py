"""Statement and expression parser for the FORTRAN 77 subset.

Supported statements: PROGRAM/SUBROUTINE/FUNCTION headers, REAL/INTEGER/
LOGICAL/PARAMETER/DIMENSION/COMMON declarations, IMPLICIT NONE, assignments,
labeled and structured DO, block and logical IF, CALL, CONTINUE, RETURN.
Everything else in the language raises UnsupportedFeature.

Blanks are significant separators here: the classic fixed-form trick of
eliding blanks inside keywords and identifiers is outside the subset.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

from ..errors import ParseError, UnsupportedFeature
from .lexer import LogicalStmt, Token, fixed_form_statements, free_form_statements, tokenize
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
    Intent,
    IntrinsicCall,
    INTRINSICS,
    IfThenElse,
    Loc,
    ParameterDecl,
    Return,
    ScalarRef,
    SourceUnit,
    Stmt,
    TypeDecl,
    UnaryOp,
    UseDecl,
)

_UNSUPPORTED_HEADS = {
    "goto": "GOTO",
    "go": "GOTO",
    "stop": "STOP",
    "write": "WRITE",
    "print": "PRINT",
    "read": "READ",
    "format": "FORMAT",
    "data": "DATA",
    "save": "SAVE",
    "external": "EXTERNAL",
    "intrinsic": "INTRINSIC",
    "character": "CHARACTER",
    "equivalence": "EQUIVALENCE",
    "entry": "ENTRY",
    "block": "BLOCK DATA",
    "blockdata": "BLOCK DATA",
    "include": "INCLUDE",
    "open": "OPEN",
    "close": "CLOSE",
    "rewind": "REWIND",
    "backspace": "BACKSPACE",
    "pause": "PAUSE",
    "assign": "ASSIGN",
    "double": "DOUBLE PRECISION",
    "complex": "COMPLEX",
    "inquire": "INQUIRE",
    "namelist": "NAMELIST",
}

_TYPE_WORDS = {"real": FType.REAL, "integer": FType.INTEGER, "logical": FType.LOGICAL}


class _TokenStream:
    def __init__(self, tokens: Sequence[Token], path: str, line: int):
        self.toks = list(tokens)
        self.pos = 0
        self.path = path
        self.line = line

    def peek(self, ahead: int = 0) -> Optional[Token]:
        i = self.pos + ahead
        return self.toks[i] if i < len(self.toks) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of statement", self.path, self.line, 0)
        self.pos += 1
        return tok

    def accept(self, kind: str, text: Optional[str] = None) -> Optional[Token]:
        tok = self.peek()
        if tok is not None and tok.kind == kind and (text is None or tok.text == text):
            self.pos += 1
            return tok
        return None

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        tok = self.accept(kind, text)
        if tok is None:
            got = self.peek()
            want = text or kind
            have = got.text if got else "end of statement"
            raise ParseError(f"expected '{want}', found '{have}'", self.path, self.line,
                             got.col if got else 0)
        return tok

    def at_end(self) -> bool:
        return self.pos >= len(self.toks)

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        return ParseError(message, self.path, self.line, tok.col if tok else 0)


# --------------------------------------------------------------------------
# Expression parsing (precedence climbing)

_REL_OPS = {">", ">=", "<", "<=", "==", "/="}


class ExprParser:
    """Parses expressions; `arrays` decides name(...) between array and call."""

    def __init__(self, ts: _TokenStream, arrays: frozenset):
        self.ts = ts
        self.arrays = arrays

    def parse(self) -> Expr:
        return self._or()

    def _or(self) -> Expr:
        left = self._and()
        while self.ts.accept("op", "or"):
            left = BinOp("or", left, self._and())
        return left

    def _and(self) -> Expr:
        left = self._not()
        while self.ts.accept("op", "and"):
            left = BinOp("and", left, self._not())
        return left

    def _not(self) -> Expr:
        if self.ts.accept("op", "not"):
            return UnaryOp("not", self._not())
        return self._rel()

    def _rel(self) -> Expr:
        left = self._add()
        tok = self.ts.peek()
        if tok is not None and tok.kind == "op" and tok.text in _REL_OPS:
            self.ts.next()
            return BinOp(tok.text, left, self._add())
        return left

    def _add(self) -> Expr:
        tok = self.ts.peek()
        if tok is not None and tok.kind == "op" and tok.text in ("+", "-"):
            self.ts.next()
            operand = self._mul_after_unary()
            left: Expr = operand if tok.text == "+" else UnaryOp("-", operand)
        else:
            left = self._mul()
        while True:
            tok = self.ts.peek()
            if tok is None or tok.kind != "op" or tok.text not in ("+", "-"):
                return left
            self.ts.next()
            left = BinOp(tok.text, left, self._mul())

    def _mul_after_unary(self) -> Expr:
        # Unary minus binds looser than * and / but tighter than binary +-.
        return self._mul()

    def _mul(self) -> Expr:
        left = self._pow()
        while True:
            tok = self.ts.peek()
            if tok is None or tok.kind != "op" or tok.text not in ("*", "/"):
                return left
            self.ts.next()
            left = BinOp(tok.text, left, self._pow())

    def _pow(self) -> Expr:
        base = self._primary()
        if self.ts.accept("op", "**"):
            return BinOp("**", base, self._pow())  # right associative
        return base

    def _primary(self) -> Expr:
        tok = self.ts.peek()
        if tok is None:
            raise self.ts.error("expected an expression")
        if tok.kind == "int":
            self.ts.next()
            return Const(int(tok.text), FType.INTEGER)
        if tok.kind == "real":
            self.ts.next()
            return Const(float(tok.text), FType.REAL)
        if tok.kind == "logical":
            self.ts.next()
            return Const(tok.text == "true", FType.LOGICAL)
        if tok.kind == "op" and tok.text == "(":
            self.ts.next()
            inner = self.parse()
            self.ts.expect("op", ")")
            return inner
        if tok.kind == "op" and tok.text == "-":
            self.ts.next()
            return UnaryOp("-", self._primary())
        if tok.kind == "name":
            self.ts.next()
            name = tok.text
            if self.ts.accept("op", "("):
                args: List[Expr] = []
                if not self.ts.accept("op", ")"):
                    args.append(self.parse())
                    while self.ts.accept("op", ","):
                        args.append(self.parse())
                    self.ts.expect("op", ")")
                if name in self.arrays:
                    return ArrayRef(name, tuple(args))
                if name in INTRINSICS:
                    return IntrinsicCall(name, tuple(args))
                return FuncCall(name, tuple(args))
            return ScalarRef(name)
        raise self.ts.error(f"unexpected token '{tok.text}' in expression")


# --------------------------------------------------------------------------
# Structural parsing of whole files

class _IfFrame:
    __slots__ = ("cond", "branches", "else_body", "in_else", "loc")

    def __init__(self, cond: Expr, loc: Loc):
        self.branches: List[Tuple[Expr, List[Stmt]]] = [(cond, [])]
        self.else_body: List[Stmt] = []
        self.in_else = False
        self.loc = loc

    def current(self) -> List[Stmt]:
        return self.else_body if self.in_else else self.branches[-1][1]

    def build(self) -> IfThenElse:
        node: Tuple[Stmt, ...] = tuple(self.else_body)
        for cond, body in reversed(self.branches):
            node = (IfThenElse(cond, tuple(body), node, loc=self.loc),)
        return node[0]


class _DoFrame:
    __slots__ = ("var", "lo", "hi", "step", "term_label", "body", "loc")

    def __init__(self, var, lo, hi, step, term_label, loc):
        self.var = var
        self.lo = lo
        self.hi = hi
        self.step = step
        self.term_label = term_label
        self.body: List[Stmt] = []
        self.loc = loc

    def build(self) -> DoLoop:
        return DoLoop(self.var, self.lo, self.hi, self.step, tuple(self.body),
                      term_label=self.term_label, loc=self.loc)


class _UnitFrame:
    def __init__(self, kind: str, name: str, args: Tuple[str, ...],
                 result_type: Optional[FType], loc: Loc, path: str):
        self.kind = kind
        self.name = name
        self.args = args
        self.result_type = result_type
        self.loc = loc
        self.path = path
        self.decls: List[Decl] = []
        self.body: List[Stmt] = []
        self.blocks: List[object] = []  # _IfFrame / _DoFrame stack
        self.seen_exec = False
        self.arrays: set = set()
        self.module_name: Optional[str] = None

    def sink(self) -> List[Stmt]:
        if not self.blocks:
            return self.body
        top = self.blocks[-1]
        return top.current() if isinstance(top, _IfFrame) else top.body

    def append(self, st: Stmt) -> None:
        self.sink().append(st)

    def close_labeled_dos(self, label: int, path: str, line: int) -> bool:
        """Close every innermost-consecutive labeled DO waiting for `label`."""
        matched = False
        while self.blocks and isinstance(self.blocks[-1], _DoFrame) \
                and self.blocks[-1].term_label == label:
            frame = self.blocks.pop()
            self.sink().append(frame.build())
            matched = True
        if matched:
            for blk in self.blocks:
                if isinstance(blk, _DoFrame) and blk.term_label == label:
                    raise ParseError(
                        f"label {label} terminates non-adjacent nested loops", path, line, 1
                    )
        return matched

    def build(self) -> SourceUnit:
        by_arg = {}
        for d in self.decls:
            if isinstance(d, TypeDecl) and d.intent is not None:
                for ent in d.entities:
                    if ent.name in self.args:
                        by_arg[ent.name] = d.intent
        intents = tuple((a, by_arg[a]) for a in self.args if a in by_arg)
        return SourceUnit(
            kind=self.kind,
            name=self.name,
            args=self.args,
            decls=tuple(self.decls),
            body=tuple(self.body),
            result_type=self.result_type,
            module_name=self.module_name,
            intents=intents,
            path=self.path,
            loc=self.loc,
        )


class Parser:
    def __init__(self, path: str = "<input>", free_form: bool = False):
        self.path = path
        self.free_form = free_form
        self.units: List[SourceUnit] = []
        self.unit: Optional[_UnitFrame] = None
        self._module_ctx: Optional[str] = None
        self._pending_intents: dict = {}

    # -- entry point --------------------------------------------------------

    def parse(self, text: str) -> List[SourceUnit]:
        stmts = (free_form_statements if self.free_form else fixed_form_statements)(text, self.path)
        for ls in stmts:
            self._statement(ls)
        if self.unit is not None:
            raise ParseError(f"unit '{self.unit.name}' not terminated by END",
                             self.path, self.unit.loc.line, 1)
        if self._module_ctx is not None:
            raise ParseError("module not terminated by END MODULE", self.path, 0, 1)
        return self.units

    # -- statement dispatch --------------------------------------------------

    def _statement(self, ls: LogicalStmt) -> None:
        ts = _TokenStream(tokenize(ls.text, self.path, ls.line), self.path, ls.line)
        head = ts.peek()
        if head is None:
            return
        loc = Loc(self.path, ls.line, head.col)

        if head.kind == "name":
            word = head.text
            if word in _UNSUPPORTED_HEADS:
                nxt = ts.peek(1)
                # a bare `name = ...` is an assignment to an unlucky variable
                if nxt is None or nxt.kind != "op" or nxt.text != "=":
                    raise UnsupportedFeature(_UNSUPPORTED_HEADS[word], self.path,
                                             ls.line, head.col)
            handler = getattr(self, f"_kw_{word}", None)
            if handler is not None and self._is_keyword_position(ts, word):
                handler(ts, ls, loc)
                return
        self._assignment(ts, ls, loc)

    @staticmethod
    def _is_keyword_position(ts: _TokenStream, word: str) -> bool:
        """A head word is a keyword unless it is immediately used as a variable."""
        nxt = ts.peek(1)
        if nxt is None:
            return True
        if nxt.kind == "op" and nxt.text in ("=", "("):
            # `if (` is a keyword use; `do 10 j = ...` handled by _kw_do itself;
            # `real(...)` would be a declaration with dims -> also keyword.
            if word in ("if",):
                return nxt.text == "("
            if word in ("call", "do", "end", "else", "elseif", "endif", "enddo",
                        "use", "contains", "module", "implicit", "parameter"):
                return nxt.text != "="
            return nxt.text != "=" and nxt.text != "("
        return True

    # -- unit headers and ends ------------------------------------------------

    def _require_unit(self, loc: Loc) -> _UnitFrame:
        if self.unit is None:
            raise ParseError("statement outside any program unit", self.path, loc.line, loc.col)
        return self.unit

    def _open_unit(self, kind: str, name: str, args: Tuple[str, ...],
                   result_type: Optional[FType], loc: Loc) -> None:
        if self.unit is not None:
            raise ParseError(
                f"'{kind} {name}' begins before unit '{self.unit.name}' ends",
                self.path, loc.line, loc.col,
            )
        self.unit = _UnitFrame(kind, name, args, result_type, loc, self.path)
        self.unit.module_name = self._module_ctx

    def _parse_arg_list(self, ts: _TokenStream) -> Tuple[str, ...]:
        args: List[str] = []
        if ts.accept("op", "("):
            if not ts.accept("op", ")"):
                while True:
                    args.append(ts.expect("name").text)
                    if ts.accept("op", ")"):
                        break
                    ts.expect("op", ",")
        if not ts.at_end():
            raise ts.error("trailing tokens after argument list")
        return tuple(args)

    def _kw_program(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        ts.next()
        name = ts.expect("name").text
        if not ts.at_end():
            raise ts.error("trailing tokens after PROGRAM name")
        self._open_unit("program", name, (), None, loc)

    def _kw_subroutine(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        ts.next()
        name = ts.expect("name").text
        self._open_unit("subroutine", name, self._parse_arg_list(ts), None, loc)

    def _kw_function(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        ts.next()
        name = ts.expect("name").text
        self._open_unit("function", name, self._parse_arg_list(ts), None, loc)

    def _typed_function(self, ts: _TokenStream, ftype: FType, loc: Loc) -> None:
        ts.next()  # 'function'
        name = ts.expect("name").text
        self._open_unit("function", name, self._parse_arg_list(ts), ftype, loc)

    def _kw_end(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        ts.next()
        what = ts.peek()
        if what is not None and what.kind == "name":
            word = what.text
            if word == "do":
                self._end_do(ls, loc)
                return
            if word == "if":
                self._end_if(ls, loc)
                return
            if word == "module":
                if self._module_ctx is None:
                    raise ParseError("END MODULE outside a module", self.path, ls.line, loc.col)
                self._module_ctx = None
                return
            if word not in ("program", "subroutine", "function"):
                raise ParseError(f"unexpected END {word.upper()}", self.path, ls.line, loc.col)
        unit = self._require_unit(loc)
        if unit.blocks:
            raise ParseError(
                f"unit '{unit.name}' ends with an unterminated block", self.path, ls.line, loc.col
            )
        self.units.append(unit.build())
        self.unit = None

    def _kw_enddo(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        self._end_do(ls, loc)

    def _kw_endif(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        self._end_if(ls, loc)

    def _end_do(self, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        if not unit.blocks or not isinstance(unit.blocks[-1], _DoFrame):
            raise ParseError("END DO without a DO", self.path, ls.line, loc.col)
        frame = unit.blocks.pop()
        if frame.term_label is not None:
            raise ParseError("labeled DO terminated by END DO", self.path, ls.line, loc.col)
        unit.sink().append(frame.build())

    def _end_if(self, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        if not unit.blocks or not isinstance(unit.blocks[-1], _IfFrame):
            raise ParseError("END IF without an IF", self.path, ls.line, loc.col)
        frame = unit.blocks.pop()
        unit.sink().append(frame.build())

    # -- module scaffolding (free-form reader only) ---------------------------

    def _kw_module(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        if not self.free_form:
            raise UnsupportedFeature("MODULE", self.path, ls.line, loc.col)
        ts.next()
        self._module_ctx = ts.expect("name").text

    def _kw_contains(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        if not self.free_form:
            raise UnsupportedFeature("CONTAINS", self.path, ls.line, loc.col)

    def _kw_use(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        if not self.free_form:
            raise UnsupportedFeature("USE", self.path, ls.line, loc.col)
        unit = self._require_unit(loc)
        ts.next()
        module = ts.expect("name").text
        only: List[str] = []
        if ts.accept("op", ","):
            kw = ts.expect("name")
            if kw.text != "only":
                raise ts.error("only ONLY lists are supported on USE")
            ts.expect("op", ":")
            only.append(ts.expect("name").text)
            while ts.accept("op", ","):
                only.append(ts.expect("name").text)
        unit.decls.append(UseDecl(module, tuple(only), loc=loc))

    # -- declarations ----------------------------------------------------------

    def _kw_implicit(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        ts.next()
        what = ts.expect("name")
        if what.text != "none":
            raise UnsupportedFeature("IMPLICIT (other than IMPLICIT NONE)",
                                     self.path, ls.line, loc.col)
        self._decl_guard(unit, ls, loc)
        unit.decls.append(ImplicitNone(loc=loc))

    def _decl_guard(self, unit: _UnitFrame, ls: LogicalStmt, loc: Loc) -> None:
        if unit.seen_exec:
            raise ParseError("declaration after the first executable statement",
                             self.path, ls.line, loc.col)

    def _kw_parameter(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        self._decl_guard(unit, ls, loc)
        ts.next()
        ts.expect("op", "(")
        names: List[str] = []
        values: List[Expr] = []
        ep = ExprParser(ts, frozenset())
        while True:
            names.append(ts.expect("name").text)
            ts.expect("op", "=")
            values.append(ep.parse())
            if ts.accept("op", ")"):
                break
            ts.expect("op", ",")
        unit.decls.append(ParameterDecl(tuple(names), tuple(values), loc=loc))

    def _parse_dims(self, ts: _TokenStream) -> Tuple[Tuple[Optional[Expr], Expr], ...]:
        dims: List[Tuple[Optional[Expr], Expr]] = []
        ep = ExprParser(ts, frozenset())
        while True:
            first = ep.parse()
            if ts.accept("op", ":"):
                dims.append((first, ep.parse()))
            else:
                dims.append((None, first))
            if ts.accept("op", ")"):
                break
            ts.expect("op", ",")
        return tuple(dims)

    def _parse_entities(self, ts: _TokenStream, unit: _UnitFrame) -> Tuple[Entity, ...]:
        entities: List[Entity] = []
        while True:
            name = ts.expect("name").text
            dims = None
            if ts.accept("op", "("):
                dims = self._parse_dims(ts)
                unit.arrays.add(name)
            entities.append(Entity(name, dims))
            if ts.at_end():
                break
            if not ts.accept("op", ","):
                raise ts.error("expected ',' in declaration list")
        return tuple(entities)

    def _type_decl(self, ts: _TokenStream, ftype: FType, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        self._decl_guard(unit, ls, loc)
        ts.next()  # the type word
        intent: Optional[Intent] = None
        if self.free_form:
            # restricted F95 shape: real, intent(in) :: a(...), b
            while ts.accept("op", ","):
                attr = ts.expect("name")
                if attr.text != "intent":
                    raise UnsupportedFeature(f"attribute {attr.text.upper()}",
                                             self.path, ls.line, attr.col)
                ts.expect("op", "(")
                word = ts.expect("name").text
                if word == "in" and ts.accept("name", "out"):
                    word = "inout"
                intent = Intent(word)
                ts.expect("op", ")")
            ts.accept("op", "::")
        if ts.at_end():
            raise ts.error("empty type declaration")
        unit.decls.append(TypeDecl(ftype, self._parse_entities(ts, unit), intent=intent, loc=loc))

    def _kw_real(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        if (nxt := ts.peek(1)) is not None and nxt.kind == "name" and nxt.text == "function":
            self._typed_function_header(ts, FType.REAL, loc)
            return
        self._type_decl(ts, FType.REAL, ls, loc)

    def _kw_integer(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        if (nxt := ts.peek(1)) is not None and nxt.kind == "name" and nxt.text == "function":
            self._typed_function_header(ts, FType.INTEGER, loc)
            return
        self._type_decl(ts, FType.INTEGER, ls, loc)

    def _kw_logical(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        if (nxt := ts.peek(1)) is not None and nxt.kind == "name" and nxt.text == "function":
            self._typed_function_header(ts, FType.LOGICAL, loc)
            return
        self._type_decl(ts, FType.LOGICAL, ls, loc)

    def _typed_function_header(self, ts: _TokenStream, ftype: FType, loc: Loc) -> None:
        ts.next()  # type word
        self._typed_function(ts, ftype, loc)

    def _kw_dimension(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        self._decl_guard(unit, ls, loc)
        ts.next()
        unit.decls.append(DimensionDecl(self._parse_entities(ts, unit), loc=loc))

    def _kw_common(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        self._decl_guard(unit, ls, loc)
        ts.next()
        while not ts.at_end():
            block = ""
            if ts.accept("op", "/"):
                block = ts.expect("name").text
                ts.expect("op", "/")
            entities: List[Entity] = []
            while True:
                name = ts.expect("name").text
                dims = None
                if ts.accept("op", "("):
                    dims = self._parse_dims(ts)
                    unit.arrays.add(name)
                entities.append(Entity(name, dims))
                nxt = ts.peek()
                if nxt is None:
                    break
                ts.expect("op", ",")
                nxt = ts.peek()
                if nxt is not None and nxt.kind == "op" and nxt.text == "/":
                    break
            unit.decls.append(CommonDecl(block, tuple(entities), loc=loc))

    # -- executable statements --------------------------------------------------

    def _mark_exec(self, unit: _UnitFrame) -> None:
        unit.seen_exec = True

    def _kw_do(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        self._mark_exec(unit)
        ts.next()
        term_label: Optional[int] = None
        tok = ts.peek()
        if tok is not None and tok.kind == "int":
            term_label = int(ts.next().text)
        var = ts.expect("name").text
        ts.expect("op", "=")
        ep = ExprParser(ts, frozenset(unit.arrays))
        lo = ep.parse()
        ts.expect("op", ",")
        hi = ep.parse()
        step = None
        if ts.accept("op", ","):
            step = ep.parse()
        if not ts.at_end():
            raise ts.error("trailing tokens after DO bounds")
        unit.blocks.append(_DoFrame(var, lo, hi, step, term_label, loc))

    def _kw_if(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        self._mark_exec(unit)
        ts.next()
        ts.expect("op", "(")
        ep = ExprParser(ts, frozenset(unit.arrays))
        cond = ep.parse()
        ts.expect("op", ")")
        nxt = ts.peek()
        if nxt is not None and nxt.kind == "name" and nxt.text == "then" and ts.peek(1) is None:
            unit.blocks.append(_IfFrame(cond, loc))
            return
        # logical IF: one simple trailing statement
        st = self._simple_statement(ts, ls, loc, label=None)
        unit.append(IfThenElse(cond, (st,), (), label=ls.label, loc=loc))
        self._maybe_close_label(unit, ls, is_continue=False)

    def _kw_elseif(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        ts.next()
        self._else_if_tail(ts, ls, loc)

    def _kw_else(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        ts.next()
        if (nxt := ts.peek()) is not None and nxt.kind == "name" and nxt.text == "if":
            ts.next()
            self._else_if_tail(ts, ls, loc)
            return
        if not ts.at_end():
            raise ts.error("trailing tokens after ELSE")
        if not unit.blocks or not isinstance(unit.blocks[-1], _IfFrame):
            raise ParseError("ELSE without an IF", self.path, ls.line, loc.col)
        frame = unit.blocks[-1]
        if frame.in_else:
            raise ParseError("duplicate ELSE", self.path, ls.line, loc.col)
        frame.in_else = True

    def _else_if_tail(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        if not unit.blocks or not isinstance(unit.blocks[-1], _IfFrame):
            raise ParseError("ELSE IF without an IF", self.path, ls.line, loc.col)
        frame = unit.blocks[-1]
        if frame.in_else:
            raise ParseError("ELSE IF after ELSE", self.path, ls.line, loc.col)
        ts.expect("op", "(")
        cond = ExprParser(ts, frozenset(unit.arrays)).parse()
        ts.expect("op", ")")
        then_tok = ts.expect("name")
        if then_tok.text != "then" or not ts.at_end():
            raise ts.error("ELSE IF must end with THEN")
        frame.branches.append((cond, []))

    def _kw_call(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        self._mark_exec(unit)
        st = self._parse_call(ts, loc, label=ls.label)
        unit.append(st)
        self._maybe_close_label(unit, ls, is_continue=False)

    def _parse_call(self, ts: _TokenStream, loc: Loc, label: Optional[int]) -> Call:
        ts.expect("name", "call")
        name = ts.expect("name").text
        args: List[Expr] = []
        unit = self._require_unit(loc)
        if ts.accept("op", "("):
            if not ts.accept("op", ")"):
                ep = ExprParser(ts, frozenset(unit.arrays))
                args.append(ep.parse())
                while ts.accept("op", ","):
                    args.append(ep.parse())
                ts.expect("op", ")")
        if not ts.at_end():
            raise ts.error("trailing tokens after CALL")
        return Call(name, tuple(args), label=label, loc=loc)

    def _kw_return(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        self._mark_exec(unit)
        ts.next()
        if not ts.at_end():
            raise ts.error("trailing tokens after RETURN")
        unit.append(Return(label=ls.label, loc=loc))
        self._maybe_close_label(unit, ls, is_continue=False)

    def _kw_continue(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        self._mark_exec(unit)
        ts.next()
        if not ts.at_end():
            raise ts.error("trailing tokens after CONTINUE")
        if ls.label is not None and unit.blocks \
                and isinstance(unit.blocks[-1], _DoFrame) \
                and unit.blocks[-1].term_label == ls.label:
            unit.close_labeled_dos(ls.label, self.path, ls.line)
            return
        if ls.label is not None:
            for blk in unit.blocks:
                if isinstance(blk, _DoFrame) and blk.term_label == ls.label:
                    raise ParseError(
                        f"label {ls.label} terminates improperly nested loops",
                        self.path, ls.line, 1,
                    )
        unit.append(Continue(label=ls.label, loc=loc))

    def _maybe_close_label(self, unit: _UnitFrame, ls: LogicalStmt, is_continue: bool) -> None:
        if ls.label is None:
            return
        for blk in unit.blocks:
            if isinstance(blk, _DoFrame) and blk.term_label == ls.label:
                raise ParseError(
                    "labeled DO must terminate on a CONTINUE statement",
                    self.path, ls.line, 1,
                )

    def _simple_statement(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc,
                          label: Optional[int]) -> Stmt:
        tok = ts.peek()
        if tok is None:
            raise ts.error("expected a statement after logical IF")
        if tok.kind == "name":
            if tok.text in _UNSUPPORTED_HEADS:
                raise UnsupportedFeature(_UNSUPPORTED_HEADS[tok.text], self.path, ls.line, tok.col)
            if tok.text == "call":
                return self._parse_call(ts, loc, label)
            if tok.text == "return" and ts.peek(1) is None:
                ts.next()
                return Return(label=label, loc=loc)
            if tok.text == "continue" and ts.peek(1) is None:
                ts.next()
                return Continue(label=label, loc=loc)
        return self._parse_assignment(ts, loc, label)

    def _assignment(self, ts: _TokenStream, ls: LogicalStmt, loc: Loc) -> None:
        unit = self._require_unit(loc)
        self._mark_exec(unit)
        st = self._parse_assignment(ts, loc, ls.label)
        unit.append(st)
        self._maybe_close_label(unit, ls, is_continue=False)

    def _parse_assignment(self, ts: _TokenStream, loc: Loc, label: Optional[int]) -> Assignment:
        unit = self._require_unit(loc)
        name_tok = ts.expect("name")
        name = name_tok.text
        target: object
        if ts.accept("op", "("):
            if name not in unit.arrays:
                raise ParseError(
                    f"'{name}' is indexed but not declared as an array "
                    "(statement functions are outside the subset)",
                    self.path, loc.line, name_tok.col,
                )
            ep = ExprParser(ts, frozenset(unit.arrays))
            indices = [ep.parse()]
            while ts.accept("op", ","):
                indices.append(ep.parse())
            ts.expect("op", ")")
            target = ArrayRef(name, tuple(indices))
        else:
            target = ScalarRef(name)
        ts.expect("op", "=")
        value = ExprParser(ts, frozenset(unit.arrays)).parse()
        if not ts.at_end():
            raise ts.error("trailing tokens after assignment")
        return Assignment(target, value, label=label, loc=loc)


def parse_source(text: str, path: str = "<input>") -> List[SourceUnit]:
    """Parse fixed-form source text into program units."""
    return Parser(path, free_form=False).parse(text)


def parse_free_source(text: str, path: str = "<input>") -> List[SourceUnit]:
    """Re-ingest refactored free-form output (restricted F95 shape)."""
    return Parser(path, free_form=True).parse(text)
