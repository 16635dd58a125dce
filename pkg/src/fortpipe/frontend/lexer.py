"""Line-level readers turning source text into logical statements.

Fixed form: columns 1-5 hold an optional numeric label, column 6 a
continuation marker, columns 7-72 the statement text.  'c', 'C', '*' or '!'
in column 1 marks a comment line; '!' starts an inline comment anywhere.

Free form (used only to re-ingest refactored output): '&' continuations,
'!' comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional

from ..errors import ParseError


@dataclass(frozen=True)
class LogicalStmt:
    text: str
    line: int  # 1-based line of the first physical line
    label: Optional[int] = None


def _strip_inline_comment(code: str) -> str:
    # The subset has no character type, so '!' always starts a comment.
    pos = code.find("!")
    return code if pos < 0 else code[:pos]


def fixed_form_statements(text: str, path: str = "<input>") -> List[LogicalStmt]:
    out: List[LogicalStmt] = []
    cur: Optional[LogicalStmt] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.expandtabs(6).rstrip("\n")
        if not line.strip():
            continue
        if line[0] in "cC*!":
            continue
        line = _strip_inline_comment(line)
        if not line.strip():
            continue
        label_field = line[0:5]
        cont_field = line[5:6]
        code = line[6:72]
        if cont_field not in ("", " ", "0"):
            if cur is None:
                raise ParseError("continuation line without a statement", path, lineno, 6)
            if label_field.strip():
                raise ParseError("label on a continuation line", path, lineno, 1)
            cur = LogicalStmt(cur.text + " " + code.strip(), cur.line, cur.label)
            continue
        if cur is not None:
            out.append(cur)
            cur = None
        label: Optional[int] = None
        if label_field.strip():
            if not re.fullmatch(r"\d{1,5}", label_field.strip()):
                raise ParseError(f"malformed label field '{label_field.strip()}'", path, lineno, 1)
            label = int(label_field.strip())
        if not code.strip():
            if label is not None:
                raise ParseError("label on an empty statement", path, lineno, 1)
            continue
        cur = LogicalStmt(code.strip(), lineno, label)
    if cur is not None:
        out.append(cur)
    return out


def free_form_statements(text: str, path: str = "<input>") -> List[LogicalStmt]:
    out: List[LogicalStmt] = []
    pending: str = ""
    pending_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        code = _strip_inline_comment(raw).strip()
        if not code:
            continue
        if pending:
            code = code[1:].lstrip() if code.startswith("&") else code
            stmt_line = pending_line
            code = pending + " " + code
        else:
            stmt_line = lineno
        if code.endswith("&"):
            pending = code[:-1].rstrip()
            pending_line = stmt_line
            continue
        pending = ""
        for piece in code.split(";"):
            piece = piece.strip()
            if piece:
                out.append(LogicalStmt(piece, stmt_line, None))
    if pending:
        raise ParseError("dangling '&' continuation at end of file", path, pending_line, 1)
    return out


# --------------------------------------------------------------------------
# Tokenizer shared by both statement parsers

TOKEN_RE = re.compile(
    r"""
      (?P<dotop>\.(?:gt|ge|lt|le|eq|ne|and|or|not|true|false)\.)
    | (?P<real>(?:\d+\.\d*|\.\d+|\d+)[ed][+-]?\d+|\d+\.\d*|\.\d+)
    | (?P<int>\d+)
    | (?P<name>[a-z][a-z0-9_]*)
    | (?P<op>\*\*|::|=>|==|/=|<=|>=|[-+*/(),:=<>%])
    """,
    re.VERBOSE | re.IGNORECASE,
)

_DOTOP_MAP = {
    ".gt.": ">",
    ".ge.": ">=",
    ".lt.": "<",
    ".le.": "<=",
    ".eq.": "==",
    ".ne.": "/=",
    ".and.": "and",
    ".or.": "or",
    ".not.": "not",
    ".true.": "true",
    ".false.": "false",
}


@dataclass(frozen=True)
class Token:
    kind: str  # name | int | real | op
    text: str
    col: int


def tokenize(text: str, path: str, line: int) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character '{text[pos]}'", path, line, pos + 1)
        if m.lastgroup == "dotop":
            word = _DOTOP_MAP[m.group().lower()]
            kind = "op" if word not in ("true", "false") else "logical"
            tokens.append(Token(kind, word, pos + 1))
        elif m.lastgroup == "real":
            text_val = m.group().lower()
            if "d" in text_val:
                raise ParseError("double-precision literals are outside the subset", path, line, pos + 1)
            tokens.append(Token("real", text_val, pos + 1))
        elif m.lastgroup == "int":
            tokens.append(Token("int", m.group(), pos + 1))
        elif m.lastgroup == "name":
            tokens.append(Token("name", m.group().lower(), pos + 1))
        else:
            tokens.append(Token("op", m.group(), pos + 1))
        pos = m.end()
    return tokens
