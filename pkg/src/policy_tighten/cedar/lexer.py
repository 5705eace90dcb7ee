"""Tokenizer shared by the schema and policy grammars."""

from __future__ import annotations

import re
from dataclasses import dataclass

from policy_tighten.errors import ParseError

PUNCTUATION = (
    "::", "==", "!=", "<=", ">=", "&&", "||",
    "(", ")", "{", "}", "[", "]", ",", ";", ":", ".", "<", ">", "!", "?", "@", "-", "=",
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<newline>\n)
  | (?P<comment>//[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<int>[0-9]+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>""" + "|".join(re.escape(p) for p in PUNCTUATION) + r""")
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"', "'": "'", "0": "\0"}


@dataclass(frozen=True)
class Token:
    kind: str  # "IDENT", "INT", "STRING", "PUNCT", "EOF"
    value: str
    line: int
    column: int

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of input"
        if self.kind == "STRING":
            return f"string {self.value!r}"
        return f"'{self.value}'"


def _unescape(body: str, line: int, column: int, source: str | None) -> str:
    out: list[str] = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            nxt = body[i + 1]
            if nxt not in _ESCAPES:
                raise ParseError(f"unknown escape sequence '\\{nxt}'", line, column + i, source)
            out.append(_ESCAPES[nxt])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def tokenize(text: str, source: str | None = None) -> list[Token]:
    """Split text into tokens, dropping whitespace and `//` comments."""
    tokens: list[Token] = []
    line = 1
    line_start = 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        column = pos - line_start + 1
        if m is None:
            if text[pos] == '"':
                raise ParseError("unterminated string literal", line, column, source)
            raise ParseError(f"unexpected character {text[pos]!r}", line, column, source)
        kind = m.lastgroup
        value = m.group()
        if kind == "newline":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            tokens.append(Token("IDENT", value, line, column))
        elif kind == "int":
            tokens.append(Token("INT", value, line, column))
        elif kind == "string":
            tokens.append(Token("STRING", _unescape(value[1:-1], line, column, source), line, column))
        elif kind == "punct":
            tokens.append(Token("PUNCT", value, line, column))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


class TokenStream:
    """Cursor over a token list with the usual peek/match helpers."""

    def __init__(self, text: str, source: str | None = None) -> None:
        self.source = source
        self.tokens = tokenize(text, source)
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 0) -> Token:
        idx = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[idx]

    def at_eof(self) -> bool:
        return self.current.kind == "EOF"

    def advance(self) -> Token:
        tok = self.current
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def check(self, value: str, kind: str | None = None) -> bool:
        tok = self.current
        if kind is not None and tok.kind != kind:
            return False
        return tok.kind in ("PUNCT", "IDENT") and tok.value == value

    def accept(self, value: str) -> bool:
        if self.check(value):
            self.advance()
            return True
        return False

    def expect(self, value: str) -> Token:
        if not self.check(value):
            self.error(f"expected '{value}', found {self.current.describe()}")
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.current.kind != kind:
            self.error(f"expected {what}, found {self.current.describe()}")
        return self.advance()

    def expect_name(self, what: str = "identifier") -> str:
        """Identifier or quoted string (schema and action names allow both)."""
        if self.current.kind in ("IDENT", "STRING"):
            return self.advance().value
        self.error(f"expected {what}, found {self.current.describe()}")
        raise AssertionError("unreachable")

    def error(self, message: str, tok: Token | None = None) -> None:
        tok = tok or self.current
        raise ParseError(message, tok.line, tok.column, self.source)
