"""Tokenizer shared by the .gsn, bindings, .trc and manifest readers."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .diagnostics import Diagnostic, SourceSpan, error

IDENT = "IDENT"
STRING = "STRING"
NUMBER = "NUMBER"
COMMENT = "COMMENT"
SYMBOL = "SYMBOL"
EOF = "EOF"

_SYMBOLS = ("::", "->", "..", ">=", "<=", ":", ",", "*", "{", "}", "(", ")", "[", "]", "=", "%")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<ident>[A-Za-z](?:[A-Za-z0-9_.]|-(?!>))*)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<string>")
  | (?P<symbol>::|->|\.\.|>=|<=|[:,*{}()\[\]=%])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    col: int
    end_line: int
    end_col: int

    def span(self, file: str) -> SourceSpan:
        return SourceSpan(file, self.line, self.col, self.end_line, self.end_col)

    def is_word(self, *words: str) -> bool:
        return self.kind == IDENT and self.value in words

    def is_symbol(self, *symbols: str) -> bool:
        return self.kind == SYMBOL and self.value in symbols

    def __str__(self) -> str:
        if self.kind == EOF:
            return "end of input"
        if self.kind == STRING:
            return "string literal"
        return repr(self.value)


def normalize_newlines(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


def unescape_string(body: str) -> str:
    """Resolve ``\\"`` and ``\\\\``; any other backslash pair is kept verbatim."""
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body) and body[i + 1] in '"\\':
            out.append(body[i + 1])
            i += 2
            continue
        out.append(ch)
        i += 1
    return "".join(out)


def quote(text: str) -> str:
    """Inverse of :func:`unescape_string`, producing the shortest literal."""
    if "\n" in text:
        raise ValueError("string literals cannot contain newlines")
    out = []
    for i, ch in enumerate(text):
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            nxt = text[i + 1] if i + 1 < len(text) else ""
            out.append("\\\\" if nxt in ('"', "\\", "") else "\\")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


def tokenize(text: str, file: str, code: str = "P001") -> tuple[list[Token], list[Diagnostic]]:
    """Split ``text`` into tokens.  Bad characters become ``code`` diagnostics."""
    text = normalize_newlines(text)
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    line, line_start, pos = 1, 0, 0
    n = len(text)
    while pos < n:
        col = pos - line_start + 1
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            bad = text[pos]
            diags.append(error(code, f"unexpected character {bad!r}", SourceSpan(file, line, col, line, col + 1)))
            pos += 1
            continue
        kind = m.lastgroup
        if kind == "ws":
            pos = m.end()
        elif kind == "nl":
            pos = m.end()
            line += 1
            line_start = pos
        elif kind == "string":
            end = pos + 1
            closed = False
            while end < n and text[end] != "\n":
                if text[end] == "\\" and end + 1 < n and text[end + 1] != "\n":
                    end += 2
                    continue
                if text[end] == '"':
                    closed = True
                    break
                end += 1
            body = text[pos + 1 : end]
            stop = end + 1 if closed else end
            tok = Token(STRING, unescape_string(body), line, col, line, stop - line_start + 1)
            if not closed:
                diags.append(error(code, "unterminated string literal", tok.span(file)))
            tokens.append(tok)
            pos = stop
        else:
            value = m.group()
            tk = {"comment": COMMENT, "ident": IDENT, "number": NUMBER, "symbol": SYMBOL}[kind]
            if tk == COMMENT:
                value = value[1:].strip()
            tokens.append(Token(tk, value, line, col, line, m.end() - line_start + 1))
            pos = m.end()
    col = pos - line_start + 1
    tokens.append(Token(EOF, "", line, col, line, col))
    return tokens, diags


class TokenStream:
    """Cursor over tokens that sets comments aside as it advances."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.pending: list[Token] = []

    def _skip_comments(self) -> None:
        while self.tokens[self.pos].kind == COMMENT:
            self.pending.append(self.tokens[self.pos])
            self.pos += 1

    def peek(self, offset: int = 0) -> Token:
        self._skip_comments()
        i = self.pos
        seen = 0
        while True:
            tok = self.tokens[i]
            if tok.kind == EOF:
                return tok
            if tok.kind != COMMENT:
                if seen == offset:
                    return tok
                seen += 1
            i += 1

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != EOF:
            self.pos += 1
        self.last = tok
        return tok

    def at_eof(self) -> bool:
        return self.peek().kind == EOF

    def take_comments(self, before_line: int | None = None) -> tuple[str, ...]:
        """Pop pending comments (optionally only those before ``before_line``)."""
        if before_line is None:
            taken, self.pending = self.pending, []
        else:
            taken = [c for c in self.pending if c.line < before_line]
            self.pending = [c for c in self.pending if c.line >= before_line]
        return tuple(c.value for c in taken)

    def take_trailing(self, line: int) -> str | None:
        """Pop a comment that sits on ``line`` after the last consumed token."""
        self._skip_comments()
        for c in self.pending:
            if c.line == line:
                self.pending.remove(c)
                return c.value
        return None
