"""Tokenizer for the supported Sail subset.

Comments and string literals become single tokens; concatenating the text of
all tokens plus the skipped whitespace reproduces the input byte for byte.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import UnterminatedComment, UnterminatedStringLiteral

KEYWORDS = frozenset({
    "function", "clause", "register", "bitfield", "mapping", "val", "let",
    "if", "then", "else", "match", "enum", "union", "struct", "type",
    "scattered", "end", "overload", "forall", "foreach", "return",
    "true", "false",
})

# Longest operators first so the regex picks maximal munch.
_OPERATORS = [
    "<->", "<=", ">=", "==", "!=", "->", "=>", "<<", ">>", "&&", "||", "..",
    "=", "<", ">", "+", "-", "*", "/", "&", "|", "^", "@", "~", "!",
]

_TOKEN_RE = re.compile(
    r"""(?P<string>"(?:[^"\\\n]|\\.)*")
      | (?P<hex>0x[0-9a-fA-F_]+)
      | (?P<bin>0b[01_]+)
      | (?P<num>\d+)
      | (?P<ident>'?[A-Za-z_][A-Za-z0-9_']*)
      | (?P<op>%s)
      | (?P<punct>[()\[\]{},;:.$\#?`])
    """ % "|".join(re.escape(op) for op in _OPERATORS),
    re.VERBOSE,
)

_WS_RE = re.compile(r"[ \t\r\n]+")

COMPARISON_OPS = frozenset({"==", "!=", "<", "<=", ">", ">="})


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | identifier | operator | literal | comment | punctuation
    text: str
    path: str
    line: int
    col: int
    offset: int

    @property
    def location(self) -> tuple[str, int, int]:
        return (self.path, self.line, self.col)

    def __repr__(self) -> str:  # compact, for test failure output
        return f"Token({self.kind} {self.text!r} @{self.line}:{self.col})"


def tokenize(text: str, path: str = "<string>") -> list[Token]:
    """Tokenize Sail source. Raises on unterminated comments or strings."""
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    n = len(text)

    def here() -> tuple[int, int]:
        return line, pos - line_start + 1

    def advance_over(s: str) -> None:
        nonlocal line, line_start
        idx = 0
        while True:
            nl = s.find("\n", idx)
            if nl < 0:
                break
            line += 1
            line_start = pos + nl + 1
            idx = nl + 1

    while pos < n:
        ws = _WS_RE.match(text, pos)
        if ws:
            advance_over(ws.group(0))
            pos = ws.end()
            continue
        ln, col = here()
        if text.startswith("//", pos):
            end = text.find("\n", pos)
            if end < 0:
                end = n
            tokens.append(Token("comment", text[pos:end], path, ln, col, pos))
            pos = end
            continue
        if text.startswith("/*", pos):
            # Block comments nest.
            depth = 1
            i = pos + 2
            while depth > 0:
                nxt_open = text.find("/*", i)
                nxt_close = text.find("*/", i)
                if nxt_close < 0:
                    raise UnterminatedComment("unterminated block comment", path, ln, col)
                if 0 <= nxt_open < nxt_close:
                    depth += 1
                    i = nxt_open + 2
                else:
                    depth -= 1
                    i = nxt_close + 2
            raw = text[pos:i]
            tokens.append(Token("comment", raw, path, ln, col, pos))
            advance_over(raw)
            pos = i
            continue
        m = _TOKEN_RE.match(text, pos)
        if not m:
            if text[pos] == '"':
                raise UnterminatedStringLiteral("unterminated string literal", path, ln, col)
            # Unknown byte: keep totality, emit it as a one-char operator.
            tokens.append(Token("operator", text[pos], path, ln, col, pos))
            pos += 1
            continue
        kind = m.lastgroup
        raw = m.group(0)
        if kind == "ident":
            tok_kind = "keyword" if raw in KEYWORDS else "identifier"
        elif kind in ("string", "hex", "bin", "num"):
            tok_kind = "literal"
        elif kind == "op":
            tok_kind = "operator"
        else:
            tok_kind = "punctuation"
        tokens.append(Token(tok_kind, raw, path, ln, col, pos))
        advance_over(raw)
        pos = m.end()
    return tokens


def reconstruct(text: str, tokens: list[Token]) -> str:
    """Rebuild the source from tokens plus the whitespace between them."""
    out: list[str] = []
    prev_end = 0
    for tok in tokens:
        out.append(text[prev_end:tok.offset])
        out.append(tok.text)
        prev_end = tok.offset + len(tok.text)
    out.append(text[prev_end:])
    return "".join(out)


def significant(tokens: list[Token]) -> list[Token]:
    """Drop comment tokens; analysis never looks inside them."""
    return [t for t in tokens if t.kind != "comment"]
