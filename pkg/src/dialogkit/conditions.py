"""Boolean condition language for branch expressions.

Authors write conditions like ``mood <= 3 and day > 1`` on condition-node
branches.  Keyword connectives (``and``/``or``/``not``) were chosen over
symbolic operators because the authors are non-programmers.  There is no
arithmetic: comparisons are value-vs-value only.

Precedence, lowest to highest: ``or`` < ``and`` < ``not`` < comparison
< primary.  Comparisons do not chain (``a < b < c`` is a parse error).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

__all__ = [
    "Expr",
    "Lit",
    "Var",
    "Exists",
    "Not",
    "And",
    "Or",
    "Cmp",
    "ExprParseError",
    "MissingVariableError",
    "parse_expr",
    "typecheck_expr",
    "eval_expr",
    "format_expr",
    "expr_variables",
]

MAX_FRACTION_DIGITS = 6

Value = Decimal | str | bool


class ExprParseError(ValueError):
    """Raised when an expression fails to parse.

    ``offset`` is the UTF-8 byte offset of the failure; ``expected``
    names what the parser was looking for.
    """

    def __init__(self, message: str, offset: int, expected: str = ""):
        super().__init__(f"{message} at offset {offset}" + (f", expected {expected}" if expected else ""))
        self.offset = offset
        self.expected = expected


class MissingVariableError(RuntimeError):
    """A typechecked expression referenced a variable absent from the store.

    This signals an engine bug (the store violated its declarations), not
    an authoring error.
    """


@dataclass(frozen=True)
class Lit:
    value: Value


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Exists:
    name: str


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Cmp:
    op: str  # one of == != < <= > >=
    left: "Expr"
    right: "Expr"


Expr = Lit | Var | Exists | Not | And | Or | Cmp

# --- lexer ---

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|<|>)
  | (?P<lparen>\()
  | (?P<rparen>\))
    """,
    re.VERBOSE,
)

_KEYWORDS = {"and", "or", "not", "exists", "true", "false"}


@dataclass(frozen=True)
class _Token:
    kind: str  # number, ident, keyword, op, lparen, rparen, string, eof
    text: str
    pos: int  # character offset into the source


def _byte_offset(source: str, char_pos: int) -> int:
    return len(source[:char_pos].encode("utf-8"))


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(source)
    while i < n:
        if source[i] == '"':
            end = source.find('"', i + 1)
            if end < 0:
                raise ExprParseError("unterminated string", _byte_offset(source, i))
            tokens.append(_Token("string", source[i + 1 : end], i))
            i = end + 1
            continue
        m = _TOKEN_RE.match(source, i)
        if m is None:
            raise ExprParseError(f"unexpected character {source[i]!r}", _byte_offset(source, i))
        kind = m.lastgroup
        text = m.group(0)
        if kind != "ws":
            if kind == "ident" and text in _KEYWORDS:
                kind = "keyword"
            tokens.append(_Token(kind, text, i))
        i = m.end()
    tokens.append(_Token("eof", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str, tokens: list[_Token]):
        self.source = source
        self.tokens = tokens
        self.i = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def error(self, expected: str) -> ExprParseError:
        tok = self.cur
        shown = "end of input" if tok.kind == "eof" else repr(tok.text)
        return ExprParseError(
            f"unexpected {shown}", _byte_offset(self.source, tok.pos), expected
        )

    def expect(self, kind: str, text: str | None = None, expected: str = "") -> _Token:
        tok = self.cur
        if tok.kind != kind or (text is not None and tok.text != text):
            raise self.error(expected or (text or kind))
        return self.advance()

    def parse(self) -> Expr:
        expr = self.parse_or()
        if self.cur.kind != "eof":
            raise self.error("end of input")
        return expr

    def parse_or(self) -> Expr:
        left = self.parse_and()
        while self.cur.kind == "keyword" and self.cur.text == "or":
            self.advance()
            left = Or(left, self.parse_and())
        return left

    def parse_and(self) -> Expr:
        left = self.parse_not()
        while self.cur.kind == "keyword" and self.cur.text == "and":
            self.advance()
            left = And(left, self.parse_not())
        return left

    def parse_not(self) -> Expr:
        if self.cur.kind == "keyword" and self.cur.text == "not":
            self.advance()
            return Not(self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self) -> Expr:
        left = self.parse_primary()
        if self.cur.kind == "op":
            op = self.advance().text
            right = self.parse_primary()
            if self.cur.kind == "op":
                # non-associative: a < b < c is rejected
                raise self.error("end of comparison (comparisons do not chain)")
            return Cmp(op, left, right)
        return left

    def parse_primary(self) -> Expr:
        tok = self.cur
        if tok.kind == "lparen":
            self.advance()
            inner = self.parse_or()
            self.expect("rparen", expected="')'")
            return inner
        if tok.kind == "string":
            self.advance()
            return Lit(tok.text)
        if tok.kind == "number":
            self.advance()
            if "." in tok.text and len(tok.text.split(".", 1)[1]) > MAX_FRACTION_DIGITS:
                raise ExprParseError(
                    f"number has more than {MAX_FRACTION_DIGITS} fractional digits",
                    _byte_offset(self.source, tok.pos),
                )
            return Lit(Decimal(tok.text))
        if tok.kind == "keyword":
            if tok.text == "true":
                self.advance()
                return Lit(True)
            if tok.text == "false":
                self.advance()
                return Lit(False)
            if tok.text == "exists":
                self.advance()
                self.expect("lparen", expected="'('")
                name = self.expect("ident", expected="variable name").text
                self.expect("rparen", expected="')'")
                return Exists(name)
            raise self.error("operand")
        if tok.kind == "ident":
            self.advance()
            return Var(tok.text)
        raise self.error("operand")


def parse_expr(source: str) -> Expr:
    """Parse a condition expression, raising ExprParseError on bad input."""
    if not source.strip():
        raise ExprParseError("empty input", 0, "expression")
    return _Parser(source, _tokenize(source)).parse()


# --- typechecking ---

_ORDERING_OPS = {"<", "<=", ">", ">="}


def _value_type(value: Value) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, Decimal):
        return "number"
    return "text"


def typecheck_expr(expr: Expr, declared: dict[str, str]) -> list[str]:
    """Check ``expr`` against variable declarations (name -> type).

    Returns a list of error messages; empty means well-typed.  The
    expression as a whole must be boolean.  ``exists(v)`` is boolean for
    any ``v``, declared or not.
    """
    errors: list[str] = []

    def check(e: Expr) -> str | None:
        # returns the type, or None if this subtree already errored
        if isinstance(e, Lit):
            return _value_type(e.value)
        if isinstance(e, Var):
            if e.name not in declared:
                errors.append(f"undeclared variable '{e.name}'")
                return None
            return declared[e.name]
        if isinstance(e, Exists):
            return "boolean"
        if isinstance(e, Not):
            t = check(e.operand)
            if t is not None and t != "boolean":
                errors.append(f"'not' requires a boolean operand, got {t}")
            return "boolean"
        if isinstance(e, (And, Or)):
            word = "and" if isinstance(e, And) else "or"
            for side in (e.left, e.right):
                t = check(side)
                if t is not None and t != "boolean":
                    errors.append(f"'{word}' requires boolean operands, got {t}")
            return "boolean"
        if isinstance(e, Cmp):
            lt = check(e.left)
            rt = check(e.right)
            if lt is None or rt is None:
                return "boolean"
            if e.op in _ORDERING_OPS:
                if lt != "number" or rt != "number":
                    errors.append(
                        f"ordering comparison '{e.op}' requires numbers, got {lt} and {rt}"
                    )
            elif lt != rt:
                errors.append(f"'{e.op}' requires both sides of the same type, got {lt} and {rt}")
            return "boolean"
        raise TypeError(f"unknown expression node {e!r}")

    top = check(expr)
    if top is not None and top != "boolean":
        errors.append(f"condition must be boolean, got {top}")
    return errors


# --- evaluation ---


def eval_expr(expr: Expr, store: dict[str, Value]) -> bool:
    """Evaluate a typechecked expression against a variable store.

    Pure and store-read-only.  Total on typechecked input given a store
    honoring the declarations that were checked against.
    """
    if isinstance(expr, Lit):
        return expr.value  # type: ignore[return-value]
    if isinstance(expr, Var):
        if expr.name not in store:
            raise MissingVariableError(f"variable '{expr.name}' missing from store")
        return store[expr.name]  # type: ignore[return-value]
    if isinstance(expr, Exists):
        return expr.name in store
    if isinstance(expr, Not):
        return not eval_expr(expr.operand, store)
    if isinstance(expr, And):
        return bool(eval_expr(expr.left, store)) and bool(eval_expr(expr.right, store))
    if isinstance(expr, Or):
        return bool(eval_expr(expr.left, store)) or bool(eval_expr(expr.right, store))
    if isinstance(expr, Cmp):
        left = eval_expr(expr.left, store)
        right = eval_expr(expr.right, store)
        if expr.op == "==":
            return left == right
        if expr.op == "!=":
            return left != right
        if expr.op == "<":
            return left < right
        if expr.op == "<=":
            return left <= right
        if expr.op == ">":
            return left > right
        return left >= right
    raise TypeError(f"unknown expression node {expr!r}")


# --- pretty printer ---


def format_expr(expr: Expr) -> str:
    """Render an expression as re-parseable source (fully parenthesized)."""
    if isinstance(expr, Lit):
        if isinstance(expr.value, bool):
            return "true" if expr.value else "false"
        if isinstance(expr.value, Decimal):
            return str(expr.value)
        return '"' + expr.value + '"'
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Exists):
        return f"exists({expr.name})"
    if isinstance(expr, Not):
        return f"(not {format_expr(expr.operand)})"
    if isinstance(expr, And):
        return f"({format_expr(expr.left)} and {format_expr(expr.right)})"
    if isinstance(expr, Or):
        return f"({format_expr(expr.left)} or {format_expr(expr.right)})"
    if isinstance(expr, Cmp):
        return f"({format_expr(expr.left)} {expr.op} {format_expr(expr.right)})"
    raise TypeError(f"unknown expression node {expr!r}")


def expr_variables(expr: Expr, *, include_exists: bool = False) -> set[str]:
    """Collect variable names read by ``expr``.

    ``exists()`` arguments are excluded by default: presence checks are
    not reads for flow analysis.
    """
    out: set[str] = set()

    def walk(e: Expr) -> None:
        if isinstance(e, Var):
            out.add(e.name)
        elif isinstance(e, Exists):
            if include_exists:
                out.add(e.name)
        elif isinstance(e, Not):
            walk(e.operand)
        elif isinstance(e, (And, Or)):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, Cmp):
            walk(e.left)
            walk(e.right)

    walk(expr)
    return out
