"""Parser and printer for the pipeline source format.

The format is line oriented (``#`` starts a comment):

    pipeline <id>
    param <id> = <float>
    input <id>(<vars>) : <N>x<N>[x<N>]
    func <id> = clamp_edge(<input-id>)
    func <id>(<vars>) = <expr>
    output <id> : <N>x<N>[x<N>]

Expressions use ``+ - * /``, unary minus, ``exp(e)``, ``sqrt(e)``,
parentheses, and stencil accesses like ``f(x + 1, y - 2)`` whose
arguments must be ``var``, ``var +- int`` or a bare integer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ir import (
    Access,
    AffineIndex,
    BinOp,
    Call,
    Expr,
    FuncDef,
    FuncKind,
    INTRINSICS,
    Num,
    ParamRef,
    Pipeline,
    PipelineSyntaxError,
    VarRef,
    validate_pipeline,
)

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[+\-*/(),]))"
)

_INT_RE = re.compile(r"[+-]?\d+$")


@dataclass
class _Tok:
    kind: str  # num | id | op | end
    text: str
    col: int


def _tokenize(text: str, line: int) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise PipelineSyntaxError(
                f"unexpected character {stripped[0]!r}", line, pos + 1
            )
        pos = m.end()
        for kind in ("num", "id", "op"):
            if m.group(kind) is not None:
                toks.append(_Tok(kind, m.group(kind), m.start(kind) + 1))
                break
    toks.append(_Tok("end", "", len(text) + 1))
    return toks


class _ExprParser:
    """Recursive-descent expression parser over one line's token stream."""

    def __init__(self, toks: list[_Tok], line: int, scope_dims: tuple[str, ...]):
        self.toks = toks
        self.i = 0
        self.line = line
        self.dims = scope_dims

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op: str) -> _Tok:
        t = self.next()
        if t.kind != "op" or t.text != op:
            raise PipelineSyntaxError(f"expected '{op}', got {t.text!r}", self.line, t.col)
        return t

    def parse(self) -> Expr:
        e = self.additive()
        t = self.peek()
        if t.kind != "end":
            raise PipelineSyntaxError(f"trailing input {t.text!r}", self.line, t.col)
        return e

    def additive(self) -> Expr:
        e = self.multiplicative()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.next()
            rhs = self.multiplicative()
            e = BinOp(op.text, e, rhs, pos=(self.line, op.col))
        return e

    def multiplicative(self) -> Expr:
        e = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.next()
            rhs = self.unary()
            e = BinOp(op.text, e, rhs, pos=(self.line, op.col))
        return e

    def unary(self) -> Expr:
        t = self.peek()
        if t.kind == "op" and t.text == "-":
            self.next()
            rhs = self.unary()
            # sugar for negation; the IR has no unary node
            return BinOp("-", Num(0.0, "0", pos=(self.line, t.col)), rhs, pos=(self.line, t.col))
        return self.primary()

    def primary(self) -> Expr:
        t = self.next()
        if t.kind == "num":
            return Num(float(t.text), t.text, pos=(self.line, t.col))
        if t.kind == "op" and t.text == "(":
            e = self.additive()
            self.expect_op(")")
            return e
        if t.kind == "id":
            if self.peek().kind == "op" and self.peek().text == "(":
                return self.call_or_access(t)
            if t.text in self.dims:
                return VarRef(t.text, pos=(self.line, t.col))
            return ParamRef(t.text, pos=(self.line, t.col))
        raise PipelineSyntaxError(f"unexpected token {t.text!r}", self.line, t.col)

    def call_or_access(self, name: _Tok) -> Expr:
        self.expect_op("(")
        if name.text in INTRINSICS:
            arg = self.additive()
            self.expect_op(")")
            return Call(name.text, arg, pos=(self.line, name.col))
        args = [self.affine_arg()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.next()
            args.append(self.affine_arg())
        self.expect_op(")")
        return Access(name.text, tuple(args), pos=(self.line, name.col))

    def affine_arg(self) -> AffineIndex:
        """Parse one access argument: var | var +- int | [-]int."""
        from .ir import NonAffineAccessError

        t = self.next()
        neg = False
        if t.kind == "op" and t.text == "-":
            neg = True
            t = self.next()
        if t.kind == "num":
            if not _INT_RE.match(t.text):
                raise NonAffineAccessError(
                    f"access index must be an integer, got {t.text!r}", self.line, t.col
                )
            return AffineIndex(None, -int(t.text) if neg else int(t.text))
        if neg or t.kind != "id":
            raise NonAffineAccessError(
                f"access index must be 'var', 'var +- int' or an integer",
                self.line,
                t.col,
            )
        var = t.text
        nxt = self.peek()
        if nxt.kind == "op" and nxt.text in "+-":
            sign = 1 if nxt.text == "+" else -1
            self.next()
            num = self.next()
            if num.kind != "num" or not _INT_RE.match(num.text):
                raise NonAffineAccessError(
                    "access offset must be an integer literal", self.line, num.col
                )
            return AffineIndex(var, sign * int(num.text))
        return AffineIndex(var, 0)


_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*$")
_EXTENT_RE = re.compile(r"(\d+)(?:x(\d+))?(?:x(\d+))?$")


def _parse_extent(text: str, line: int) -> tuple[int, ...]:
    m = _EXTENT_RE.match(text.strip())
    if not m:
        raise PipelineSyntaxError(f"bad extent {text.strip()!r}", line)
    return tuple(int(g) for g in m.groups() if g is not None)


def _parse_dims(text: str, line: int) -> tuple[str, ...]:
    dims = tuple(d.strip() for d in text.split(","))
    if not all(_IDENT_RE.match(d) for d in dims):
        raise PipelineSyntaxError(f"bad dim list {text!r}", line)
    return dims


def parse_pipeline(text: str) -> Pipeline:
    """Parse and fully validate pipeline source text."""
    name: str | None = None
    params: dict[str, float] = {}
    funcs: dict[str, FuncDef] = {}
    output: str | None = None
    output_extent: tuple[int, ...] | None = None

    def dup_check(ident: str, line: int) -> None:
        if ident in funcs or ident in params:
            raise PipelineSyntaxError(f"duplicate name '{ident}'", line)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        stmt = raw.split("#", 1)[0].strip()
        if not stmt:
            continue
        head, _, rest = stmt.partition(" ")
        rest = rest.strip()

        if head == "pipeline":
            if name is not None:
                raise PipelineSyntaxError("duplicate 'pipeline' line", lineno)
            if not _IDENT_RE.match(rest):
                raise PipelineSyntaxError(f"bad pipeline name {rest!r}", lineno)
            name = rest

        elif head == "param":
            ident, eq, value = (s.strip() for s in rest.partition("="))
            if not eq or not _IDENT_RE.match(ident):
                raise PipelineSyntaxError("expected 'param <id> = <float>'", lineno)
            dup_check(ident, lineno)
            try:
                params[ident] = float(value)
            except ValueError:
                raise PipelineSyntaxError(f"bad float {value!r}", lineno) from None

        elif head == "input":
            m = re.match(r"([A-Za-z_][\w]*)\s*\(([^)]*)\)\s*:\s*(.+)$", rest)
            if not m:
                raise PipelineSyntaxError("expected 'input <id>(<vars>) : <extent>'", lineno)
            ident, dims_text, extent_text = m.groups()
            dup_check(ident, lineno)
            dims = _parse_dims(dims_text, lineno)
            extent = _parse_extent(extent_text, lineno)
            if len(extent) != len(dims):
                raise PipelineSyntaxError(
                    f"extent {extent} does not match dims {dims}", lineno
                )
            funcs[ident] = FuncDef(ident, dims, FuncKind.INPUT, extent=extent, line=lineno)

        elif head == "func":
            clamp = re.match(r"([A-Za-z_][\w]*)\s*=\s*clamp_edge\(\s*([A-Za-z_][\w]*)\s*\)$", rest)
            if clamp:
                ident, source = clamp.groups()
                dup_check(ident, lineno)
                src = funcs.get(source)
                src_dims = src.dims if src else ("x", "y")
                funcs[ident] = FuncDef(
                    ident, src_dims, FuncKind.CLAMP, clamp_source=source, line=lineno
                )
                continue
            m = re.match(r"([A-Za-z_][\w]*)\s*\(([^)]*)\)\s*=\s*(.+)$", rest)
            if not m:
                raise PipelineSyntaxError(
                    "expected 'func <id>(<vars>) = <expr>' or 'func <id> = clamp_edge(<input>)'",
                    lineno,
                )
            ident, dims_text, expr_text = m.groups()
            dup_check(ident, lineno)
            dims = _parse_dims(dims_text, lineno)
            expr = _ExprParser(_tokenize(expr_text, lineno), lineno, dims).parse()
            funcs[ident] = FuncDef(ident, dims, FuncKind.COMPUTED, expr=expr, line=lineno)

        elif head == "output":
            if output is not None:
                raise PipelineSyntaxError("duplicate 'output' line", lineno)
            ident, colon, extent_text = (s.strip() for s in rest.partition(":"))
            if not colon or not _IDENT_RE.match(ident):
                raise PipelineSyntaxError("expected 'output <id> : <extent>'", lineno)
            output = ident
            output_extent = _parse_extent(extent_text, lineno)

        else:
            raise PipelineSyntaxError(f"unknown directive {head!r}", lineno)

    if name is None:
        raise PipelineSyntaxError("missing 'pipeline' line")
    if output is None:
        raise PipelineSyntaxError("missing 'output' line")

    p = Pipeline(name, params, funcs, output, output_extent)
    validate_pipeline(p)
    return p


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def format_expr(e: Expr) -> str:
    return _fmt(e, 0)


def _fmt(e: Expr, parent_prec: int, right: bool = False) -> str:
    if isinstance(e, Num):
        return e.text if e.text else repr(e.value)
    if isinstance(e, (ParamRef, VarRef)):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({_fmt(e.arg, 0)})"
    if isinstance(e, Access):
        return f"{e.func}({', '.join(str(a) for a in e.args)})"
    assert isinstance(e, BinOp)
    if e.op == "-" and isinstance(e.lhs, Num) and e.lhs.value == 0.0:
        inner = _fmt(e.rhs, 3)
        return f"-{inner}" if parent_prec < 3 else f"(-{inner})"
    prec = _PRECEDENCE[e.op]
    lhs = _fmt(e.lhs, prec)
    # - and / are left associative: parenthesize equal-precedence right children
    rhs = _fmt(e.rhs, prec + (1 if e.op in "-/" else 0), right=True)
    s = f"{lhs} {e.op} {rhs}"
    if prec < parent_prec or (prec == parent_prec and right):
        return f"({s})"
    return s


def format_extent(extent: tuple[int, ...]) -> str:
    return "x".join(str(e) for e in extent)


def format_pipeline(p: Pipeline) -> str:
    """Print a pipeline back to parseable source (round-trips structurally)."""
    lines = [f"pipeline {p.name}", ""]
    for name, value in p.params.items():
        lines.append(f"param {name} = {value!r}")
    if p.params:
        lines.append("")
    for f in p.funcs.values():
        if f.kind is FuncKind.INPUT:
            lines.append(f"input {f.name}({', '.join(f.dims)}) : {format_extent(f.extent)}")
        elif f.kind is FuncKind.CLAMP:
            lines.append(f"func {f.name} = clamp_edge({f.clamp_source})")
        else:
            lines.append(f"func {f.name}({', '.join(f.dims)}) = {format_expr(f.expr)}")
    lines.append("")
    lines.append(f"output {p.output} : {format_extent(p.output_extent)}")
    lines.append("")
    return "\n".join(lines)
