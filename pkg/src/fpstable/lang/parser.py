"""Recursive-descent parser for the `.rnl` surface syntax.

    program   ::= { directive | decl }
    directive ::= "format" ("single" | "double")
                | "range" NAME "=" number ":" number
                | "const" NAME "=" number
    decl      ::= NAME "(" [ NAME { "," NAME } ] ")" "=" expr
    expr      ::= "if" bool "then" expr { "elsif" bool "then" expr } "else" expr
                | "let" NAME "=" expr "in" expr
                | "for" NAME "in" INT ".." INT "with" NAME "=" number "do" expr
                | "warn"
                | arith
    arith     ::= term { ("+" | "-") term }
    term      ::= unary { ("*" | "/") unary }
    unary     ::= "-" unary | atom
    atom      ::= number | NAME | NAME "(" [ expr { "," expr } ] ")"
                | "abs" "(" expr ")" | "(" expr ")"
    number    ::= ["-"] (INT | DECIMAL) | "{" ["-"] INT "/" INT "}"
    bool      ::= conj { "or" conj }
    conj      ::= neg { "and" neg }
    neg       ::= "not" neg | "true" | "false" | "is_warn" "(" expr ")"
                | arith relop arith | "(" bool ")"
    relop     ::= "<" | "<=" | ">" | ">="

Comparisons are normalized to sign tests ``a - b < 0`` as they are read;
constants declared with ``const`` are inlined.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from ..fpmodel import get_format
from .ast import (
    FLIP, FALSE, TRUE, And, Call, Decl, Expr, For, If, IsWarn, Let, Not, Num,
    Op, Or, Program, Rel, Var, Warn,
)

KEYWORDS = {
    "if", "then", "elsif", "else", "let", "in", "for", "with", "do", "warn",
    "and", "or", "not", "true", "false", "abs", "is_warn", "format", "range", "const",
}


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>\d+\.(?!\.)\d*(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+|\.\d+(?:[eE][-+]?\d+)?|\d+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\.\.|<=|>=|==|!=|[-+*/(),=<>:{}])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            if kind == "name" and s in KEYWORDS:
                kind = "kw"
            toks.append(Token(kind, s, line, pos - line_start + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rindex("\n") + 1
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


class _Backtrack(Exception):
    pass


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.consts: dict[str, Num] = {}
        self.fmt = None
        self.ranges: list = []

    # token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[Token] = None):
        t = tok or self.tok
        return ParseError(msg, t.line, t.col)

    def at(self, *texts: str) -> bool:
        return self.tok.kind in ("kw", "op") and self.tok.text in texts

    def expect(self, text: str) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        t = self.tok
        self.i += 1
        return t

    def name(self) -> str:
        if self.tok.kind != "name":
            shown = self.tok.text or "end of input"
            raise self.error(f"expected a name, found {shown!r}")
        t = self.tok
        self.i += 1
        return t.text

    def integer(self) -> int:
        neg = False
        if self.at("-"):
            self.i += 1
            neg = True
        t = self.tok
        if t.kind != "num" or not t.text.isdigit():
            raise self.error("expected an integer literal")
        self.i += 1
        return -int(t.text) if neg else int(t.text)

    # program level

    def program(self) -> Program:
        decls = []
        while self.tok.kind != "eof":
            if self.at("format"):
                self.i += 1
                t = self.tok
                try:
                    self.fmt = get_format(self.name())
                except ValueError as exc:
                    raise self.error(str(exc), t) from None
            elif self.at("range"):
                self.i += 1
                v = self.name()
                self.expect("=")
                lo = self.number().exact
                self.expect(":")
                hi = self.number().exact
                if lo > hi:
                    raise self.error(f"empty range for {v}")
                self.ranges.append((v, lo, hi))
            elif self.at("const"):
                self.i += 1
                t = self.tok
                c = self.name()
                if c in self.consts:
                    raise self.error(f"constant {c} defined twice", t)
                self.expect("=")
                self.consts[c] = self.number()
            else:
                decls.append(self.decl())
        return Program(tuple(decls), self.fmt, False, tuple(self.ranges))

    def decl(self) -> Decl:
        t = self.tok
        name = self.name()
        self.expect("(")
        params = []
        if not self.at(")"):
            params.append(self.name())
            while self.at(","):
                self.i += 1
                params.append(self.name())
        self.expect(")")
        self.expect("=")
        body = self.expr()
        if len(set(params)) != len(params):
            raise self.error(f"repeated parameter in {name}", t)
        return Decl(name, tuple(params), body)

    # expressions

    def expr(self) -> Expr:
        if self.at("if"):
            return self.conditional()
        if self.at("let"):
            self.i += 1
            v = self.name()
            self.expect("=")
            value = self.expr()
            self.expect("in")
            return Let(v, value, self.expr())
        if self.at("for"):
            t = self.tok
            self.i += 1
            idx = self.name()
            self.expect("in")
            start = self.integer()
            self.expect("..")
            stop = self.integer()
            self.expect("with")
            acc = self.name()
            self.expect("=")
            init = self.number()
            self.expect("do")
            body = self.expr()
            try:
                return For(start, stop, init, idx, acc, body)
            except ValueError as exc:
                raise self.error(str(exc), t) from None
        return self.arith()

    def conditional(self) -> Expr:
        self.expect("if")
        branches = []
        g = self.boolean()
        self.expect("then")
        branches.append((g, self.expr()))
        while self.at("elsif"):
            self.i += 1
            g = self.boolean()
            self.expect("then")
            branches.append((g, self.expr()))
        self.expect("else")
        return If(tuple(branches), self.expr())

    def arith(self) -> Expr:
        e = self.term()
        while self.at("+", "-"):
            op = self.tok.text
            self.i += 1
            e = Op(op, (e, self.term()))
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.at("*", "/"):
            op = self.tok.text
            self.i += 1
            e = Op(op, (e, self.unary()))
        return e

    def unary(self) -> Expr:
        if self.at("-"):
            if self.peek().kind == "num":
                return self.number()
            self.i += 1
            return Op("neg", (self.unary(),))
        return self.atom()

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num" or self.at("{"):
            return self.number()
        if self.at("warn"):
            self.i += 1
            return Warn()
        if self.at("abs"):
            self.i += 1
            self.expect("(")
            a = self.expr()
            self.expect(")")
            return Op("abs", (a,))
        if self.at("("):
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "name":
            self.i += 1
            if self.at("("):
                self.i += 1
                args = []
                if not self.at(")"):
                    args.append(self.expr())
                    while self.at(","):
                        self.i += 1
                        args.append(self.expr())
                self.expect(")")
                return Call(t.text, tuple(args))
            if t.text in self.consts:
                return self.consts[t.text]
            return Var(t.text)
        if self.at("if", "let", "for"):
            return self.expr()
        shown = t.text or "end of input"
        raise self.error(f"unexpected {shown!r}")

    def number(self) -> Num:
        neg = False
        if self.at("-"):
            self.i += 1
            neg = True
        t = self.tok
        if self.at("{"):
            self.i += 1
            n = self.integer()
            self.expect("/")
            d = self.integer()
            self.expect("}")
            if d == 0:
                raise self.error("zero denominator", t)
            q = Fraction(n, d)
            return Num(-q if neg else q)
        if t.kind != "num":
            if t.kind == "name" and t.text in self.consts:
                self.i += 1
                c = self.consts[t.text]
                return Num(-c.value) if neg else c
            raise self.error("expected a number")
        self.i += 1
        if t.text.isdigit():
            v = int(t.text)
        else:
            v = Fraction(t.text)
        return Num(-v if neg else v)

    # Booleans

    def boolean(self):
        parts = [self.conjunction()]
        while self.at("or"):
            self.i += 1
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conjunction(self):
        parts = [self.negation()]
        while self.at("and"):
            self.i += 1
            parts.append(self.negation())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def negation(self):
        if self.at("not"):
            self.i += 1
            return Not(self.negation())
        if self.at("true"):
            self.i += 1
            return TRUE
        if self.at("false"):
            self.i += 1
            return FALSE
        if self.at("is_warn"):
            self.i += 1
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return IsWarn(e)
        if self.at("("):
            save = self.i
            try:
                return self.relation()
            except ParseError:
                self.i = save
            self.i += 1
            b = self.boolean()
            self.expect(")")
            return b
        return self.relation()

    def relation(self):
        lhs = self.arith()
        t = self.tok
        if self.at("=", "==", "!="):
            raise self.error("equality tests are not allowed in guards; use sign tests", t)
        if not self.at("<", "<=", ">", ">="):
            raise self.error("expected a comparison operator")
        op = t.text
        self.i += 1
        rhs = self.arith()
        return normalize_relation(op, lhs, rhs)


def _is_zero_literal(e: Expr) -> bool:
    return isinstance(e, Num) and e.exact == 0


def normalize_relation(op: str, lhs: Expr, rhs: Expr) -> Rel:
    """Rewrite ``a op b`` as a sign test on a single expression."""
    if _is_zero_literal(rhs):
        return Rel(op, lhs, Num(0))
    if _is_zero_literal(lhs):
        return Rel(FLIP[op], rhs, Num(0))
    return Rel(op, Op("-", (lhs, rhs)), Num(0))


def parse_program(text: str, check: bool = True) -> Program:
    prog = Parser(text).program()
    if check:
        from .wellformed import check_program

        check_program(prog)
    return prog


def parse_expr(text: str) -> Expr:
    p = Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return e


def parse_bool(text: str):
    p = Parser(text)
    b = p.boolean()
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return b
