"""JSON form of programs: one object per declaration, nodes tagged by kind.

Rationals travel as ``{"num": "...", "den": "..."}`` strings so that no
precision is lost; float constants as ``{"m": "...", "e": "..."}``.
"""

from __future__ import annotations

import json
from fractions import Fraction

from ..fpmodel import FloatVal, get_format
from .ast import (
    And, BConst, Call, Decl, ErrOf, For, If, IsWarn, Let, Not, Num, Op, Or,
    Program, Rel, Var, Warn,
)


class JSONFormatError(Exception):
    pass


def _rat(q) -> dict:
    q = Fraction(q)
    return {"num": str(q.numerator), "den": str(q.denominator)}


def _unrat(d) -> Fraction:
    try:
        return Fraction(int(d["num"]), int(d["den"]))
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise JSONFormatError(f"bad rational {d!r}") from exc


def node_to_json(n) -> dict:
    if isinstance(n, Num):
        v = n.value
        if isinstance(v, FloatVal):
            out = {"kind": "float", "m": str(v.m), "e": str(v.e), "format": v.fmt.name}
            if n.source is not None:
                out["source"] = _rat(n.source)
            return out
        if type(v) is int:
            return {"kind": "int", "value": str(v)}
        return {"kind": "real", "value": _rat(v)}
    if isinstance(n, Var):
        return {"kind": "var", "name": n.name}
    if isinstance(n, Op):
        return {"kind": "op", "op": n.op, "args": [node_to_json(a) for a in n.args]}
    if isinstance(n, Call):
        return {"kind": "call", "name": n.name, "args": [node_to_json(a) for a in n.args]}
    if isinstance(n, Let):
        return {"kind": "let", "name": n.name, "value": node_to_json(n.value),
                "body": node_to_json(n.body)}
    if isinstance(n, If):
        return {"kind": "if",
                "branches": [{"guard": node_to_json(g), "body": node_to_json(b)}
                             for g, b in n.branches],
                "else": node_to_json(n.orelse)}
    if isinstance(n, For):
        return {"kind": "for", "start": n.start, "stop": n.stop, "init": node_to_json(n.init),
                "index": n.index, "acc": n.acc, "body": node_to_json(n.body)}
    if isinstance(n, Warn):
        return {"kind": "warn"}
    if isinstance(n, ErrOf):
        return {"kind": "err", "name": n.name}
    if isinstance(n, BConst):
        return {"kind": "true" if n.value else "false"}
    if isinstance(n, And):
        return {"kind": "and", "args": [node_to_json(a) for a in n.args]}
    if isinstance(n, Or):
        return {"kind": "or", "args": [node_to_json(a) for a in n.args]}
    if isinstance(n, Not):
        return {"kind": "not", "arg": node_to_json(n.arg)}
    if isinstance(n, Rel):
        return {"kind": "rel", "op": n.op, "lhs": node_to_json(n.lhs), "rhs": node_to_json(n.rhs)}
    if isinstance(n, IsWarn):
        return {"kind": "is_warn", "expr": node_to_json(n.expr)}
    raise JSONFormatError(f"cannot serialize {type(n).__name__}")


def node_from_json(d):
    if not isinstance(d, dict) or "kind" not in d:
        raise JSONFormatError(f"node without kind: {d!r}")
    k = d["kind"]
    try:
        if k == "int":
            return Num(int(d["value"]))
        if k == "real":
            return Num(_unrat(d["value"]))
        if k == "float":
            fmt = get_format(d.get("format", "double"))
            src = _unrat(d["source"]) if "source" in d else None
            return Num(FloatVal(int(d["m"]), int(d["e"]), fmt), source=src)
        if k == "var":
            return Var(d["name"])
        if k == "op":
            return Op(d["op"], tuple(node_from_json(a) for a in d["args"]))
        if k == "call":
            return Call(d["name"], tuple(node_from_json(a) for a in d["args"]))
        if k == "let":
            return Let(d["name"], node_from_json(d["value"]), node_from_json(d["body"]))
        if k == "if":
            branches = tuple((node_from_json(b["guard"]), node_from_json(b["body"]))
                             for b in d["branches"])
            return If(branches, node_from_json(d["else"]))
        if k == "for":
            return For(int(d["start"]), int(d["stop"]), node_from_json(d["init"]),
                       d["index"], d["acc"], node_from_json(d["body"]))
        if k == "warn":
            return Warn()
        if k == "err":
            return ErrOf(d["name"])
        if k == "true":
            return BConst(True)
        if k == "false":
            return BConst(False)
        if k == "and":
            return And(tuple(node_from_json(a) for a in d["args"]))
        if k == "or":
            return Or(tuple(node_from_json(a) for a in d["args"]))
        if k == "not":
            return Not(node_from_json(d["arg"]))
        if k == "rel":
            return Rel(d["op"], node_from_json(d["lhs"]), node_from_json(d["rhs"]))
        if k == "is_warn":
            return IsWarn(node_from_json(d["expr"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise JSONFormatError(f"malformed {k} node: {exc}") from exc
    raise JSONFormatError(f"unknown node kind {k!r}")


def program_to_json(p: Program) -> dict:
    return {
        "format": p.fmt.name if p.fmt else None,
        "float": p.is_float,
        "ranges": {v: {"lo": _rat(lo), "hi": _rat(hi)} for v, lo, hi in p.ranges},
        "decls": [{"name": d.name, "params": list(d.params), "body": node_to_json(d.body)}
                  for d in p.decls],
    }


def program_from_json(data, check: bool = True) -> Program:
    if isinstance(data, str):
        data = json.loads(data)
    if isinstance(data, list):
        data = {"decls": data}
    try:
        fmt = get_format(data["format"]) if data.get("format") else None
        ranges = tuple((v, _unrat(r["lo"]), _unrat(r["hi"]))
                       for v, r in data.get("ranges", {}).items())
        decls = tuple(Decl(d["name"], tuple(d["params"]), node_from_json(d["body"]))
                      for d in data["decls"])
        prog = Program(decls, fmt, bool(data.get("float", False)), ranges)
    except (KeyError, TypeError, ValueError) as exc:
        raise JSONFormatError(f"malformed program: {exc}") from exc
    if check:
        from .wellformed import check_program

        check_program(prog, allow_warn=prog.is_float)
    return prog
