"""Conversions between real-valued and floating-point programs."""

from __future__ import annotations

from fractions import Fraction

from ..fpmodel import FloatFormat, FloatVal, round_nearest
from .ast import Decl, Num, Program, Warn, map_children


class ConversionError(Exception):
    pass


def _to_float(node, fmt: FloatFormat):
    if isinstance(node, Num):
        v = node.value
        if type(v) is int:
            return node
        if isinstance(v, FloatVal):
            if v.fmt != fmt:
                raise ConversionError(f"constant {v} is not in format {fmt.name}")
            return node
        try:
            return Num(round_nearest(v, fmt), source=v)
        except OverflowError as exc:
            raise ConversionError(f"constant {float(v):g} overflows {fmt.name}") from exc
    return map_children(node, lambda c: _to_float(c, fmt))


def _to_real(node):
    if isinstance(node, Warn):
        raise ConversionError("a program containing warn has no real counterpart")
    if isinstance(node, Num):
        v = node.value
        if isinstance(v, FloatVal):
            return Num(v.value)
        return node
    return map_children(node, _to_real)


def to_float_program(prog: Program, fmt: FloatFormat) -> Program:
    """Round every real constant to ``fmt``; integers stay exact."""
    decls = tuple(Decl(d.name, d.params, _to_float(d.body, fmt)) for d in prog.decls)
    return Program(decls, fmt, True, prog.ranges)


def to_real_program(prog: Program) -> Program:
    """Replace every float constant by the rational it denotes."""
    decls = tuple(Decl(d.name, d.params, _to_real(d.body)) for d in prog.decls)
    return Program(decls, None, False, prog.ranges)


def float_value_of(q: Fraction, fmt: FloatFormat) -> FloatVal:
    return round_nearest(q, fmt)
