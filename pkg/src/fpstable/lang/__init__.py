"""Front end: AST, parser, printer, JSON form and program conversions."""

from .ast import (
    And, BConst, Call, Decl, ErrOf, Expr, For, If, IsWarn, Let, Not, Num, Op, Or,
    Program, Rel, Ulp, Var, Warn, desugar, desugar_for,
)
from .convert import ConversionError, to_float_program, to_real_program
from .jsonio import JSONFormatError, program_from_json, program_to_json
from .parser import ParseError, parse_bool, parse_expr, parse_program
from .printer import show, show_bool, show_program
from .wellformed import WellFormednessError, check_program

__all__ = [
    "And", "BConst", "Call", "ConversionError", "Decl", "ErrOf", "Expr", "For", "If",
    "IsWarn", "JSONFormatError", "Let", "Not", "Num", "Op", "Or", "ParseError", "Program",
    "Rel", "Ulp", "Var", "Warn", "WellFormednessError", "check_program", "desugar",
    "desugar_for", "parse_bool", "parse_expr", "parse_program", "program_from_json",
    "program_to_json", "show", "show_bool", "show_program", "to_float_program",
    "to_real_program",
]
