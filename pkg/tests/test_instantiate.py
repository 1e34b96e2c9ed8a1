from fractions import Fraction

import pytest

from fpstable import benchmarks
from fpstable.fpmodel import DOUBLE
from fpstable.instantiate import UnresolvedRangeError, error_bounds, instantiate_errors, seed
from fpstable.lang import show
from fpstable.semantics import program_fixpoint
from fpstable.transform import transform_program

RANGES = {"s": (Fraction(0), Fraction(1000)), "v": (Fraction(1), Fraction(200))}


@pytest.fixture(scope="module")
def vwcv():
    return transform_program(benchmarks.load("vwcv"))


def test_seeds():
    assert show(seed("x", "rounded-input", DOUBLE)) == "0.5 * ulp_double(x)"
    assert show(seed("x", "linked", DOUBLE)) == "0"


def test_product_error_variable(vwcv):
    inst = instantiate_errors(vwcv, RANGES)
    e = inst.exact["tcoa"]["e"]
    assert Fraction(1, 10 ** 12) <= e <= Fraction(1, 10 ** 9)
    # callers reuse the callee's value
    assert inst.values["vmd"]["e"] == inst.values["tcoa"]["e"] == inst.values["vwcv"]["e"]
    assert list(inst.values["vwcv"]) == ["e1", "e2", "e3", "e"]


def test_linked_inputs_give_smaller_errors(vwcv):
    rounded = instantiate_errors(vwcv, RANGES)
    linked = instantiate_errors(vwcv, RANGES, mode="linked")
    for name, vals in linked.exact.items():
        for k, v in vals.items():
            assert v <= rounded.exact[name][k]


def test_values_round_upwards(vwcv):
    inst = instantiate_errors(vwcv, RANGES)
    for name, vals in inst.values.items():
        for k, v in vals.items():
            assert v.value >= inst.exact[name][k]


def test_missing_ranges(vwcv):
    with pytest.raises(UnresolvedRangeError):
        instantiate_errors(vwcv)


def test_function_bounds(vwcv):
    interp = program_fixpoint(vwcv.float_program, ranges=vwcv.source.range_map)
    bounds = error_bounds(interp, RANGES, vwcv.fmt, overall=True)
    assert bounds["vwcv"].stable == 0
    assert Fraction(1, 10 ** 14) <= bounds["tcoa"].stable <= Fraction(1, 10 ** 11)
    assert Fraction(1, 10 ** 13) <= bounds["vmd"].stable <= Fraction(1, 10 ** 10)
    # unstable paths dominate the overall bound
    assert bounds["tcoa"].overall > 999
