"""Deterministic input generation: uniform, boundary-biased and corner samples.

A sample is a pair of tuples: float inputs (Python floats holding values
of the program format) and real inputs (exact ``mpq``).  In ``linked``
mode the real inputs are the floats themselves; in ``rounded-input`` mode
each real input is drawn inside the rounding interval of its float, so
rounding the real input gives back the float.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from gmpy2 import mpq

from ..fpmodel import FloatFormat, round_nearest, round_up
from ..lang.ast import Call, For, If, Let, Num, Op, Program, Var, substitute, walk
from ..lang.printer import show
from ..transform import guard_atoms
from .compiled import ARITH_ERRORS, Warned

MODES = ("linked", "rounded-input")


@dataclass(frozen=True)
class Sample:
    flt: tuple  # floats
    real: tuple  # mpq

    def to_json(self) -> dict:
        return {"float": [x.hex() for x in self.flt],
                "real": [str(Fraction(int(q.numerator), int(q.denominator))) for q in self.real]}


# ---------------------------------------------------------------------------
# float ordering, for stepping by ulps


def _codec(fmt: FloatFormat):
    if fmt.precision == 53:
        return "<d", "<q", 63
    if fmt.precision == 24:
        return "<f", "<i", 31
    raise ValueError(f"no machine layout for {fmt.name}")


def float_key(x: float, fmt: FloatFormat) -> int:
    """Integer that orders floats of ``fmt`` and counts ulps between them."""
    f, i, bits = _codec(fmt)
    k = struct.unpack(i, struct.pack(f, x))[0]
    return k if k >= 0 else -(k & ((1 << bits) - 1))


def key_float(k: int, fmt: FloatFormat) -> float:
    f, i, bits = _codec(fmt)
    raw = k if k >= 0 else (-k) | (1 << bits)
    if raw >= 1 << bits:
        raw -= 1 << (bits + 1)
    return struct.unpack(f, struct.pack(i, raw))[0]


def float_range(lo: Fraction, hi: Fraction, fmt: FloatFormat) -> tuple[float, float]:
    """Smallest and largest floats of ``fmt`` inside ``[lo, hi]``."""
    a = float(round_up(lo, fmt))
    b = -float(round_up(-hi, fmt))
    if a > b:
        raise ValueError(f"no {fmt.name} value in [{lo}, {hi}]")
    return a, b


def as_mpq(x) -> mpq:
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


# ---------------------------------------------------------------------------
# boundary expressions


def boundary_exprs(prog: Program, fname: str, _depth: int = 0) -> list:
    """Guard expressions of ``fname`` and its callees over its parameters.

    Let-bound names are replaced by their values and callee guards are
    instantiated at the actual arguments.  Guards that depend on a loop
    variable are skipped.
    """
    out: dict[str, object] = {}
    decl = prog.decl(fname)

    def visit(node, env):
        if isinstance(node, Let):
            visit(node.value, env)
            inner = dict(env)
            inner[node.name] = substitute(node.value, env)
            visit(node.body, inner)
            return
        if isinstance(node, For):
            visit(node.init, env)
            return
        if isinstance(node, If):
            for g in node.guards:
                for a in guard_atoms(g):
                    add(substitute(a, env))
                    for c in (n for n in walk(a) if isinstance(n, Call)):
                        callee(c, env)
            for b in node.bodies:
                visit(b, env)
            return
        if isinstance(node, Call):
            callee(node, env)
        for c in node.children():
            visit(c, env)

    def callee(c: Call, env):
        if _depth > 8:
            return
        d = prog.decl(c.name)
        args = [substitute(a, env) for a in c.args]
        for e in boundary_exprs(prog, c.name, _depth + 1):
            add(substitute(e, dict(zip(d.params, args))))

    def add(e):
        free = {n.name for n in walk(e) if isinstance(n, Var)}
        if free <= set(decl.params) and not isinstance(e, Num):
            out.setdefault(show(e), e)

    visit(decl.body, {})
    return list(out.values())


# ---------------------------------------------------------------------------
# the sampler


class Sampler:
    """Reproducible batches of samples for one function.

    ``crossing`` evaluates boundary expression ``k`` at real inputs and is
    used to find sign changes; when absent only uniform and corner samples
    are drawn.
    """

    def __init__(self, params: Sequence[str], ranges: Mapping[str, tuple], fmt: FloatFormat,
                 mode: str = "rounded-input", seed: int = 0,
                 crossing: Optional[Callable[[int, tuple], object]] = None, n_exprs: int = 0,
                 bias: float = 0.5, burst: int = 32):
        if mode not in MODES:
            raise ValueError(f"unknown stability mode {mode!r}")
        self.params = tuple(params)
        self.fmt = fmt
        self.mode = mode
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.real_box = [(Fraction(ranges[p][0]), Fraction(ranges[p][1])) for p in self.params]
        self.box = [float_range(lo, hi, fmt) for lo, hi in self.real_box]
        self.crossing = crossing
        self.n_exprs = n_exprs if crossing else 0
        self.bias = bias if self.n_exprs and self.params else 0.0
        self.burst = burst
        self.single = fmt.precision == 24
        self._corners = self._corner_points()

    def _round(self, xs: np.ndarray) -> np.ndarray:
        if self.single:
            return xs.astype(np.float32).astype(np.float64)
        return xs

    def _clamp(self, x: float, j: int) -> float:
        lo, hi = self.box[j]
        return min(max(x, lo), hi)

    def _corner_points(self) -> list[tuple]:
        choices = []
        tiny = float(Fraction(1, 2 ** self.fmt.emin))
        for lo, hi in self.box:
            c = {lo, hi}
            for v in (0.0, tiny, -tiny):
                if lo <= v <= hi:
                    c.add(v)
            choices.append(sorted(c))
        pts = [()]
        for c in choices:
            pts = [p + (v,) for p in pts for v in c]
            if len(pts) > 64:
                pts = pts[:64]
        return pts

    def _uniform(self, n: int) -> list[tuple]:
        cols = []
        for j, (lo, hi) in enumerate(self.box):
            xs = self._round(self.rng.uniform(lo, hi, n)) if n else np.zeros(0)
            cols.append([self._clamp(float(x), j) for x in xs])
        return list(zip(*cols)) if cols else [() for _ in range(n)]

    def _eval_sign(self, k: int, xs: tuple) -> Optional[int]:
        try:
            v = self.crossing(k, tuple(mpq(x) for x in xs))
        except (Warned, *ARITH_ERRORS):
            return None
        return (v > 0) - (v < 0)

    def _near_crossing(self, n: int) -> list[tuple]:
        """A burst of points a few ulps around a sign change of one guard expression."""
        base = list(self._uniform(1)[0])
        if not base:
            return []
        k = int(self.rng.integers(self.n_exprs))
        j = int(self.rng.integers(len(base)))
        lo, hi = self.box[j]
        ts = np.linspace(lo, hi, 17)
        pts = [self._clamp(float(self._round(np.array([t]))[0]), j) for t in ts]
        signs = []
        for t in pts:
            base[j] = t
            signs.append(self._eval_sign(k, tuple(base)))
        cands = [(a, b) for (a, sa), (b, sb) in zip(zip(pts, signs), zip(pts[1:], signs[1:]))
                 if sa is not None and sb is not None and sa != sb]
        if cands:
            a, b = cands[int(self.rng.integers(len(cands)))]
            ka, kb = float_key(a, self.fmt), float_key(b, self.fmt)
            base[j] = a
            sa = self._eval_sign(k, tuple(base))
            while kb - ka > 1:
                mid = (ka + kb) // 2
                base[j] = key_float(mid, self.fmt)
                s = self._eval_sign(k, tuple(base))
                if s is None:
                    break
                if s == sa:
                    ka = mid
                else:
                    kb = mid
            centre = ka
        else:
            centre = float_key(pts[int(self.rng.integers(len(pts)))], self.fmt)
        out = []
        steps = self.rng.geometric(0.35, n) - 1
        signs_ = self.rng.integers(0, 2, n) * 2 - 1
        for st, sg in zip(steps, signs_):
            x = list(base)
            x[j] = self._clamp(key_float(centre + int(st) * int(sg), self.fmt), j)
            out.append(tuple(x))
        return out

    def _to_real(self, flts: list[tuple]) -> list[Sample]:
        if self.mode == "linked":
            return [Sample(f, tuple(mpq(x) for x in f)) for f in flts]
        m = len(self.params)
        us = self.rng.uniform(-0.5, 0.5, (len(flts), m)) * (1 - 2.0 ** -20)
        if not flts or not m:
            return [Sample(f, ()) for f in flts]
        xs = np.array(flts, dtype=np.float64)
        kind = np.float32 if self.single else np.float64
        xk = xs.astype(kind)
        with np.errstate(over="ignore", invalid="ignore"):
            above = np.nextafter(xk, kind(np.inf)).astype(np.float64) - xs
            below = xs - np.nextafter(xk, kind(-np.inf)).astype(np.float64)
        # the largest finite value has no upper neighbour; mirror the lower gap
        above = np.where(np.isfinite(above), above, below)
        below = np.where(np.isfinite(below), below, above)
        # gaps are powers of two, so the offsets are exact (or round to zero on underflow)
        offsets = us * np.where(us > 0, above, below)
        lows = [as_mpq(lo) for lo, _ in self.real_box]
        highs = [as_mpq(hi) for _, hi in self.real_box]
        out = []
        for f, d in zip(flts, offsets.tolist()):
            fl, real = list(f), []
            for j, x in enumerate(f):
                r = mpq(x) + mpq(d[j])
                # only the outermost floats can leave the real box
                if x == self.box[j][0] or x == self.box[j][1]:
                    if r < lows[j] or r > highs[j]:
                        r = lows[j] if r < lows[j] else highs[j]
                        fl[j] = float(round_nearest(Fraction(int(r.numerator), int(r.denominator)),
                                                    self.fmt))
                real.append(r)
            out.append(Sample(tuple(fl), tuple(real)))
        return out

    def corners(self) -> list[Sample]:
        return self._to_real(self._corners)

    def batch(self, n: int) -> list[Sample]:
        n_bias = int(round(n * self.bias))
        flts: list[tuple] = []
        while len(flts) < n_bias:
            flts.extend(self._near_crossing(min(self.burst, n_bias - len(flts))))
        flts.extend(self._uniform(n - len(flts)))
        return self._to_real(flts[:n])


__all__ = ["MODES", "Sample", "Sampler", "as_mpq", "boundary_exprs", "float_key", "float_range",
           "key_float"]
