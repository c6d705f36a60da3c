"""Locally constant, compactly supported complex functions on a local field.

A TestFunction lives on a window (a, l): support inside the ball P^a,
constant on cosets of P^l.  Its q^{l-a} cell values follow the coset order
of field.enumerate_cosets(a, l).  All window bookkeeping is exact; values
are complex doubles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .field import Ball, FieldConfig, FieldElement, Window, truncate, valuation

# direct summation below this many cells, FFT pointwise-multiply above
DIRECT_CONV_CELL_LIMIT = 256


def _frozen(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TestFunction:
    __test__ = False  # keep pytest from collecting this as a test case

    config: FieldConfig
    a: int
    l: int
    values: np.ndarray

    def __post_init__(self):
        if self.a > self.l:
            raise ValueError(f"invalid window: a = {self.a} > l = {self.l}")
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != (self.config.p ** (self.l - self.a),):
            raise ValueError(
                f"expected {self.config.p ** (self.l - self.a)} cell values, got {self.values.shape}")

    @property
    def window(self) -> Window:
        return Window(self.config, self.a, self.l)

    @property
    def cell_measure(self) -> Fraction:
        return Fraction(self.config.q) ** (-self.l)

    @staticmethod
    def zero(config: FieldConfig, a: int = 0, l: int = 0) -> "TestFunction":
        return TestFunction(config, a, l, np.zeros(config.p ** (l - a)))

    def to_dict(self) -> dict:
        return {"a": self.a, "l": self.l,
                "values": [[z.real, z.imag] for z in self.values]}

    @staticmethod
    def from_dict(config: FieldConfig, d: dict) -> "TestFunction":
        vals = np.array([complex(re, im) for re, im in d["values"]])
        return TestFunction(config, int(d["a"]), int(d["l"]), vals)


def from_indicator_combo(config: FieldConfig, terms: list) -> TestFunction:
    """Build sum_i coeff_i * indicator(ball_i) as a windowed function.

    terms is a list of (coefficient, Ball) pairs; the empty list gives the
    zero function on the trivial window.
    """
    if not terms:
        return TestFunction.zero(config)
    a = min(min(term[1].scale, valuation(term[1].center)) for term in terms)
    a = int(a)  # valuation may be math.inf; the min with scale is an int
    l = max(a, max(term[1].scale for term in terms))
    w = Window(config, a, l)
    vals = np.zeros(w.size, dtype=np.complex128)
    idx = np.arange(w.size)
    for coeff, ball in terms:
        if ball.config != config:
            raise ValueError("ball does not belong to the given field configuration")
        center = truncate(ball.center, ball.scale)
        if ball.scale <= a:
            if center.is_zero:
                vals += coeff
            continue
        ic = Window(config, a, ball.scale).index_of(center)
        if ic is None:
            # ball lies outside P^a; impossible given how a was chosen
            raise AssertionError("indicator ball escaped the window")
        vals[idx % config.p ** (ball.scale - a) == ic] += coeff
    return TestFunction(config, a, l, vals)


def evaluate(f: TestFunction, x: FieldElement) -> complex:
    idx = f.window.index_of(x)
    return 0j if idx is None else complex(f.values[idx])


def refine(f: TestFunction, a_new: int, l_new: int) -> TestFunction:
    """Re-represent f on a finer window (a_new <= a, l_new >= l); exact."""
    if a_new > f.a or l_new < f.l:
        raise ValueError("refine can only extend the window")
    if (a_new, l_new) == (f.a, f.l):
        return f
    p = f.config.p
    pad, sup = p ** (f.a - a_new), p ** (f.l - f.a)
    idx = np.arange(p ** (l_new - a_new))
    inside = idx % pad == 0
    vals = np.where(inside, f.values[(idx // pad) % sup], 0)
    return TestFunction(f.config, a_new, l_new, vals)


def coarsen_resolution(f: TestFunction, l_new: int) -> TestFunction:
    """Drop resolution to l_new < l by averaging sibling cells.

    Exact only when f really is constant on P^{l_new}-cosets; callers assert
    that (the group mean then reproduces the common value).
    """
    if l_new < f.a or l_new > f.l:
        raise ValueError("l_new outside [a, l]")
    p = f.config.p
    vals = f.values.reshape(p ** (f.l - l_new), p ** (l_new - f.a)).mean(axis=0)
    return TestFunction(f.config, f.a, l_new, vals)


def restrict_support(f: TestFunction, a_new: int) -> TestFunction:
    """Multiply by the indicator of P^{a_new} (a_new >= a); exact."""
    if a_new < f.a:
        raise ValueError("restrict_support cannot grow the support ball")
    if a_new > f.l:
        # the whole new support ball sits inside f's zero cell
        return TestFunction(f.config, a_new, a_new, np.array([f.values[0]]))
    stride = f.config.p ** (a_new - f.a)
    idx = np.arange(f.config.p ** (f.l - a_new)) * stride
    return TestFunction(f.config, a_new, f.l, f.values[idx])


def translate(f: TestFunction, h: FieldElement) -> TestFunction:
    """g with g(x) = f(x - h); support ball grows to contain the shift."""
    if h.is_zero:
        return f
    a_new = min(f.a, h.level)
    g = refine(f, a_new, f.l) if a_new < f.a else f
    w = g.window
    hi = w.index_of(h)
    vals = g.values[w.index_sub(np.arange(w.size), hi)]
    return TestFunction(f.config, a_new, g.l, vals)


def lr_norm(f: TestFunction, r: float) -> float:
    """(sum_cells |v|^r q^{-l})^{1/r}; fsum keeps it permutation-invariant."""
    if r < 1:
        raise ValueError(f"r = {r} < 1 is not a norm exponent here")
    mags = np.hypot(f.values.real, f.values.imag)
    if r == 2:
        s = math.fsum(f.values.real**2) + math.fsum(f.values.imag**2)
    elif r == 1:
        s = math.fsum(mags)
    else:
        s = math.fsum(mags**r)
    return (s * float(Fraction(f.config.q) ** (-f.l))) ** (1.0 / r)


def linf_norm(f: TestFunction) -> float:
    if f.values.size == 0:
        return 0.0
    return float(np.max(np.hypot(f.values.real, f.values.imag)))


def weak_level_measure(f: TestFunction, lam: float) -> Fraction:
    """Exact Haar measure of {x : |f(x)| > lam}."""
    if lam <= 0:
        raise ValueError(f"level lambda = {lam} must be positive")
    count = int(np.count_nonzero(np.hypot(f.values.real, f.values.imag) > lam))
    return count * Fraction(f.config.q) ** (-f.l)


def integral(f: TestFunction) -> complex:
    """int f dHaar = q^{-l} sum of cell values."""
    s = complex(math.fsum(f.values.real), math.fsum(f.values.imag))
    return s * float(Fraction(f.config.q) ** (-f.l))


def common_refinement(f: TestFunction, g: TestFunction) -> tuple[TestFunction, TestFunction]:
    if f.config != g.config:
        raise ValueError("functions live over different field configurations")
    a, l = min(f.a, g.a), max(f.l, g.l)
    return refine(f, a, l), refine(g, a, l)


def pointwise_combine(f: TestFunction, op: str, other) -> TestFunction:
    """op = "add": other is a TestFunction; op = "scale": other is a scalar."""
    if op == "add":
        rf, rg = common_refinement(f, other)
        return TestFunction(f.config, rf.a, rf.l, rf.values + rg.values)
    if op == "scale":
        return TestFunction(f.config, f.a, f.l, f.values * complex(other))
    raise ValueError(f"unknown pointwise op {op!r}")


def _group_convolve(config: FieldConfig, w: Window, fv: np.ndarray, gv: np.ndarray) -> np.ndarray:
    """sum_j fv[j] * gv[i - j] over the quotient group P^a / P^l."""
    if w.size <= DIRECT_CONV_CELL_LIMIT:
        return gv[w.sub_table()] @ fv
    if config.mode == "padic":
        return np.fft.ifft(np.fft.fft(fv) * np.fft.fft(gv))
    shape = (config.p,) * w.n
    ft = np.fft.fftn(fv.reshape(shape, order="F"))
    gt = np.fft.fftn(gv.reshape(shape, order="F"))
    return np.fft.ifftn(ft * gt).ravel(order="F")


def convolve(f: TestFunction, g: TestFunction) -> TestFunction:
    """Exact group convolution (f * g)(x) = int f(y) g(x - y) dy.

    Both factors are supported in P^{min(a_f, a_g)}, a subgroup, so the
    quotient-group convolution at the common refinement needs no wraparound
    correction.  Small windows use a direct gather-sum, larger ones the
    transform path.
    """
    rf, rg = common_refinement(f, g)
    w = rf.window
    vals = _group_convolve(f.config, w, rf.values, rg.values)
    return TestFunction(f.config, rf.a, rf.l, vals * float(Fraction(f.config.q) ** (-rf.l)))


def max_difference(f: TestFunction, g: TestFunction) -> float:
    rf, rg = common_refinement(f, g)
    d = rf.values - rg.values
    return float(np.max(np.hypot(d.real, d.imag))) if d.size else 0.0


def functions_agree(f: TestFunction, g: TestFunction, tol: float = 0.0) -> bool:
    return max_difference(f, g) <= tol


def canonicalize(f: TestFunction) -> TestFunction:
    """Smallest window representing the same function (exact tests only)."""
    g = f
    p = g.config.p
    # coarsen while every sibling group is exactly constant
    while g.l > g.a:
        grouped = g.values.reshape(p, p ** (g.l - 1 - g.a))
        if not np.all(grouped == grouped[0]):
            break
        g = TestFunction(g.config, g.a, g.l - 1, grouped[0])
    # shrink support while the outer cells are exactly zero
    while g.a < g.l:
        stride = p
        keep = np.arange(p ** (g.l - g.a - 1)) * stride
        outside = np.setdiff1d(np.arange(g.values.size), keep)
        if np.any(g.values[outside] != 0):
            break
        g = TestFunction(g.config, g.a + 1, g.l, g.values[keep])
    return g
