"""Rough kernels on the unit sphere, atoms, atomic decomposition, Taibleson modulus.

An AngularKernel stores the values of the angular function on the
(q-1) q^{m-1} cells of the unit sphere at digit resolution m.  Cell order:
leading digit c_0 runs from 1 to q-1 outermost, then the remaining digits
(c_1, ..., c_{m-1}) in dictionary order, so c_{m-1} varies fastest.
Evaluation anywhere off 0 routes through the angular part, which makes the
scale invariance structural rather than numerical.

Mean-zero and atom conditions are checked in exact rational arithmetic over
the stored doubles; the projection and atom constructions snap results onto
a dyadic grid so those exact checks genuinely pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .field import FieldConfig, FieldElement, Window, angular_part, prime_shift
from .functions import TestFunction

_ATOM_LAMBDA_MARGIN = 1.0 + 2.0**-40
_GRID_BITS = 48


def sphere_cell_count(config: FieldConfig, m: int) -> int:
    return (config.p - 1) * config.p ** (m - 1)


def _frozen(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


def _component_sum(xs) -> Fraction:
    return sum((Fraction(float(x)) for x in xs), Fraction(0))


def _exactly_mean_zero(values: np.ndarray) -> bool:
    return _component_sum(values.real) == 0 and _component_sum(values.imag) == 0


@dataclass(frozen=True, eq=False)
class AngularKernel:
    """Kernel values on the unit sphere at resolution m; also the shape of an atom."""

    config: FieldConfig
    m: int
    values: np.ndarray
    is_mean_zero: bool

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    @property
    def sup_bound(self) -> Fraction:
        """The atom sup bound (1 - q^{-1})^{-1} = q/(q-1)."""
        return Fraction(self.config.q, self.config.q - 1)

    def to_dict(self) -> dict:
        return {"m": self.m, "values": [[z.real, z.imag] for z in self.values]}

    @staticmethod
    def from_dict(config: FieldConfig, d: dict) -> "AngularKernel":
        vals = np.array([complex(re, im) for re, im in d["values"]])
        return make_kernel(config, vals, int(d["m"]))


def make_kernel(config: FieldConfig, values, m: int) -> AngularKernel:
    """Store kernel values unchanged; the mean-zero flag records the exact check."""
    if m < 1:
        raise ValueError(f"kernel resolution m = {m} must be >= 1")
    vals = np.asarray(values, dtype=np.complex128)
    want = sphere_cell_count(config, m)
    if vals.shape != (want,):
        raise ValueError(f"expected {want} sphere cell values for m = {m}, got {vals.shape}")
    return AngularKernel(config, m, vals, _exactly_mean_zero(vals))


def _digit_reverse(n_digits: int, q: int) -> np.ndarray:
    """Permutation reversing base-q digit order on 0 .. q^n_digits - 1."""
    idx = np.arange(q**n_digits)
    rev = np.zeros_like(idx)
    x = idx.copy()
    for _ in range(n_digits):
        rev = rev * q + x % q
        x //= q
    return rev


def kernel_window_indices(config: FieldConfig, m: int) -> np.ndarray:
    """Map kernel cell -> cell index in the window (0, m) covering the unit ball.

    Window indices are little-endian in the digits (c_0 fastest) while kernel
    cells run c_0 outermost and the tail in dictionary order, so the tail
    digits get reversed.
    """
    q = config.p
    rev = _digit_reverse(m - 1, q)
    lead = np.arange(1, q)
    return (lead[:, None] + q * rev[None, :]).ravel()


def kernel_as_test_function(k: AngularKernel) -> TestFunction:
    """The kernel as a function on the unit ball, zero off the unit sphere."""
    vals = np.zeros(k.config.p**k.m, dtype=np.complex128)
    vals[kernel_window_indices(k.config, k.m)] = k.values
    return TestFunction(k.config, 0, k.m, vals)


def _kernel_cell_index(k: AngularKernel, digits) -> int:
    """Kernel array position for angular digits (c_0, ..., c_{m-1})."""
    q = k.config.p
    tail = 0
    for i in range(1, k.m):
        tail = tail * q + int(digits[i])
    return (int(digits[0]) - 1) * q ** (k.m - 1) + tail


def evaluate_homogeneous(k: AngularKernel, y: FieldElement) -> complex:
    """Kernel value at y via the angular part; invariant under prime shifts of y."""
    if y.is_zero:
        raise ValueError("the homogeneous kernel is undefined at 0")
    u = angular_part(y)
    return complex(k.values[_kernel_cell_index(k, [u.digit_at(i) for i in range(k.m)])])


# -- exact mean-zero snapping -------------------------------------------------


def _snap_component(comp: np.ndarray, order: np.ndarray) -> np.ndarray:
    """Quantize one real component to a dyadic grid with exactly zero sum."""
    amax = float(np.max(np.abs(comp)))
    if amax == 0.0:
        return comp
    e = int(math.ceil(math.log2(amax))) - _GRID_BITS
    ints = np.rint(comp * math.ldexp(1.0, -e)).astype(np.int64)
    r = int(ints.sum())
    if r != 0:
        sign = 1 if r > 0 else -1
        base, rem = divmod(abs(r), ints.size)
        ints -= sign * base
        ints[order[:rem]] -= sign
    return ints.astype(np.float64) * math.ldexp(1.0, e)


def _snap_zero_sum(values: np.ndarray) -> np.ndarray:
    """Snap a complex array so both component sums are exactly zero.

    Residual grid units land on the smallest-modulus cells, which keeps the
    perturbation harmless relative to any sup constraint.
    """
    order = np.argsort(np.hypot(values.real, values.imag), kind="stable")
    return _snap_component(values.real.copy(), order) + 1j * _snap_component(
        values.imag.copy(), order
    )


def mean_zero_project(k: AngularKernel) -> AngularKernel:
    """Subtract the sphere average; exact zero integral, idempotent."""
    if k.is_mean_zero:
        return k
    n = k.values.size
    # exact rational mean so constant kernels land exactly on zero
    mean = complex(
        float(_component_sum(k.values.real) / n), float(_component_sum(k.values.imag) / n)
    )
    out = make_kernel(k.config, _snap_zero_sum(k.values - mean), k.m)
    assert out.is_mean_zero
    return out


# -- atoms --------------------------------------------------------------------


@dataclass(frozen=True)
class AtomCheck:
    valid: bool
    violation: str | None = None  # first failed condition: support | sup_bound | mean


def _sup_bound_holds(values: np.ndarray, config: FieldConfig) -> bool:
    b2 = Fraction(config.q, config.q - 1) ** 2
    return all(
        Fraction(float(re)) ** 2 + Fraction(float(im)) ** 2 <= b2
        for re, im in zip(values.real, values.imag)
    )


def validate_atom(a: AngularKernel | TestFunction) -> AtomCheck:
    """Check the three atom conditions exactly and report the first violation.

    (i) support inside the unit sphere, (ii) sup modulus at most
    (1 - q^{-1})^{-1}, (iii) exact zero mean.
    """
    if isinstance(a, AngularKernel):
        config, values = a.config, a.values
    else:
        config = a.config
        levels = a.window.valuation_levels()
        off_sphere = a.values[levels != 0]
        if off_sphere.size and np.any(off_sphere != 0):
            return AtomCheck(False, "support")
        values = a.values[levels == 0]
    if not _sup_bound_holds(values, config):
        return AtomCheck(False, "sup_bound")
    if not _exactly_mean_zero(values):
        return AtomCheck(False, "mean")
    return AtomCheck(True)


@dataclass(frozen=True, eq=False)
class AtomicDecomposition:
    terms: tuple  # of (lambda_i: float, atom_i: AngularKernel)
    h1_upper_bound: float

    def reconstruction(self, config: FieldConfig, m: int) -> np.ndarray:
        out = np.zeros(sphere_cell_count(config, m), dtype=np.complex128)
        for lam, atom in self.terms:
            out = out + lam * atom.values
        return out


def _scaled_atom(config: FieldConfig, m: int, values: np.ndarray) -> tuple[float, AngularKernel]:
    """Normalize values into lam * atom with the sup saturating its bound."""
    sup = float(np.max(np.hypot(values.real, values.imag)))
    lam = sup * (config.q - 1) / config.q * _ATOM_LAMBDA_MARGIN
    for _ in range(6):
        snapped = _snap_zero_sum(values / lam)
        atom = make_kernel(config, snapped, m)
        if atom.is_mean_zero and _sup_bound_holds(snapped, config):
            return lam, atom
        lam *= 1.0 + 2.0**-38
    raise AssertionError("atom normalization failed to satisfy the sup bound")


def _haar_differences(k: AngularKernel) -> list[np.ndarray]:
    """Martingale differences along the q-ary coset tree of the unit sphere.

    The depth-d conditional average fixes (c_0, ..., c_d) and averages the
    rest; differences of consecutive depths telescope from the exactly-zero
    global average up to the resolution-m values in m levels.
    """
    q = k.config.p
    prev = np.zeros_like(k.values)
    out = []
    for depth in range(k.m):
        # dictionary order puts c_1..c_depth in the high digits of the tail
        cube = k.values.reshape(q - 1, q**depth, q ** (k.m - 1 - depth))
        level = np.broadcast_to(cube.mean(axis=2, keepdims=True), cube.shape)
        level = level.reshape(k.values.shape)
        out.append(level - prev)
        prev = level
    return out


def atomic_decompose(k: AngularKernel, strategy: str = "scaled") -> AtomicDecomposition:
    """Write k as a sum of scalars times valid atoms, exact at resolution m.

    strategy "scaled" (default): a kernel that is already a valid atom is its
    own decomposition with scalar 1; anything else becomes the single atom
    k / lam with lam just above (1 - q^{-1}) sup|k|, saturating the sup
    condition.  The 2^-40 relative margin keeps h1_upper_bound sub-additive
    across sums of kernels to within ~1e-12.

    strategy "haar": one atom per nonzero martingale difference along the
    coset tree; sub-additive by linearity but never the identity on atoms.
    """
    if not k.is_mean_zero:
        raise ValueError("decompose requires a mean-zero kernel; project first")
    if not np.any(k.values != 0):
        return AtomicDecomposition((), 0.0)
    if strategy == "scaled":
        if validate_atom(k).valid:
            return AtomicDecomposition(((1.0, k),), 1.0)
        lam, atom = _scaled_atom(k.config, k.m, k.values)
        return AtomicDecomposition(((lam, atom),), lam)
    if strategy == "haar":
        terms = []
        for diff in _haar_differences(k):
            if not np.any(diff != 0):
                continue
            terms.append(_scaled_atom(k.config, k.m, diff))
        return AtomicDecomposition(tuple(terms), math.fsum(lam for lam, _ in terms))
    raise ValueError(f"unknown decomposition strategy {strategy!r}")


def h1_upper_bound(k: AngularKernel) -> float:
    return atomic_decompose(k).h1_upper_bound


# -- homogeneous extension on windows ------------------------------------------


def shell_piece(k: AngularKernel, j: int, resolution: int | None = None) -> TestFunction:
    """The extended kernel restricted to the shell of radius q^{j+1}.

    The extension is constant on cosets at level m - (j+1) inside that
    shell, so the natural window is (-(j+1), m-(j+1)); a finer resolution
    may be requested for windowed arithmetic against other functions.
    """
    a = -(j + 1)
    natural = k.m + a
    res = natural if resolution is None else resolution
    if res < natural:
        raise ValueError("resolution too coarse for the kernel's angular detail")
    w = Window(k.config, a, res)
    levels = w.valuation_levels()
    digits = w.digit_matrix()
    q = k.config.p
    on_shell = levels == a
    # angular digits of a shell cell are its digits at levels a .. a+m-1
    tail = np.zeros(w.size, dtype=np.int64)
    for i in range(1, k.m):
        tail = tail * q + digits[:, i]
    kidx = (digits[:, 0] - 1) * q ** (k.m - 1) + tail
    vals = np.zeros(w.size, dtype=np.complex128)
    vals[on_shell] = k.values[kidx[on_shell]]
    return TestFunction(k.config, a, res, vals)


# -- Taibleson smoothness modulus ----------------------------------------------


def taibleson_modulus(k: AngularKernel, J: int) -> float:
    """Largest over unit y of the sum over j <= J of the shifted-difference L1 mass.

    Each term integrates |k(x + pi^j y) - k(x)| over the unit sphere.  Terms
    with j >= m vanish identically (the shift stays inside one resolution-m
    cell), so the value stabilizes exactly at J = m - 1.
    """
    if J < 1:
        raise ValueError(f"J = {J} must be >= 1")
    w = Window(k.config, 0, k.m)
    kw = kernel_window_indices(k.config, k.m)
    back = np.full(w.size, -1, dtype=np.int64)
    back[kw] = np.arange(kw.size)
    meas = float(Fraction(k.config.q) ** (-k.m))
    best = 0.0
    for y_cell in kw:
        terms = []
        for j in range(1, min(J, k.m - 1) + 1):
            t = w.index_of(prime_shift(w.element(int(y_cell)), j))
            moved = w.index_add(kw, t)
            diff = k.values[back[moved]] - k.values
            terms.append(math.fsum(np.hypot(diff.real, diff.imag)) * meas)
        best = max(best, math.fsum(terms))
    return best
