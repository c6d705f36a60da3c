"""Fourier transforms between function and spectral windows, and multipliers.

A TestFunction on window (a, l) transforms to a SpectralFunction supported
in the character group ball Gamma^l and constant on Gamma^a-cosets; the
spectral grid is indexed exactly like enumerate_cosets(-l, -a) through the
lambda <-> chi_lambda identification.

The fast path rides numpy's FFT: the padic quotient group P^a / P^l is
cyclic of order p^n, so the transform is a plain DFT; the laurent quotient
is (Z/p)^n, so it is an n-fold tensor DFT (fftn over a (p, ..., p) cube)
followed by a digit-reversal permutation, because the pairing couples digit
i of the point with digit n-1-i of the frequency.  The O(N^2) definition
sums (forward_naive / inverse_naive) are kept as an independent route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .field import FieldConfig, Window
from .functions import TestFunction, refine

_TWO_PI = 2.0 * math.pi


def _frozen(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """Fourier-side data: support in Gamma^l, constant on Gamma^a-cosets (a <= l)."""

    config: FieldConfig
    l: int
    a: int
    values: np.ndarray

    def __post_init__(self):
        if self.a > self.l:
            raise ValueError(f"invalid spectral window: a = {self.a} > l = {self.l}")
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.shape != (self.config.p ** (self.l - self.a),):
            raise ValueError("spectral value count does not match the window")

    @property
    def dual_window(self) -> Window:
        """Indexing window for the frequency representatives."""
        return Window(self.config, -self.l, -self.a)

    def to_dict(self) -> dict:
        return {"l": self.l, "a": self.a,
                "values": [[z.real, z.imag] for z in self.values]}

    @staticmethod
    def from_dict(config: FieldConfig, d: dict) -> "SpectralFunction":
        vals = np.array([complex(re, im) for re, im in d["values"]])
        return SpectralFunction(config, int(d["l"]), int(d["a"]), vals)


def _scale(config: FieldConfig, e: int) -> float:
    return float(Fraction(config.q) ** e)


def _reversed_tensor(config: FieldConfig, values: np.ndarray, n: int) -> np.ndarray:
    """Reshape to the p-ary cube, reverse the digit axes, flatten back."""
    if n == 0:
        return values
    shape = (config.p,) * n
    cube = values.reshape(shape, order="F")
    return np.transpose(cube, axes=tuple(reversed(range(n)))).ravel(order="F")


def forward(f: TestFunction) -> SpectralFunction:
    """fhat(xi) = q^{-l} sum_cells value * conj(chi_xi(cell)), fast path."""
    n = f.l - f.a
    if f.config.mode == "padic":
        spec = np.fft.fft(f.values)
    else:
        shape = (f.config.p,) * n
        cube = np.fft.fftn(f.values.reshape(shape, order="F")) if n else f.values.copy()
        spec = _reversed_tensor(f.config, cube.ravel(order="F"), n)
    return SpectralFunction(f.config, f.l, f.a, spec * _scale(f.config, -f.l))


def inverse(F: SpectralFunction) -> TestFunction:
    """Inverse transform back onto the function window (a, l) = (F.a, F.l)."""
    n = F.l - F.a
    N = F.config.p**n
    if F.config.mode == "padic":
        vals = np.fft.ifft(F.values) * N
    else:
        rev = _reversed_tensor(F.config, F.values, n)
        shape = (F.config.p,) * n
        vals = (np.fft.ifftn(rev.reshape(shape, order="F")) * N).ravel(order="F") if n else rev
    return TestFunction(F.config, F.a, F.l, vals * _scale(F.config, F.a))


def forward_naive(f: TestFunction) -> SpectralFunction:
    """Definition-level O(N^2) character sum; the independent slow route."""
    w = f.window
    N = w.size
    out = np.empty(N, dtype=np.complex128)
    if f.config.mode == "padic":
        roots = np.exp(-1j * _TWO_PI * np.arange(N) / N)
        m = np.arange(N)
        for u in range(N):
            out[u] = roots[(u * m) % N] @ f.values
    else:
        p = f.config.p
        proots = np.exp(-1j * _TWO_PI * np.arange(p) / p)
        digits = w.digit_matrix()
        for u in range(N):
            phase = (digits @ digits[u, ::-1]) % p
            out[u] = proots[phase] @ f.values
    return SpectralFunction(f.config, f.l, f.a, out * _scale(f.config, -f.l))


def inverse_naive(F: SpectralFunction) -> TestFunction:
    w = F.dual_window
    N = w.size
    out = np.empty(N, dtype=np.complex128)
    if F.config.mode == "padic":
        roots = np.exp(1j * _TWO_PI * np.arange(N) / N)
        u = np.arange(N)
        for m in range(N):
            out[m] = roots[(u * m) % N] @ F.values
    else:
        p = F.config.p
        proots = np.exp(1j * _TWO_PI * np.arange(p) / p)
        digits = w.digit_matrix()
        for m in range(N):
            phase = (digits @ digits[m, ::-1]) % p
            out[m] = proots[phase] @ F.values
    return TestFunction(F.config, F.a, F.l, out * _scale(F.config, F.a))


def spectral_valuation_levels(F: SpectralFunction) -> np.ndarray:
    """Per spectral cell: the valuation of its representatives.

    For the zero cell (all frequencies with |xi| <= q^a) the sentinel -a is
    returned, the smallest valuation consistent with every member.
    """
    return F.dual_window.valuation_levels()


def apply_multiplier(f: TestFunction, m) -> TestFunction:
    """F^{-1}(m . F f) for a multiplier given per spectral cell.

    m may be a mapping {cell index: value} covering every cell of f's
    spectral window, or an array of q^{l-a} values in spectral cell order.
    """
    F = forward(f)
    N = F.values.size
    if isinstance(m, dict):
        missing = [u for u in range(N) if u not in m]
        if missing:
            raise ValueError(f"multiplier undefined on spectral cells {missing[:5]}")
        marr = np.array([complex(m[u]) for u in range(N)])
    else:
        marr = np.asarray(m, dtype=np.complex128)
        if marr.shape != (N,):
            raise ValueError(f"multiplier has shape {marr.shape}, expected ({N},)")
    return inverse(SpectralFunction(F.config, F.l, F.a, F.values * marr))


def _bracket_exponents(F: SpectralFunction) -> np.ndarray:
    """Per spectral cell: integer j >= 0 with <xi> = max(1, |xi|) = q^j."""
    return np.maximum(0, -spectral_valuation_levels(F))


def _bracket_power(f: TestFunction, alpha: float) -> TestFunction:
    # the symbol <xi>^alpha is constant per cell only once a <= 0
    g = refine(f, min(f.a, 0), f.l)
    F = forward(g)
    symbol = np.float_power(float(f.config.q), alpha * _bracket_exponents(F))
    return inverse(SpectralFunction(F.config, F.l, F.a, F.values * symbol))


def p_type_derivative(f: TestFunction, alpha: float) -> TestFunction:
    """Multiplier operator with symbol <xi>^alpha, <xi> = max(1, |xi|)."""
    if alpha < 0:
        return p_type_integral(f, -alpha)
    if alpha == 0:
        return f
    return _bracket_power(f, alpha)


def p_type_integral(f: TestFunction, alpha: float) -> TestFunction:
    """Multiplier operator with symbol <xi>^{-alpha}; inverts p_type_derivative."""
    if alpha < 0:
        return p_type_derivative(f, -alpha)
    if alpha == 0:
        return f
    return _bracket_power(f, -alpha)


def spectral_l2_norm(F: SpectralFunction) -> float:
    """L^2 norm of the spectral data under dual Haar measure |Gamma^a| = q^a."""
    s = math.fsum(F.values.real**2) + math.fsum(F.values.imag**2)
    return (s * _scale(F.config, F.a)) ** 0.5
