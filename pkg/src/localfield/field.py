"""Exact arithmetic, balls, spheres, and characters for two local-field models.

Supported models: the p-adic numbers (mode "padic", addition with carries) and
the field of formal Laurent series over F_p (mode "laurent", digit-wise
addition mod p).  Elements are finite digit expansions x = sum c_j pi^j with
digits c_j in {0, ..., p-1} and pi the uniformizer.  The residue field has
q = p elements; |x| = q^{-k} where k is the level of the leading digit.

All digit and measure arithmetic is exact (integers and Fractions).  Only
character values, which are points on the unit circle, live in floating point.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

INFINITY = math.inf

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for d in _SMALL_PRIMES:
        if n == d:
            return True
        if n % d == 0:
            return False
    d = 49
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True)
class FieldConfig:
    """Which local field we work in: mode ("padic" or "laurent") and the prime p."""

    mode: str
    p: int

    def __post_init__(self):
        if self.mode not in ("padic", "laurent"):
            raise ValueError(f"unknown mode {self.mode!r}; expected 'padic' or 'laurent'")
        if not _is_prime(self.p):
            raise ValueError(f"p = {self.p} is not prime")

    @property
    def q(self) -> int:
        # residue field size; equal to p under the c = 1 restriction
        return self.p

    def to_dict(self) -> dict:
        return {"mode": self.mode, "p": self.p}

    @staticmethod
    def from_dict(d: dict) -> "FieldConfig":
        return FieldConfig(mode=d["mode"], p=int(d["p"]))


@dataclass(frozen=True)
class FieldElement:
    """A finite digit expansion sum_{j>=level} digits[j-level] * pi^j.

    Canonical form: leading and trailing digits nonzero; the zero element is
    level None with an empty digit tuple.  Construct via FieldElement.make
    (or the helpers below), which normalizes raw digit data.
    """

    config: FieldConfig
    level: int | None
    digits: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.level is None:
            if self.digits:
                raise ValueError("zero element must have empty digits")
            return
        if not self.digits:
            raise ValueError("nonzero element must have at least one digit")
        if self.digits[0] == 0 or self.digits[-1] == 0:
            raise ValueError("digits not in canonical form (leading/trailing zero)")
        if any(d < 0 or d >= self.config.p for d in self.digits):
            raise ValueError(f"digits out of range for p = {self.config.p}")

    @staticmethod
    def make(config: FieldConfig, level: int, digits) -> "FieldElement":
        """Build an element from possibly non-canonical digit data."""
        ds = list(digits)
        while ds and ds[-1] == 0:
            ds.pop()
        lead = 0
        while lead < len(ds) and ds[lead] == 0:
            lead += 1
        if lead == len(ds):
            return FieldElement(config, None, ())
        return FieldElement(config, level + lead, tuple(ds[lead:]))

    @staticmethod
    def zero(config: FieldConfig) -> "FieldElement":
        return FieldElement(config, None, ())

    @staticmethod
    def one(config: FieldConfig) -> "FieldElement":
        return FieldElement(config, 0, (1,))

    @staticmethod
    def from_mantissa(config: FieldConfig, level: int, mantissa: int) -> "FieldElement":
        """Element with base-p expansion of `mantissa` starting at `level`."""
        if mantissa < 0:
            raise ValueError("mantissa must be nonnegative")
        ds = []
        m = mantissa
        while m:
            m, r = divmod(m, config.p)
            ds.append(r)
        return FieldElement.make(config, level, ds)

    @property
    def is_zero(self) -> bool:
        return self.level is None

    def mantissa(self) -> int:
        """The integer sum digits[i] * p^i (0 for the zero element)."""
        m = 0
        for d in reversed(self.digits):
            m = m * self.config.p + d
        return m

    def digit_at(self, j: int) -> int:
        """Digit at level j (0 outside the stored range)."""
        if self.level is None:
            return 0
        i = j - self.level
        if i < 0 or i >= len(self.digits):
            return 0
        return self.digits[i]

    def to_dict(self) -> dict:
        return {"level": self.level, "digits": list(self.digits)}

    @staticmethod
    def from_dict(config: FieldConfig, d: dict) -> "FieldElement":
        if d["level"] is None:
            return FieldElement.zero(config)
        return FieldElement.make(config, int(d["level"]), [int(c) for c in d["digits"]])


def valuation(x: FieldElement) -> int | float:
    """Leading digit level; math.inf for zero, so that |x| = q^{-valuation}."""
    return INFINITY if x.level is None else x.level


def abs_value(x: FieldElement) -> Fraction:
    """Exact absolute value q^{-valuation(x)} as a Fraction (0 for zero)."""
    if x.level is None:
        return Fraction(0)
    return Fraction(x.config.q) ** (-x.level)


def add(x: FieldElement, y: FieldElement) -> FieldElement:
    if x.config != y.config:
        raise ValueError("cannot add elements from different field configurations")
    if x.is_zero:
        return y
    if y.is_zero:
        return x
    cfg = x.config
    k = min(x.level, y.level)
    if cfg.mode == "padic":
        p = cfg.p
        m = x.mantissa() * p ** (x.level - k) + y.mantissa() * p ** (y.level - k)
        return FieldElement.from_mantissa(cfg, k, m)
    top = max(x.level + len(x.digits), y.level + len(y.digits))
    ds = [(x.digit_at(j) + y.digit_at(j)) % cfg.p for j in range(k, top)]
    return FieldElement.make(cfg, k, ds)


def negate(x: FieldElement, truncation_level: int) -> FieldElement:
    """An element congruent to -x modulo P^truncation_level.

    In padic mode -x has an infinite digit tail, so only a truncated negative
    exists as a finite expansion; laurent negation is digit-wise and the
    truncation merely drops levels >= truncation_level.
    """
    if x.is_zero or x.level >= truncation_level:
        return FieldElement.zero(x.config)
    cfg = x.config
    if cfg.mode == "padic":
        n = truncation_level - x.level
        m = x.mantissa() % cfg.p**n
        if m == 0:
            return FieldElement.zero(cfg)
        return FieldElement.from_mantissa(cfg, x.level, cfg.p**n - m)
    ds = [(-x.digit_at(j)) % cfg.p for j in range(x.level, truncation_level)]
    return FieldElement.make(cfg, x.level, ds)


def truncate(x: FieldElement, level: int) -> FieldElement:
    """Drop all digits at levels >= level (i.e. reduce modulo P^level)."""
    if x.is_zero or x.level >= level:
        return FieldElement.zero(x.config)
    return FieldElement.make(x.config, x.level, x.digits[: level - x.level])


def multiply(x: FieldElement, y: FieldElement) -> FieldElement:
    if x.config != y.config:
        raise ValueError("cannot multiply elements from different field configurations")
    if x.is_zero or y.is_zero:
        return FieldElement.zero(x.config)
    cfg = x.config
    k = x.level + y.level
    if cfg.mode == "padic":
        return FieldElement.from_mantissa(cfg, k, x.mantissa() * y.mantissa())
    out = [0] * (len(x.digits) + len(y.digits) - 1)
    for i, a in enumerate(x.digits):
        if a == 0:
            continue
        for j, b in enumerate(y.digits):
            out[i + j] = (out[i + j] + a * b) % cfg.p
    return FieldElement.make(cfg, k, out)


def prime_shift(x: FieldElement, j: int) -> FieldElement:
    """Multiply by pi^j: every digit moves j levels deeper."""
    if x.is_zero:
        return x
    return FieldElement(x.config, x.level + j, x.digits)


def angular_part(x: FieldElement) -> FieldElement:
    """The unit u with x = pi^{valuation(x)} u, so |u| = 1."""
    if x.is_zero:
        raise ValueError("zero has no angular part")
    return FieldElement(x.config, 0, x.digits)


def base_character(z: FieldElement) -> complex:
    """The fixed additive character chi, trivial on D and nontrivial on P^{-1}.

    padic: chi(z) = exp(2 pi i frac(z)) where frac keeps the digits at
    negative levels; laurent: chi(z) = exp(2 pi i c_{-1}(z) / p).
    """
    cfg = z.config
    if cfg.mode == "padic":
        if z.is_zero or z.level >= 0:
            return 1.0 + 0.0j
        den = cfg.p ** (-z.level)
        num = z.mantissa() % den
        if num == 0:
            return 1.0 + 0.0j
        return cmath.exp(2j * math.pi * (num / den))
    c = z.digit_at(-1)
    if c == 0:
        return 1.0 + 0.0j
    return cmath.exp(2j * math.pi * (c / cfg.p))


def character(lam: FieldElement, x: FieldElement) -> complex:
    """chi_lambda(x) = chi(lambda x)."""
    return base_character(multiply(lam, x))


def enumerate_cosets(config: FieldConfig, a: int, l: int) -> list[FieldElement]:
    """Canonical representatives of the q^{l-a} cosets of P^l inside P^a.

    Representative n carries the base-p digits of n at levels a, a+1, ...,
    l-1, least-significant digit at level a.  This ordering is the indexing
    contract for all value arrays in the package.
    """
    if a > l:
        raise ValueError(f"invalid window: a = {a} > l = {l}")
    return [FieldElement.from_mantissa(config, a, n) for n in range(config.p ** (l - a))]


@dataclass(frozen=True)
class Ball:
    """The set center + P^scale, of exact Haar measure q^{-scale}."""

    center: FieldElement
    scale: int

    @property
    def config(self) -> FieldConfig:
        return self.center.config

    @property
    def measure(self) -> Fraction:
        return Fraction(self.config.q) ** (-self.scale)

    def canonical_center(self) -> FieldElement:
        return truncate(self.center, self.scale)

    def contains(self, x: FieldElement) -> bool:
        # |x - center| <= q^{-scale} iff the digit expansions agree below scale
        return truncate(x, self.scale) == self.canonical_center()

    def same_set(self, other: "Ball") -> bool:
        return self.scale == other.scale and self.contains(other.center)

    def disjoint_or_nested(self, other: "Ball") -> bool:
        """Ultrametric dichotomy; True unless the balls partially overlap."""
        inner, outer = (self, other) if self.scale >= other.scale else (other, self)
        return outer.contains(inner.center) or not inner.intersects(outer)

    def intersects(self, other: "Ball") -> bool:
        inner, outer = (self, other) if self.scale >= other.scale else (other, self)
        return outer.contains(inner.center)


@dataclass(frozen=True)
class Sphere:
    """A_j = {y : |y| = q^{j+1}} = P^{-(j+1)} minus P^{-j}; A_{-1} is the unit sphere."""

    config: FieldConfig
    radius_exponent: int

    @property
    def measure(self) -> Fraction:
        q = Fraction(self.config.q)
        return q ** (self.radius_exponent + 1) * (1 - 1 / q)

    def contains(self, x: FieldElement) -> bool:
        return (not x.is_zero) and x.level == -(self.radius_exponent + 1)

    def coset_representatives(self, resolution: int) -> list[FieldElement]:
        """Representatives of the P^resolution-cosets that tile this sphere."""
        a = -(self.radius_exponent + 1)
        if resolution < a:
            raise ValueError("resolution coarser than the sphere radius")
        return [x for x in enumerate_cosets(self.config, a, resolution)
                if not x.is_zero and x.level == a]


class Window:
    """Indexing helper for the coset grid of P^l inside P^a.

    Cell n corresponds to enumerate_cosets(a, l)[n]; index arithmetic below
    realizes the quotient group P^a / P^l (cyclic Z/p^n for padic, (Z/p)^n
    for laurent) without leaving integer land.
    """

    def __init__(self, config: FieldConfig, a: int, l: int):
        if a > l:
            raise ValueError(f"invalid window: a = {a} > l = {l}")
        self.config = config
        self.a = a
        self.l = l
        self.n = l - a
        self.size = config.p**self.n

    def __eq__(self, other):
        return (isinstance(other, Window)
                and (self.config, self.a, self.l) == (other.config, other.a, other.l))

    def __repr__(self):
        return f"Window({self.config.mode}, p={self.config.p}, a={self.a}, l={self.l})"

    def element(self, n: int) -> FieldElement:
        return FieldElement.from_mantissa(self.config, self.a, n)

    def index_of(self, x: FieldElement) -> int | None:
        """Cell index of x, or None when x lies outside P^a.

        Digits at levels >= l are ignored (x is reduced modulo P^l first).
        """
        if x.is_zero:
            return 0
        if x.level < self.a:
            return None
        n = 0
        for j in range(self.l - 1, self.a - 1, -1):
            n = n * self.config.p + x.digit_at(j)
        return n

    # -- vectorized index arithmetic -------------------------------------

    def digit_matrix(self) -> np.ndarray:
        """(size, n) array, row i = base-p digits of i, least significant first."""
        p = self.config.p
        idx = np.arange(self.size)
        out = np.empty((self.size, self.n), dtype=np.int64)
        for d in range(self.n):
            idx, out[:, d] = np.divmod(idx, p)
        return out

    def _recompose(self, digits: np.ndarray) -> np.ndarray:
        p = self.config.p
        out = np.zeros(digits.shape[:-1], dtype=np.int64)
        for d in range(self.n - 1, -1, -1):
            out = out * p + digits[..., d]
        return out

    def index_add(self, i, j):
        if self.config.mode == "padic":
            return (np.asarray(i) + np.asarray(j)) % self.size
        di = self.digit_matrix()[np.asarray(i)]
        dj = self.digit_matrix()[np.asarray(j)]
        return self._recompose((di + dj) % self.config.p)

    def index_sub(self, i, j):
        if self.config.mode == "padic":
            return (np.asarray(i) - np.asarray(j)) % self.size
        di = self.digit_matrix()[np.asarray(i)]
        dj = self.digit_matrix()[np.asarray(j)]
        return self._recompose((di - dj) % self.config.p)

    def index_neg(self, i):
        if self.config.mode == "padic":
            return (-np.asarray(i)) % self.size
        return self._recompose((-self.digit_matrix()[np.asarray(i)]) % self.config.p)

    def sub_table(self) -> np.ndarray:
        """(size, size) table T[i, j] = index of element_i - element_j."""
        idx = np.arange(self.size)
        if self.config.mode == "padic":
            return (idx[:, None] - idx[None, :]) % self.size
        dm = self.digit_matrix()
        return self._recompose((dm[:, None, :] - dm[None, :, :]) % self.config.p)

    def valuation_levels(self) -> np.ndarray:
        """Per cell: valuation of every element in the cell, l for the zero cell.

        Cell n != 0 consists of elements sharing the leading digit position,
        so valuation is constant = a + (position of lowest nonzero digit).
        The zero cell is P^l, where valuation >= l; the sentinel l is returned.
        """
        if self.n == 0:
            return np.array([self.l])
        dm = self.digit_matrix()
        nz = dm != 0
        first = np.where(nz.any(axis=1), nz.argmax(axis=1), self.n)
        return self.a + first
