"""Calderon-Zygmund decomposition, Littlewood-Paley blocks, and B/F norms.

The CZ stopping time walks the q-ary coset tree below a starting ball and
selects the maximal cosets whose average exceeds the threshold.  Ball
averages of float cell values are exact rationals that floats almost never
represent, so the decomposition keeps its exact core (per-ball averages as
Fractions) next to the float TestFunction views of the good and bad parts;
the views are correctly rounded per cell, and check_cz_clauses evaluates
every lemma clause against the rational core, with no float comparisons
except for the stored-view rounding identities.

Littlewood-Paley blocks are spectral-indicator multipliers: block 0 keeps
every frequency of absolute value at most 1, block j >= 1 keeps the shell
of absolute value q^j.  Besov norms aggregate block r-norms in j; the
Triebel-Lizorkin norms aggregate pointwise in x first.  The two families
coincide when r = t.

verify_unity_decomposition checks the indicator family's support and
partition-of-unity conditions exactly and measures the smoothness-decay
condition empirically, reporting the per-block ratio against the reference
decay rather than asserting a bound.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .field import Ball, FieldConfig, Window
from .fourier import SpectralFunction, forward, inverse, p_type_derivative, spectral_valuation_levels
from .functions import TestFunction, linf_norm, lr_norm, refine


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Calderon-Zygmund decomposition


@dataclass(frozen=True)
class CZDecomposition:
    """Stopping-time split f = bad_part + good_part at threshold lam.

    balls are the selected cosets; ball_averages are their exact rational
    cell averages (the good part's value there).  The float parts are
    correctly rounded views of the exact split; exceptional_measure is the
    exact total Haar measure of the selected balls.
    """

    lam: float
    balls: tuple
    ball_averages: tuple
    bad_part: TestFunction
    good_part: TestFunction
    exceptional_measure: Fraction

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "balls": [{"center": b.center.to_dict(), "scale": b.scale} for b in self.balls],
            "ball_averages": [[a.numerator, a.denominator] for a in self.ball_averages],
            "bad_part": self.bad_part.to_dict(),
            "good_part": self.good_part.to_dict(),
            "exceptional_measure": [
                self.exceptional_measure.numerator,
                self.exceptional_measure.denominator,
            ],
        }


def _real_nonneg_values(f: TestFunction) -> np.ndarray:
    if np.any(f.values.imag != 0):
        raise ValueError("decomposition requires a real-valued function")
    vals = f.values.real
    if np.any(vals < 0):
        raise ValueError("decomposition requires nonnegative values")
    return vals


def _node_cells(total: int, q: int, depth: int, residue: int) -> np.ndarray:
    # cells of the coset fixing the first `depth` digits: indices = residue mod q^depth
    step = q**depth
    return residue + step * np.arange(total // step)


def cz_decompose(f: TestFunction, lam, start_scale: int) -> CZDecomposition:
    """Split a nonnegative f at threshold lam > 0.

    start_scale names the ball the tree walk starts from; it must contain
    the support window of f and carry average at most lam.  Selected balls
    get good_part = ball average and bad_part = f - average; elsewhere
    good_part = f and bad_part = 0.
    """
    lam_fr = Fraction(lam)
    if lam_fr <= 0:
        raise ValueError(f"threshold lambda = {lam} must be positive")
    if start_scale > f.a:
        raise ValueError(
            f"starting ball at scale {start_scale} does not contain the support "
            f"window at scale {f.a}; enlarge the starting ball (start_scale <= {f.a})"
        )
    g = refine(f, start_scale, f.l)
    vals = _real_nonneg_values(g)
    q = f.config.q
    depth_total = g.l - g.a
    n_cells = vals.size

    # exact subtree sums, bottom up; level d has q^d nodes keyed by residue mod q^d
    sums = [None] * (depth_total + 1)
    sums[depth_total] = [Fraction(x) for x in vals]
    for d in range(depth_total - 1, -1, -1):
        step = q**d
        below = sums[d + 1]
        sums[d] = [sum(below[t + c * step] for c in range(q)) for t in range(step)]

    def node_average(d: int, t: int) -> Fraction:
        return sums[d][t] * Fraction(q) ** (g.a + d - g.l)

    root_avg = node_average(0, 0)
    if root_avg > lam_fr:
        raise ValueError(
            f"average {float(root_avg):.6g} over the starting ball exceeds lambda = "
            f"{float(lam_fr):.6g}; enlarge the starting ball or raise the threshold"
        )

    w = Window(f.config, g.a, g.l)
    balls, averages = [], []
    stack = [(0, 0)]
    while stack:
        d, t = stack.pop()
        if d > 0 and node_average(d, t) > lam_fr:
            balls.append(Ball(w.element(t), g.a + d))
            averages.append(node_average(d, t))
            continue
        if d < depth_total:
            step = q**d
            stack.extend((d + 1, t + c * step) for c in range(q))

    bad = np.zeros(n_cells, dtype=np.complex128)
    good = np.array(g.values, dtype=np.complex128)
    for ball, avg in zip(balls, averages):
        cells = _node_cells(n_cells, q, ball.scale - g.a, _node_residue(w, ball))
        good[cells] = float(avg)
        bad[cells] = [float(Fraction(vals[n]) - avg) for n in cells]

    order = np.argsort([w.index_of(b.center) for b in balls])
    balls = tuple(balls[i] for i in order)
    averages = tuple(averages[i] for i in order)
    return CZDecomposition(
        lam=float(lam),
        balls=balls,
        ball_averages=averages,
        bad_part=TestFunction(f.config, g.a, g.l, _frozen(bad)),
        good_part=TestFunction(f.config, g.a, g.l, _frozen(good)),
        exceptional_measure=sum((b.measure for b in balls), Fraction(0)),
    )


def _node_residue(w: Window, ball: Ball) -> int:
    # the tree node of a selected ball: its cell index modulo q^depth
    return w.index_of(ball.center) % w.config.q ** (ball.scale - w.a)


def check_cz_clauses(f: TestFunction, dec: CZDecomposition) -> tuple:
    """Exact-rational audit of every lemma clause and remark clause.

    Returns (clauses, metrics): clauses maps clause names to exact booleans,
    metrics carries the measured quantities (as floats) behind them.
    """
    if f.config != dec.bad_part.config:
        raise ValueError("decomposition belongs to a different field configuration")
    g = refine(f, dec.bad_part.a, dec.bad_part.l)
    vals = _real_nonneg_values(g)
    frs = [Fraction(x) for x in vals]
    q = f.config.q
    lam_fr = Fraction(dec.lam)
    w = Window(f.config, g.a, g.l)
    n_cells = vals.size
    measure = Fraction(q) ** (-g.l)

    ball_cells = [
        _node_cells(n_cells, q, b.scale - g.a, _node_residue(w, b)) for b in dec.balls
    ]
    on_union = np.zeros(n_cells, dtype=bool)
    for cells in ball_cells:
        on_union[cells] = True
    off = np.flatnonzero(~on_union)

    f_l1 = sum((frs[n] for n in range(n_cells)), Fraction(0)) * measure
    bad_l1 = Fraction(0)
    good_sq = sum((frs[n] ** 2 for n in off), Fraction(0))
    good_l1 = sum((frs[n] for n in off), Fraction(0))
    mean_zero = True
    views_rounded = True
    for cells, avg in zip(ball_cells, dec.ball_averages):
        ball_sum = sum((frs[n] for n in cells), Fraction(0))
        mean_zero = mean_zero and ball_sum == len(cells) * avg
        bad_l1 += sum((abs(frs[n] - avg) for n in cells), Fraction(0)) * measure
        good_sq += len(cells) * avg**2
        good_l1 += len(cells) * avg
        fa = float(avg)
        views_rounded = views_rounded and all(
            dec.good_part.values[n] == fa
            and dec.bad_part.values[n] == float(frs[n] - avg)
            for n in cells
        )
    good_sq *= measure
    good_l1 *= measure
    good_sup = max(
        [abs(frs[n]) for n in off] + [abs(a) for a in dec.ball_averages],
        default=Fraction(0),
    )

    off_match = bool(
        np.all(dec.good_part.values[off] == g.values[off])
        and np.all(dec.bad_part.values[off] == 0)
    )
    clauses = {
        "balls_disjoint": all(
            not a.intersects(b)
            for i, a in enumerate(dec.balls)
            for b in dec.balls[i + 1 :]
        ),
        "measure_bound": not dec.balls or dec.exceptional_measure < f_l1 / lam_fr,
        "small_off_union": all(abs(frs[n]) <= lam_fr for n in off),
        "good_bounded_on_union": all(abs(a) <= q * lam_fr for a in dec.ball_averages),
        "good_matches_f_off": off_match,
        "bad_vanishes_off": bool(np.all(dec.bad_part.values[off] == 0)),
        "bad_mean_zero_per_ball": mean_zero,
        "sum_identity": views_rounded,
        "remark_bad_l1_at_most_double": bad_l1 <= 2 * f_l1,
        "remark_bad_l1_within_f_l1": bad_l1 <= f_l1,
        "remark_good_sup": good_sup <= q * lam_fr,
        "remark_good_sq_integrable": good_sq <= q * lam_fr * f_l1,
    }
    float_dev = (
        float(np.max(np.abs(g.values - dec.bad_part.values - dec.good_part.values)))
        if n_cells
        else 0.0
    )
    metrics = {
        "f_l1": float(f_l1),
        "bad_l1": float(bad_l1),
        "good_l1": float(good_l1),
        "good_sup": float(good_sup),
        "good_sq_integral": float(good_sq),
        "exceptional_measure": float(dec.exceptional_measure),
        "ball_count": len(dec.balls),
        "float_view_max_dev": float_dev,
    }
    return clauses, metrics


# ---------------------------------------------------------------------------
# Littlewood-Paley blocks


@dataclass(frozen=True)
class LPBlock:
    """Block j of the spectral-indicator decomposition; block = projection of f."""

    j: int
    block: TestFunction


def _padded(f: TestFunction) -> TestFunction:
    # spectral cells are single frequency shells only once the window reaches scale 0
    return refine(f, min(f.a, 0), f.l) if f.a > 0 else f


def _shell_masks(F: SpectralFunction, js) -> list:
    levels = spectral_valuation_levels(F)
    return [(levels >= 0) if j == 0 else (levels == -j) for j in js]


def littlewood_paley(f: TestFunction, j: int) -> LPBlock:
    """Projection onto frequencies with |xi| = q^j (j >= 1) or |xi| <= 1 (j = 0)."""
    if j < 0:
        raise ValueError(f"block index j = {j} must be nonnegative")
    g = _padded(f)
    if j > max(g.l, 0):
        zeros = np.zeros(g.values.size, dtype=np.complex128)
        return LPBlock(j, TestFunction(g.config, g.a, g.l, _frozen(zeros)))
    F = forward(g)
    (mask,) = _shell_masks(F, [j])
    return LPBlock(j, inverse(SpectralFunction(F.config, F.l, F.a, F.values * mask)))


def _all_blocks(f: TestFunction) -> list:
    # one forward pass shared across blocks; identical per-block code path
    g = _padded(f)
    js = range(max(g.l, 0) + 1)
    F = forward(g)
    return [
        LPBlock(j, inverse(SpectralFunction(F.config, F.l, F.a, F.values * mask)))
        for j, mask in zip(js, _shell_masks(F, js))
    ]


# ---------------------------------------------------------------------------
# Besov / Triebel-Lizorkin / Lebesgue norms


@dataclass(frozen=True)
class NormReport:
    """A computed norm: space "B" (Besov), "F" (Triebel-Lizorkin), or "L" (Lebesgue)."""

    space: str
    s: float
    r: float
    t: float
    value: float

    def to_dict(self) -> dict:
        return {"space": self.space, "s": self.s, "r": self.r, "t": self.t, "value": self.value}

    @staticmethod
    def from_dict(d: dict) -> "NormReport":
        return NormReport(str(d["space"]), float(d["s"]), float(d["r"]), float(d["t"]), float(d["value"]))


def _check_exponents(r: float, t: float):
    if not (r >= 1 and math.isfinite(r)):
        raise ValueError(f"integrability exponent r = {r} must be a finite real >= 1")
    if not (t >= 1 and math.isfinite(t)):
        raise ValueError(f"summation exponent t = {t} must be a finite real >= 1")


def besov_norm(f: TestFunction, s: float, r: float, t: float) -> NormReport:
    """(sum_j q^{sjt} ||block_j||_r^t)^{1/t} over the finitely many live blocks."""
    _check_exponents(r, t)
    q = float(f.config.q)
    terms = [
        q ** (s * b.j * t) * lr_norm(b.block, r) ** t for b in _all_blocks(f)
    ]
    return NormReport("B", float(s), float(r), float(t), math.fsum(terms) ** (1.0 / t))


def triebel_lizorkin_norm(f: TestFunction, s: float, r: float, t: float) -> NormReport:
    """(int (sum_j q^{sjt} |block_j(x)|^t)^{r/t} dx)^{1/r}, blocks on one window."""
    _check_exponents(r, t)
    blocks = _all_blocks(f)
    q = float(f.config.q)
    stacked = np.array(
        [
            q ** (s * b.j * t) * np.hypot(b.block.values.real, b.block.values.imag) ** t
            for b in blocks
        ]
    )
    pointwise = np.sum(stacked, axis=0) ** (r / t)
    l = blocks[0].block.l
    value = (math.fsum(pointwise) * float(Fraction(f.config.q) ** (-l))) ** (1.0 / r)
    return NormReport("F", float(s), float(r), float(t), value)


def lebesgue_norm_report(f: TestFunction, r: float) -> NormReport:
    """L^r norm wrapped in the same report type; s is vacuously 0 and t mirrors r."""
    return NormReport("L", 0.0, float(r), float(r), lr_norm(f, r))


# ---------------------------------------------------------------------------
# Partition-of-unity diagnostics


def verify_unity_decomposition(config: FieldConfig, a: int, l: int, s: float) -> dict:
    """Audit the spectral-indicator family on the window's dual cells.

    Support and partition-of-unity conditions are exact integer checks on
    the masks.  The smoothness condition is measured: for each block j the
    sup of the s-order regularization derivative of the inverse transform
    is reported against the reference decay q^{j(s-1)}, and the largest
    ratio is returned as the empirical constant.  No bound is asserted.
    """
    if s <= 0:
        raise ValueError(f"smoothness order s = {s} must be positive")
    if a > 0:
        raise ValueError(
            f"window scale a = {a} must be at most 0 so block 0 covers the deep spectrum"
        )
    if a > l:
        raise ValueError(f"invalid window: a = {a} > l = {l}")
    probe = TestFunction(
        config, a, l, _frozen(np.zeros(config.q ** (l - a), dtype=np.complex128))
    )
    F = forward(probe)
    levels = spectral_valuation_levels(F)
    js = range(max(l, 0) + 1)
    masks = [m.astype(np.int64) for m in _shell_masks(F, js)]

    support_ok = all(
        bool(np.all(levels[np.flatnonzero(m)] >= 0))
        if j == 0
        else bool(np.all(levels[np.flatnonzero(m)] == -j))
        for j, m in zip(js, masks)
    )
    partition_ok = bool(np.all(sum(masks) == 1))

    blocks = []
    for j, mask in zip(js, masks):
        phi_check = inverse(
            SpectralFunction(config, F.l, F.a, mask.astype(np.complex128))
        )
        measured = linf_norm(p_type_derivative(phi_check, s))
        reference = float(config.q) ** (j * (s - 1.0))
        blocks.append(
            {
                "j": j,
                "measured_sup": measured,
                "reference_decay": reference,
                "ratio": measured / reference,
            }
        )
    return {
        "s": float(s),
        "window": [a, l],
        "support_condition": support_ok,
        "partition_condition": partition_ok,
        "blocks": blocks,
        "empirical_c_s": max(b["ratio"] for b in blocks),
    }
