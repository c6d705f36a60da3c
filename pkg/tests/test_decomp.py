"""Decomposition layer: CZ stopping time, LP blocks, B/F norms, unity family."""

import json
import math
from fractions import Fraction

import numpy as np
import pytest

from localfield.decomp import (
    CZDecomposition,
    LPBlock,
    NormReport,
    besov_norm,
    check_cz_clauses,
    cz_decompose,
    lebesgue_norm_report,
    littlewood_paley,
    triebel_lizorkin_norm,
    verify_unity_decomposition,
)
from localfield.field import Ball, FieldConfig, FieldElement, Window
from localfield.fourier import forward_naive, spectral_valuation_levels
from localfield.functions import (
    TestFunction,
    from_indicator_combo,
    integral,
    linf_norm,
    lr_norm,
    max_difference,
    pointwise_combine,
    refine,
)

from util import CONFIGS


def unit_ball(config: FieldConfig) -> TestFunction:
    return from_indicator_combo(config, [(1.0, Ball(FieldElement.zero(config), 0))])


def random_fn(rng: np.random.Generator, config: FieldConfig, a: int, l: int) -> TestFunction:
    n = config.q ** (l - a)
    vals = rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)
    return TestFunction(config, a, l, vals)


def random_nonneg(rng: np.random.Generator, config: FieldConfig, a: int, l: int,
                  low: float = 0.2) -> TestFunction:
    n = config.q ** (l - a)
    return TestFunction(config, a, l, rng.uniform(low, 1.0, n).astype(np.complex128))


def exact_ball_average(f: TestFunction, ball: Ball) -> Fraction:
    w = Window(f.config, f.a, f.l)
    total = Fraction(0)
    count = 0
    for n in range(f.values.size):
        if ball.contains(w.element(n)):
            total += Fraction(f.values[n].real)
            count += 1
    return total / count


# ---------------------------------------------------------------------------
# CZ decomposition


def test_cz_no_selection_below_threshold():
    for config in CONFIGS[:2]:
        f = refine(unit_ball(config), 0, 2)
        dec = cz_decompose(f, 2.0, 0)
        assert dec.balls == ()
        assert dec.exceptional_measure == 0
        assert np.all(dec.bad_part.values == 0)
        assert np.all(dec.good_part.values == f.values)


def test_cz_concentrated_mass_hand_walk():
    # mass q on the maximal ideal: the two-level walk keeps the root and
    # selects exactly the depth-one coset through zero
    for config in CONFIGS:
        q = config.q
        f = from_indicator_combo(config, [(float(q), Ball(FieldElement.zero(config), 1))])
        dec = cz_decompose(f, 1.0, 0)
        assert len(dec.balls) == 1
        assert dec.balls[0].same_set(Ball(FieldElement.zero(config), 1))
        assert dec.ball_averages == (Fraction(q),)
        assert dec.exceptional_measure == Fraction(1, q)
        g = refine(f, 0, dec.good_part.l)
        assert np.all(dec.good_part.values == g.values)
        assert np.all(dec.bad_part.values == 0)


def test_cz_rejections():
    config = CONFIGS[0]
    f = refine(unit_ball(config), 0, 2)
    with pytest.raises(ValueError):
        cz_decompose(f, 0.0, 0)
    with pytest.raises(ValueError):
        cz_decompose(f, -1.0, 0)
    neg = TestFunction(config, 0, 1, [-1.0, 0.5])
    with pytest.raises(ValueError):
        cz_decompose(neg, 1.0, 0)
    cmplx = TestFunction(config, 0, 1, [1.0 + 1j, 0.5])
    with pytest.raises(ValueError):
        cz_decompose(cmplx, 1.0, 0)
    with pytest.raises(ValueError, match="enlarge"):
        cz_decompose(f, 1.0, 1)  # starting ball misses part of the support
    spike = TestFunction(config, 0, 1, [4.0, 4.0])
    with pytest.raises(ValueError, match="enlarge"):
        cz_decompose(spike, 1.0, 0)  # root average 4 > 1


def test_cz_random_clause_sweep():
    rng = np.random.default_rng(20240211)
    windows = {CONFIGS[0]: (-1, 4), CONFIGS[1]: (0, 3), CONFIGS[2]: (-2, 3), CONFIGS[3]: (0, 3)}
    checked = 0
    selections = 0
    for config in CONFIGS:
        a, l = windows[config]
        for _ in range(25):
            f = random_nonneg(rng, config, a, l)
            mean = sum((Fraction(x) for x in f.values.real), Fraction(0)) / f.values.size
            for factor in (1.02, 1.2, 3.0):
                lam = float(mean) * factor
                dec = cz_decompose(f, lam, a)
                clauses, metrics = check_cz_clauses(f, dec)
                assert all(clauses.values()), {k: v for k, v in clauses.items() if not v}
                assert metrics["float_view_max_dev"] <= 1e-14
                assert dec.exceptional_measure == sum(
                    (b.measure for b in dec.balls), Fraction(0)
                )
                checked += 1
                selections += len(dec.balls)
    assert checked == 300
    assert selections > 100  # the sweep actually exercises selected balls


def test_cz_selected_balls_are_maximal():
    # stopping-time oracle straight from the definition: each selected ball
    # has average > lambda while its parent coset does not
    rng = np.random.default_rng(7)
    for config in CONFIGS[:2]:
        f = random_nonneg(rng, config, 0, 3)
        mean = float(integral(f).real)
        lam = mean * 1.15
        dec = cz_decompose(f, lam, 0)
        assert dec.balls, "sweep needs at least one selection to be meaningful"
        g = refine(f, 0, f.l)
        for ball in dec.balls:
            assert exact_ball_average(g, ball) > Fraction(lam)
            parent = Ball(ball.center, ball.scale - 1)
            assert exact_ball_average(g, parent) <= Fraction(lam)


def test_cz_exceptional_measure_monotone_in_threshold():
    rng = np.random.default_rng(99)
    config = CONFIGS[2]
    f = random_nonneg(rng, config, 0, 4)
    mean = float(integral(f).real)
    lams = [mean * c for c in (1.01, 1.1, 1.4, 2.0, 6.0)]
    measures = [cz_decompose(f, lam, 0).exceptional_measure for lam in lams]
    assert all(m1 >= m2 for m1, m2 in zip(measures, measures[1:]))
    assert measures[-1] == 0  # threshold above the sup selects nothing


def test_cz_spike_breaks_strong_l1_remark_only():
    # one unit spike among zeros: the selected 4-cell ball gives
    # ||bad||_1 = 1.5 ||f||_1, outside the strong remark but inside 2||f||_1
    config = FieldConfig("padic", 2)
    vals = np.zeros(8)
    vals[0] = 1.0
    f = TestFunction(config, 0, 3, vals.astype(np.complex128))
    dec = cz_decompose(f, 0.2, 0)
    assert len(dec.balls) == 1 and dec.balls[0].scale == 1
    clauses, metrics = check_cz_clauses(f, dec)
    assert clauses["remark_bad_l1_within_f_l1"] is False
    assert clauses["remark_bad_l1_at_most_double"]
    for name, ok in clauses.items():
        if name != "remark_bad_l1_within_f_l1":
            assert ok, name
    assert metrics["bad_l1"] == pytest.approx(1.5 * metrics["f_l1"], rel=1e-12)
    assert metrics["float_view_max_dev"] == 0.0  # dyadic averages render exactly


def test_cz_good_l1_reported_for_both_remark_readings():
    rng = np.random.default_rng(3)
    config = CONFIGS[1]
    f = random_nonneg(rng, config, 0, 3)
    lam = float(integral(f).real) * 1.1
    dec = cz_decompose(f, lam, 0)
    _, metrics = check_cz_clauses(f, dec)
    # nonnegative f: averaging preserves total mass, so the good part's
    # L1 matches f's; the bad part's generally does not
    assert metrics["good_l1"] == pytest.approx(metrics["f_l1"], rel=1e-12)


def test_cz_serialization_is_json_ready():
    config = CONFIGS[0]
    q = config.q
    f = from_indicator_combo(config, [(float(q), Ball(FieldElement.zero(config), 1))])
    dec = cz_decompose(f, 1.0, 0)
    blob = json.dumps(dec.to_dict())
    parsed = json.loads(blob)
    assert parsed["lambda"] == 1.0
    assert parsed["ball_averages"] == [[q, 1]]
    assert parsed["exceptional_measure"] == [1, q]


# ---------------------------------------------------------------------------
# Littlewood-Paley blocks


def test_lp_unit_ball_spectrum_and_blocks():
    for config in CONFIGS[:2]:
        f = refine(unit_ball(config), 0, 2)
        F = forward_naive(f)
        levels = spectral_valuation_levels(F)
        mags = np.hypot(F.values.real, F.values.imag)
        assert np.all(mags[levels < 0] <= 1e-12)
        assert np.all(mags[levels >= 0] >= 1 - 1e-12)
        assert max_difference(littlewood_paley(f, 0).block, f) <= 1e-12
        for j in (1, 2):
            assert linf_norm(littlewood_paley(f, j).block) <= 1e-12


def test_lp_blocks_beyond_window_are_exactly_zero():
    config = CONFIGS[3]
    rng = np.random.default_rng(5)
    f = random_fn(rng, config, -1, 2)
    blk = littlewood_paley(f, 5)
    assert blk.j == 5
    assert np.all(blk.block.values == 0)
    assert blk.block.a == -1 and blk.block.l == 2


def test_lp_negative_index_rejected():
    f = unit_ball(CONFIGS[0])
    with pytest.raises(ValueError):
        littlewood_paley(f, -1)


def test_lp_reconstruction_random():
    rng = np.random.default_rng(11)
    for config in CONFIGS:
        for a, l in [(-2, 3), (0, 2), (1, 3), (-3, 0)]:
            f = random_fn(rng, config, a, l)
            blocks = [littlewood_paley(f, j) for j in range(max(l, 0) + 1)]
            total = blocks[0].block
            for b in blocks[1:]:
                total = pointwise_combine(total, "add", b.block)
            assert max_difference(total, f) <= 1e-11


def test_lp_orthogonality_and_idempotence():
    rng = np.random.default_rng(13)
    config = CONFIGS[0]
    f = random_fn(rng, config, -1, 3)
    b2 = littlewood_paley(f, 2).block
    assert linf_norm(littlewood_paley(b2, 1).block) <= 1e-12
    assert max_difference(littlewood_paley(b2, 2).block, b2) <= 1e-11


def test_lp_spectrum_containment():
    rng = np.random.default_rng(17)
    for config in CONFIGS[:2]:
        f = random_fn(rng, config, -1, 3)
        for j in range(4):
            blk = littlewood_paley(f, j).block
            F = forward_naive(blk)
            levels = spectral_valuation_levels(F)
            off = (levels < 0) if j == 0 else (levels != -j)
            assert np.all(np.hypot(F.values.real, F.values.imag)[off] <= 1e-12)


def test_lp_padding_for_positive_scale_window():
    config = CONFIGS[1]
    rng = np.random.default_rng(19)
    f = random_fn(rng, config, 1, 3)  # window strictly inside the maximal ideal
    blk = littlewood_paley(f, 0)
    assert blk.block.a == 0  # padded so the deep spectrum sits in block zero
    blocks = [littlewood_paley(f, j) for j in range(4)]
    total = blocks[0].block
    for b in blocks[1:]:
        total = pointwise_combine(total, "add", b.block)
    assert max_difference(total, f) <= 1e-11


# ---------------------------------------------------------------------------
# Norms


def test_norm_unit_ball_is_one_for_all_exponents():
    f = refine(unit_ball(CONFIGS[0]), 0, 3)
    for s, r, t in [(0.0, 1.0, 1.0), (1.0, 2.0, 2.0), (0.5, 1.5, 3.0), (-1.0, 2.0, 1.0)]:
        rb = besov_norm(f, s, r, t)
        rf = triebel_lizorkin_norm(f, s, r, t)
        assert rb.space == "B" and rf.space == "F"
        assert rb.value == pytest.approx(1.0, abs=1e-11)
        assert rf.value == pytest.approx(1.0, abs=1e-11)


def test_norm_zero_function():
    f = TestFunction.zero(CONFIGS[2], -1, 2)
    assert besov_norm(f, 1.0, 2.0, 2.0).value == 0.0
    assert triebel_lizorkin_norm(f, 1.0, 2.0, 2.0).value == 0.0
    assert lebesgue_norm_report(f, 2.0).value == 0.0


def test_norm_scalar_homogeneity():
    rng = np.random.default_rng(23)
    f = random_fn(rng, CONFIGS[0], -1, 3)
    g = pointwise_combine(f, "scale", 2.0)
    for s, r, t in [(0.0, 2.0, 2.0), (1.0, 1.0, 3.0)]:
        assert besov_norm(g, s, r, t).value == pytest.approx(
            2 * besov_norm(f, s, r, t).value, rel=1e-12
        )
        assert triebel_lizorkin_norm(g, s, r, t).value == pytest.approx(
            2 * triebel_lizorkin_norm(f, s, r, t).value, rel=1e-12
        )


def test_norm_b_equals_f_when_r_equals_t():
    rng = np.random.default_rng(29)
    cases = 0
    for config in CONFIGS:
        for _ in range(25):
            f = random_fn(rng, config, int(rng.integers(-2, 1)), int(rng.integers(1, 4)))
            for rt, s in [(1.0, 0.0), (2.0, 1.0), (3.5, -0.5)]:
                vb = besov_norm(f, s, rt, rt).value
                vf = triebel_lizorkin_norm(f, s, rt, rt).value
                assert abs(vb - vf) <= 1e-11 * (1 + vb)
                cases += 1
    assert cases == 300


def test_norm_besov_matches_per_block_oracle():
    rng = np.random.default_rng(31)
    f = random_fn(rng, CONFIGS[1], -1, 2)
    s, r, t = 0.75, 2.0, 1.5
    q = float(f.config.q)
    terms = [
        q ** (s * j * t) * lr_norm(littlewood_paley(f, j).block, r) ** t
        for j in range(max(f.l, 0) + 1)
    ]
    assert besov_norm(f, s, r, t).value == pytest.approx(
        math.fsum(terms) ** (1 / t), rel=1e-14
    )


def test_norm_monotone_under_top_block_truncation():
    rng = np.random.default_rng(37)
    for config in CONFIGS[:2]:
        f = random_fn(rng, config, 0, 3)
        top = littlewood_paley(f, f.l).block
        dropped = pointwise_combine(f, "add", pointwise_combine(top, "scale", -1.0))
        for s, r, t in [(1.0, 2.0, 2.0), (0.5, 1.0, 2.5)]:
            assert besov_norm(dropped, s, r, t).value <= besov_norm(f, s, r, t).value + 1e-11
            assert (
                triebel_lizorkin_norm(dropped, s, r, t).value
                <= triebel_lizorkin_norm(f, s, r, t).value + 1e-11
            )


def test_norm_exponent_validation():
    f = unit_ball(CONFIGS[0])
    for bad_r, bad_t in [(0.5, 2.0), (2.0, 0.0), (math.inf, 2.0), (2.0, math.inf)]:
        with pytest.raises(ValueError):
            besov_norm(f, 0.0, bad_r, bad_t)
        with pytest.raises(ValueError):
            triebel_lizorkin_norm(f, 0.0, bad_r, bad_t)


def test_norm_report_serialization():
    rep = NormReport("B", 1.0, 2.0, 2.0, 3.25)
    d = json.loads(json.dumps(rep.to_dict()))
    assert d == {"space": "B", "s": 1.0, "r": 2.0, "t": 2.0, "value": 3.25}
    assert NormReport.from_dict(d) == rep


def test_lebesgue_report_wraps_lr_norm():
    rng = np.random.default_rng(41)
    f = random_fn(rng, CONFIGS[3], -1, 2)
    rep = lebesgue_norm_report(f, 2.0)
    assert rep.space == "L" and rep.value == lr_norm(f, 2.0)


# ---------------------------------------------------------------------------
# Partition-of-unity diagnostics


def test_unity_exact_conditions_and_block_zero():
    for config in CONFIGS[:2]:
        report = verify_unity_decomposition(config, -2, 4, 1.0)
        assert report["support_condition"] is True
        assert report["partition_condition"] is True
        assert report["blocks"][0]["measured_sup"] == pytest.approx(1.0, abs=1e-12)
        assert report["blocks"][0]["ratio"] == pytest.approx(1.0, abs=1e-12)


def test_unity_measured_sups_match_difference_of_balls():
    # the inverse of the shell indicator is a difference of scaled ball
    # indicators with sup q^{j-1}(q-1); the s-order derivative multiplies
    # by q^{js} on that shell, so the measured ratio grows like q^{2j}
    s = 1.0
    for config in [FieldConfig("padic", 2), FieldConfig("laurent", 3)]:
        q = config.q
        report = verify_unity_decomposition(config, 0, 6, s)
        for entry in report["blocks"][1:]:
            j = entry["j"]
            expected = float(q) ** (j * s) * float(q) ** (j - 1) * (q - 1)
            assert entry["measured_sup"] == pytest.approx(expected, rel=1e-9)
            assert entry["reference_decay"] == pytest.approx(float(q) ** (j * (s - 1)))
        ratios = [e["ratio"] for e in report["blocks"][1:]]
        growth = [b / a for a, b in zip(ratios, ratios[1:])]
        assert all(g == pytest.approx(q**2, rel=1e-8) for g in growth)
        assert report["empirical_c_s"] == pytest.approx(max(ratios))


def test_unity_rejections():
    config = CONFIGS[0]
    with pytest.raises(ValueError):
        verify_unity_decomposition(config, 0, 3, 0.0)
    with pytest.raises(ValueError):
        verify_unity_decomposition(config, 1, 3, 1.0)
    with pytest.raises(ValueError):
        verify_unity_decomposition(config, 0, -1, 1.0)
