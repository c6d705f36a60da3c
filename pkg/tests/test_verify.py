"""Verification harness: corpus determinism, ratio protocols, report plumbing."""

import json
import math
from fractions import Fraction

import numpy as np
import pytest

from localfield.field import Ball, FieldConfig, FieldElement, Window, add, negate
from localfield.functions import (
    TestFunction,
    evaluate,
    from_indicator_combo,
    lr_norm,
    max_difference,
    pointwise_combine,
    refine,
)
from localfield.kernels import (
    evaluate_homogeneous,
    make_kernel,
    mean_zero_project,
    shell_piece,
    sphere_cell_count,
)
from localfield.operators import TruncationSpec, apply_atom_operator, apply_truncated
from localfield.verify import (
    Corpus,
    OperatorNormEstimate,
    check_besov_tl_theorem,
    check_l2_and_weak11,
    check_lebesgue_theorem,
    check_taibleson_class,
    emit_report,
    exact_checks_pass,
    generate_corpus,
    k_stability,
    run_verification,
)

Q2 = FieldConfig("padic", 2)
L3 = FieldConfig("laurent", 3)


def naive_sphere_sum(f, kern, j, x):
    config = f.config
    level = max(f.l, kern.m - (j + 1))
    w = Window(config, -(j + 1), level)
    cells = np.flatnonzero(w.valuation_levels() == -(j + 1))
    total = 0j
    for ci in cells:
        y = w.element(int(ci))
        total += evaluate(f, add(x, negate(y, level))) * evaluate_homogeneous(kern, y)
    return total * float(Fraction(config.q) ** (-level))


def naive_truncated(f, kern, spec):
    config = f.config
    w = Window(config, spec.out_a, spec.out_l)
    jmax = -min(spec.out_a, f.a) - 1
    out = np.zeros(w.size, dtype=complex)
    for i in range(w.size):
        x = w.element(i)
        out[i] = sum(
            float(Fraction(config.q) ** (-(j + 1))) * naive_sphere_sum(f, kern, j, x)
            for j in range(spec.k, jmax + 1)
        )
    return TestFunction(config, spec.out_a, spec.out_l, out)


def small_corpus(config=Q2, count=3, window=(-2, 2), resolutions=(2,), seed=42):
    return generate_corpus(config, seed, count, window, resolutions)


def with_functions(corpus, functions):
    return Corpus(corpus.config, corpus.seed, corpus.window, tuple(functions),
                  corpus.kernels, corpus.description)


def with_kernels(corpus, kernels):
    return Corpus(corpus.config, corpus.seed, corpus.window, corpus.functions,
                  tuple(kernels), corpus.description)


# ---------------------------------------------------------------------------
# corpus


def test_corpus_deterministic_regeneration():
    for config in (Q2, L3):
        c1 = generate_corpus(config, 7, 6, (-2, 2), (2, 3))
        c2 = generate_corpus(config, 7, 6, (-2, 2), (2, 3))
        assert c1.description == c2.description
        for f1, f2 in zip(c1.functions, c2.functions):
            assert np.array_equal(f1.values, f2.values)
        for k1, k2 in zip(c1.kernels, c2.kernels):
            assert k1.m == k2.m and np.array_equal(k1.values, k2.values)
    c3 = generate_corpus(Q2, 8, 6, (-2, 2), (2, 3))
    assert not np.array_equal(c3.functions[2].values,
                              generate_corpus(Q2, 7, 6, (-2, 2), (2, 3)).functions[2].values)


def test_corpus_count_fixtures_and_mean_zero():
    corpus = generate_corpus(Q2, 42, 5, (-2, 2), (2, 3, 4))
    assert len(corpus.functions) == 5
    assert len(corpus.kernels) == 5  # two fixtures plus one per resolution
    unit = refine(from_indicator_combo(Q2, [(1.0, Ball(FieldElement.zero(Q2), 0))]), -2, 2)
    ideal = refine(from_indicator_combo(Q2, [(1.0, Ball(FieldElement.zero(Q2), 1))]), -2, 2)
    assert np.array_equal(corpus.functions[0].values, unit.values)
    assert np.array_equal(corpus.functions[1].values, ideal.values)
    assert all(k.is_mean_zero for k in corpus.kernels)
    assert all(f.a == -2 and f.l == 2 for f in corpus.functions)


def test_corpus_rejections():
    with pytest.raises(ValueError):
        generate_corpus(Q2, 42, 0, (-2, 2), (2,))
    with pytest.raises(ValueError):
        generate_corpus(Q2, 42, 3, (1, 2), (2,))
    with pytest.raises(ValueError):
        generate_corpus(Q2, 42, 3, (-2, 0), (2,))


# ---------------------------------------------------------------------------
# Lebesgue protocol


def test_lebesgue_rejects_endpoint_exponents():
    corpus = small_corpus()
    for bad in (1.0, 0.5, math.inf):
        with pytest.raises(ValueError):
            check_lebesgue_theorem(corpus, [0], [bad])


def test_lebesgue_zero_kernel_rows_vanish():
    corpus = small_corpus()
    zero = make_kernel(Q2, np.zeros(sphere_cell_count(Q2, 2)), 2)
    corpus = with_kernels(corpus, list(corpus.kernels) + [zero])
    est = check_lebesgue_theorem(corpus, [-1, 0], [2.0])
    zero_id = f"w{len(corpus.kernels) - 1}"
    zero_rows = [row for row in est.ratio_table if row[0].endswith(zero_id)]
    assert zero_rows and all(row[3] == 0.0 for row in zero_rows)
    assert est.sup_ratio == max(row[3] for row in est.ratio_table)
    assert est.fitted_constant == est.sup_ratio
    assert all(row[3] >= 0 for row in est.ratio_table)


def test_lebesgue_fixture_ratios_match_naive_oracle():
    corpus = small_corpus(count=2)  # exactly the two indicator fixtures
    est = check_lebesgue_theorem(corpus, [-1, 0], [2.0])
    table = {(row[0], row[1]): row[3] for row in est.ratio_table}
    from localfield.kernels import h1_upper_bound
    from localfield.verify import _output_spec

    for fi, f in enumerate(corpus.functions):
        for ki, kern in enumerate(corpus.kernels):
            h1 = h1_upper_bound(kern)
            for k in (-1, 0):
                spec = _output_spec(f, kern.m, k)
                oracle = naive_truncated(f, kern, spec)
                denom = float(Fraction(Q2.q) ** (-k)) * h1 * lr_norm(f, 2)
                want = lr_norm(oracle, 2) / denom
                got = table[(f"f{fi}.w{ki}", k)]
                assert got == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_lebesgue_ratio_invariant_under_scaling():
    corpus = small_corpus(count=3)
    est = check_lebesgue_theorem(corpus, [0], [1.5, 2.0])
    scaled_f = with_functions(
        corpus, [pointwise_combine(f, "scale", 5.0) for f in corpus.functions]
    )
    est_f = check_lebesgue_theorem(scaled_f, [0], [1.5, 2.0])
    for row, row_f in zip(est.ratio_table, est_f.ratio_table):
        assert row_f[3] == pytest.approx(row[3], rel=1e-12)

    # kernel scaling cancels through the h1 bound in the non-atom regime
    base = make_kernel(Q2, [4.0, -4.0], 2)
    scaled = make_kernel(Q2, [20.0, -20.0], 2)
    est_k = check_lebesgue_theorem(with_kernels(corpus, [base]), [0], [2.0])
    est_k5 = check_lebesgue_theorem(with_kernels(corpus, [scaled]), [0], [2.0])
    for row, row5 in zip(est_k.ratio_table, est_k5.ratio_table):
        assert row5[3] == pytest.approx(row[3], rel=1e-12)


def test_k_stability_summaries():
    rows = [("f0.w0", -1, 2.0, 0.5), ("f0.w0", 0, 2.0, 1.0), ("f1.w0", 0, 2.0, 0.9)]
    est = OperatorNormEstimate(tuple(rows), 1.0, 1.0)
    stab = k_stability(est, 4.0)
    assert stab["per_k"] == {"-1": 0.5, "0": 1.0}
    assert stab["spread"] == 2.0 and stab["pass"]
    assert not k_stability(est, 2.0)["pass"]
    single = OperatorNormEstimate((("f0.w0", 0, 2.0, 0.7),), 0.7, 0.7)
    assert k_stability(single)["spread"] == 1.0
    dead_k = OperatorNormEstimate((("f0.w0", 0, 2.0, 0.7), ("f0.w0", 1, 2.0, 0.0)), 0.7, 0.7)
    assert k_stability(dead_k)["spread"] == math.inf


def test_telescoping_shells_between_truncations():
    # T_k f - T_{k+1} f is exactly the weight-q^{-(k+1)} shell convolution
    from localfield.functions import convolve

    corpus = small_corpus(count=3)
    f = corpus.functions[2]
    kern = corpus.kernels[2]
    for k in (-2, -1, 0):
        spec = TruncationSpec(k, f.a - 1, max(f.l, kern.m - (k + 1), f.a - 1))
        spec_up = TruncationSpec(k + 1, spec.out_a, spec.out_l)
        t_low = apply_truncated(f, kern, spec)
        t_high = apply_truncated(f, kern, spec_up)
        diff = pointwise_combine(t_low, "add", pointwise_combine(t_high, "scale", -1.0))
        shell = pointwise_combine(
            convolve(shell_piece(kern, k), f),
            "scale",
            float(Fraction(Q2.q) ** (-(k + 1))),
        )
        assert max_difference(diff, shell) <= 1e-12


# ---------------------------------------------------------------------------
# Besov / TL protocol


def test_besov_tl_rejects_bad_parameters():
    corpus = small_corpus()
    for bad in [(0.0, 2.0, 2.0), (0.5, 1.0, 2.0), (0.5, 2.0, math.inf)]:
        with pytest.raises(ValueError):
            check_besov_tl_theorem(corpus, [0], [bad])


def test_besov_tl_f_equals_b_at_matching_exponents():
    corpus = small_corpus(count=4)
    est, _ = check_besov_tl_theorem(corpus, [-1, 0], [(0.5, 2.0, 2.0), (1.0, 1.5, 3.0)])
    by_key = {}
    for entry, k, param, ratio in est.ratio_table:
        by_key[(entry, k, param)] = ratio
    for (entry, k, param), ratio in by_key.items():
        space, s, r, t = param
        if space == "B" and r == t:
            assert ratio == pytest.approx(by_key[(entry, k, ("F", s, r, t))], rel=1e-10)


def test_besov_tl_zero_kernel_and_piece_readings():
    corpus = small_corpus(count=3)
    zero = make_kernel(Q2, np.zeros(sphere_cell_count(Q2, 2)), 2)
    est, pieces = check_besov_tl_theorem(
        with_kernels(corpus, list(corpus.kernels) + [zero]), [0], [(0.5, 2.0, 2.0)]
    )
    zero_rows = [r for r in est.ratio_table if r[0].endswith("w3")]
    assert zero_rows and all(r[3] == 0.0 for r in zero_rows)
    readings = {(p["reading"], p["j"]) for p in pieces}
    assert readings == {("B", -1), ("A", 0), ("A", 1)}
    assert all(p["ratio"] <= 1 + 1e-10 for p in pieces if p["reading"] == "B")
    assert all(p["ratio"] >= 0 for p in pieces)


def test_piece_bound_reading_a_can_exceed_one():
    # homogeneous extension across a growing shell carries L1 mass q^{j+1};
    # the unit-sphere bound genuinely fails under reading A at j >= 0
    corpus = small_corpus(count=3)
    _, pieces = check_besov_tl_theorem(corpus, [0], [(0.5, 2.0, 2.0)])
    a_ratios = [p["ratio"] for p in pieces if p["reading"] == "A" and p["j"] == 1]
    assert max(a_ratios) > 1


# ---------------------------------------------------------------------------
# L2 / weak-(1,1) instrumentation


def test_l2_weak_validation_and_zero_atoms():
    corpus = small_corpus()
    with pytest.raises(ValueError):
        check_l2_and_weak11(corpus, [0], [0.0])
    zero = make_kernel(Q2, np.zeros(sphere_cell_count(Q2, 2)), 2)
    empty = check_l2_and_weak11(with_kernels(corpus, [zero]), [0], [1.0])
    assert empty["rows"] == []
    assert all(rec["measured"] == 0.0 and rec["pass"] for rec in empty["records"])


def test_l2_weak_fixture_against_brute_force():
    corpus = small_corpus(count=1)  # just the unit ball indicator
    f = corpus.functions[0]
    atom = corpus.kernels[1]  # the balanced two-ball atom
    report = check_l2_and_weak11(with_kernels(corpus, [atom]), [0], [0.25, 100.0])
    rows = report["rows"]
    reading_a_l2 = [r for r in rows if r["check"] == "l2" and r["reading"] == "A"]
    assert len(reading_a_l2) == 1
    from localfield.verify import _output_spec

    spec = _output_spec(f, atom.m, 0)
    oracle = naive_truncated(f, atom, spec)
    claimed = float(Fraction(Q2.q) ** 0) / (Q2.q - 1)
    want = lr_norm(oracle, 2) / (claimed * lr_norm(f, 2))
    assert reading_a_l2[0]["ratio"] == pytest.approx(want, rel=1e-10)
    # a level far above ||Bf||_inf has empty superlevel set
    big_lambda = [r for r in rows if r["check"] == "weak11" and r["param"] == 100.0]
    assert big_lambda and all(r["ratio"] == 0.0 for r in big_lambda)
    reading_b = [r for r in rows if r["reading"] == "B"]
    assert all(r["ratio"] <= 1 + 1e-10 for r in reading_b)


def test_l2_reading_b_bound_holds_across_corpus():
    corpus = small_corpus(count=4, resolutions=(2, 3))
    report = check_l2_and_weak11(corpus, [-2, -1, 0], [0.5, 2.0])
    assert report["rows"], "expected nonempty instrumentation"
    for row in report["rows"]:
        if row["reading"] == "B" and row["check"] == "l2":
            assert row["ratio"] <= 1 + 1e-10
    names = {rec["name"] for rec in report["records"]}
    assert names == {
        "l2_bound_reading_a",
        "l2_bound_reading_b",
        "weak11_bound_reading_a",
        "weak11_bound_reading_b",
    }


# ---------------------------------------------------------------------------
# Taibleson class


def test_taibleson_rows_stabilize_and_cross_tabulate():
    corpus = small_corpus(count=3, resolutions=(2, 3))
    zero = make_kernel(Q2, np.zeros(sphere_cell_count(Q2, 2)), 2)
    report = check_taibleson_class(with_kernels(corpus, list(corpus.kernels) + [zero]))
    rows = report["rows"]
    assert len(rows) == len(corpus.kernels) + 1
    assert all(r["stabilized"] for r in rows)
    assert all(r["modulus"] >= 0 for r in rows)
    assert rows[-1]["modulus"] == 0.0 and rows[-1]["sup_l2_ratio_k0"] == 0.0
    assert report["records"][0]["pass"] is True


# ---------------------------------------------------------------------------
# report assembly


def run_small(seed=42):
    return run_verification(
        config=Q2, seed=seed, count=4, window=(-2, 2), kernel_resolutions=(2,),
        k_list=(-1, 0), r_list=(2.0,), srt_list=((0.5, 2.0, 2.0),),
        lambda_list=(1.0,),
    )


def test_report_canonical_bytes_reproducible():
    r1, r2 = run_small(), run_small()
    assert r1.canonical_json() == r2.canonical_json()
    assert r1.to_csv() == r2.to_csv()
    assert run_small(seed=43).canonical_json() != r1.canonical_json()


def test_report_schema_and_exit_semantics():
    report = run_small()
    payload = json.loads(report.to_json())
    assert set(payload) == {"config", "seed", "checks", "tables", "timing_ms"}
    names = [c["name"] for c in payload["checks"]]
    assert len(names) == len(set(names))
    for c in payload["checks"]:
        assert set(c) == {"name", "claimed", "measured", "pass"}
    # measured-constant checks may fail without affecting exact-invariant status
    assert exact_checks_pass(report)
    by_name = {c["name"]: c for c in report.checks}
    assert by_name["taibleson_stabilization"]["pass"] is True
    assert by_name["piece_bound_reading_b"]["pass"] is True


def test_report_empty_check_selection_is_valid_skeleton():
    report = run_verification(
        config=Q2, count=2, window=(-2, 2), kernel_resolutions=(2,), checks=()
    )
    payload = json.loads(report.to_json())
    assert payload["tables"] == {}
    assert [c["name"] for c in payload["checks"]] == ["corpus_kernels_mean_zero"]
    assert exact_checks_pass(report)


def test_emit_report_writes_artifacts(tmp_path):
    report = run_small()
    written = emit_report(report, tmp_path / "out", formats=("json", "csv"))
    assert sorted(p.rsplit("/", 1)[-1] for p in written) == ["report.csv", "report.json"]
    blob = json.loads((tmp_path / "out" / "report.json").read_text())
    assert blob["seed"] == 42
    lines = (tmp_path / "out" / "report.csv").read_text().splitlines()
    assert lines[0] == "check,entry,k,param,ratio"
    assert len(lines) > 10
