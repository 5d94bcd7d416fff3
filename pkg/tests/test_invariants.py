import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adinvar.debugger import FaultSpec, inject_fault
from adinvar.engine import all_words, infer_shapes
from adinvar.errors import OrderCapError
from adinvar.invariants import (
    InvariantReport,
    TolerancePolicy,
    check_first_order,
    check_order,
    check_second_order,
    draw_case,
    enumerate_invariant_classes,
    random_direction,
    run_suite,
    summarize,
)
from adinvar.program import CorpusEntry
from adinvar.scalar import DEFAULT_TABLE

MUL_SWAP_NEG = FaultSpec("mul", "adjoint", ("u2", "h = neg u1"))


def test_tolerance_policy():
    tol = TolerancePolicy()
    assert tol.rel_for(1) == 1e-10
    assert tol.rel_for(3) == pytest.approx(1e-8)
    assert all(tol.rel_for(n) <= tol.rel_for(n + 1) for n in range(1, 8))
    with pytest.raises(ValueError):
        TolerancePolicy(abs_tol=0.0)
    with pytest.raises(ValueError):
        TolerancePolicy(order_growth=0.5)
    abs_err, rel_err, ok = tol.judge(1.0, 1.0 + 1e-9, 1)
    assert not ok and rel_err == pytest.approx(1e-9, rel=1e-6)
    assert tol.judge(1.0, 1.0 + 1e-9, 3)[2]


def test_first_order_examples(product):
    r = check_first_order(product, [3.0, 5.0], [1.0, 2.0], [1.0])
    assert (r.lhs, r.rhs, r.verdict) == (11.0, 11.0, "pass")
    r = check_first_order(product, [3.0, 5.0], [0.0, 0.0], [1.0])
    assert (r.lhs, r.rhs, r.verdict) == (0.0, 0.0, "pass")


def test_first_order_with_adjoint_fault(product):
    table = inject_fault(DEFAULT_TABLE, MUL_SWAP_NEG)
    r = check_first_order(product, [3.0, 5.0], [1.0, 2.0], [1.0], table=table)
    assert (r.lhs, r.rhs, r.verdict) == (-1.0, 11.0, "fail")


def test_second_order_examples(square, identity):
    r = check_second_order(square, "TT_vs_AT", [3.0], [[1.0], [1.0], [1.0]])
    assert (r.lhs, r.rhs, r.verdict) == (2.0, 2.0, "pass")
    for pair in ("TT_vs_AT", "TA_vs_AA"):
        r = check_second_order(identity, pair, [2.0], [[0.3], [-1.2], [0.8]])
        assert (r.lhs, r.rhs, r.verdict) == (0.0, 0.0, "pass")
    with pytest.raises(ValueError):
        check_second_order(square, "TT_vs_TA", [3.0], [[1.0], [1.0], [1.0]])
    with pytest.raises(ValueError):
        check_second_order(square, "TT_vs_AT", [3.0], [[1.0], [1.0]])


def test_second_order_one_sided_tangent_fault(square):
    # tangent rule of mul replaced; the adjoint-extension side keeps the correct rule
    fault = FaultSpec("mul", "tangent", ("h = add u2 u2", "u1"))
    table = inject_fault(DEFAULT_TABLE, fault)
    rng = np.random.default_rng(11)
    for _ in range(5):
        seeds = [rng.uniform(-1, 1, 1) for _ in range(3)]
        r = check_second_order(square, "TA_vs_AA", [rng.uniform(0.5, 2.0)], seeds, table=table)
        assert r.verdict == "fail"


def test_check_order_matches_second_order_checks(corpus_by_name):
    e = corpus_by_name["trig_mix"]
    rng = np.random.default_rng(12)
    x = e.midpoint()
    p = e.program
    x1, x2, y12 = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 2)
    a = check_second_order(p, "TT_vs_AT", x, [x1, x2, y12])
    b = check_order(p, "t", x, [x1], x2, y12)
    assert (a.lhs, a.rhs, a.verdict) == (b.lhs, b.rhs, b.verdict)
    y1, x12 = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 3)
    a = check_second_order(p, "TA_vs_AA", x, [y1, x2, x12])
    b = check_order(p, "a", x, [y1], x2, x12)
    assert (a.lhs, a.rhs, a.verdict) == (b.lhs, b.rhs, b.verdict)


def test_empty_prefix_matches_first_order(corpus):
    rng = np.random.default_rng(13)
    for e in corpus:
        p = e.program
        x = e.midpoint()
        xd, yb = rng.uniform(-1, 1, p.n_inputs), rng.uniform(-1, 1, p.n_outputs)
        a = check_first_order(p, x, xd, yb)
        b = check_order(p, "", x, [], xd, yb)
        assert (a.lhs, a.rhs, a.verdict) == (b.lhs, b.rhs, b.verdict)


def test_high_order_prefixes(corpus_by_name):
    rng = np.random.default_rng(14)
    for name in ("pipeline", "polar", "rosenbrock"):
        e = corpus_by_name[name]
        for prefix in ("tt", "ataat"):
            x, seeds, xs, vs = draw_case(e, prefix, rng)
            r = check_order(e.program, prefix, x, seeds, xs, vs)
            assert r.verdict == "pass", (name, prefix, r)
            assert r.nu == len(prefix) + 1


def test_check_order_cap(square):
    with pytest.raises(OrderCapError):
        check_order(square, "t" * 8, [1.0], [[1.0]] * 8, [1.0], [1.0])


def test_classes_examples():
    classes = enumerate_invariant_classes(3)
    assert [(c.free_index, [str(w) for w in c.words]) for c in classes] == [
        ("k", ["tt"]),
        ("j1", ["at"]),
        ("j2", ["ta", "aa"]),
    ]
    (only,) = enumerate_invariant_classes(1)
    assert only.free_index == "k" and [str(w) for w in only.words] == [""]
    two = enumerate_invariant_classes(2)
    assert [(c.free_index, [str(w) for w in c.words]) for c in two] == [("k", ["t"]), ("j1", ["a"])]
    with pytest.raises(OrderCapError):
        enumerate_invariant_classes(0)


@pytest.mark.parametrize("nu", range(1, 9))
def test_classes_partition_prefixes(nu):
    classes = enumerate_invariant_classes(nu)
    assert len(classes) == nu
    words = [w for c in classes for w in c.words]
    assert sorted(map(str, words)) == sorted(map(str, all_words(nu - 1)))


def test_random_direction_floor():
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert np.linalg.norm(random_direction(rng, 1, floor=0.5)) > 0.5


def test_run_suite_counts_and_passes(corpus):
    five = corpus[:5]
    reports = run_suite(five, max_order=3, trials=10)
    assert len(reports) == 5 * (1 + 2 + 3) * 10
    assert all(r.passed for r in reports)
    s = summarize(reports)
    assert s["pass"] == s["total"] == 300 and s["fail"] == 0


def test_run_suite_reproducible(corpus):
    a = run_suite(corpus[:3], max_order=2, trials=3, rng_seed=5)
    b = run_suite(corpus[:3], max_order=2, trials=3, rng_seed=5)
    c = run_suite(corpus[:3], max_order=2, trials=3, rng_seed=6)
    assert [r.to_json() for r in a] == [r.to_json() for r in b]
    assert [r.lhs for r in a] != [r.lhs for r in c]


def test_run_suite_usage_errors(corpus):
    with pytest.raises(ValueError):
        run_suite([], max_order=2)
    with pytest.raises(ValueError):
        run_suite(corpus, trials=0)
    with pytest.raises(OrderCapError):
        run_suite(corpus, max_order=9)


def test_run_suite_isolates_faulted_program(corpus):
    table = inject_fault(DEFAULT_TABLE, MUL_SWAP_NEG)
    target = "network"
    reports = run_suite(corpus, max_order=3, trials=5, tables={target: table})
    for r in reports:
        if r.program == target:
            assert r.verdict == "fail"
        else:
            assert r.verdict == "pass"


def test_run_suite_reports_domain_errors(sqrt_prog):
    bad = CorpusEntry(sqrt_prog, ((-2.0, -1.0),))
    reports = run_suite([bad], max_order=2, trials=2)
    assert {r.verdict for r in reports} == {"error"}
    assert all("sqrt" in r.error for r in reports)


def test_report_json_fields(product):
    r = check_first_order(product, [3.0, 5.0], [1.0, 2.0], [1.0], rng_seed=7)
    d = json.loads(r.to_json())
    for key in ("program", "prefix", "nu", "lhs", "rhs", "abs_err", "rel_err", "verdict", "rng_seed"):
        assert key in d
    assert InvariantReport(**d) == r


# -- properties ---------------------------------------------------------------

_PREFIXES = [str(w) for n in range(0, 4) for w in all_words(n)]


@settings(max_examples=80, deadline=None)
@given(
    name=st.sampled_from(["pipeline", "trig_mix", "polar", "logsumexp", "network", "rosenbrock"]),
    prefix=st.sampled_from(_PREFIXES),
    seed=st.integers(0, 2**32 - 1),
)
def test_invariant_holds_for_random_bundles(corpus_by_name, name, prefix, seed):
    e = corpus_by_name[name]
    x, seeds, xs, vs = draw_case(e, prefix, np.random.default_rng(seed))
    assert check_order(e.program, prefix, x, seeds, xs, vs).passed


@settings(max_examples=60, deadline=None)
@given(
    name=st.sampled_from(["pipeline", "trig_mix", "polar", "logsumexp"]),
    prefix=st.sampled_from(_PREFIXES),
    alpha=st.sampled_from([-2.0, 0.25, 3.0]),
    seed=st.integers(0, 2**32 - 1),
)
def test_bilinear_in_extension_seed(corpus_by_name, name, prefix, alpha, seed):
    e = corpus_by_name[name]
    x, seeds, xs, vs = draw_case(e, prefix, np.random.default_rng(seed))
    a = check_order(e.program, prefix, x, seeds, xs, vs)
    b = check_order(e.program, prefix, x, seeds, alpha * xs, vs)
    assert abs(b.lhs - alpha * a.lhs) <= 1e-13 * max(abs(alpha * a.lhs), 1e-300)
    assert abs(b.rhs - alpha * a.rhs) <= 1e-13 * max(abs(alpha * a.rhs), 1e-300)
    assert a.verdict == b.verdict


@settings(max_examples=30, deadline=None)
@given(
    prefix=st.sampled_from([p for p in _PREFIXES if p]),
    mode=st.sampled_from(["tangent", "adjoint"]),
    seed=st.integers(0, 2**32 - 1),
)
def test_one_sided_fault_detected(corpus_by_name, prefix, mode, seed):
    e = corpus_by_name["trig_mix"]
    table = inject_fault(DEFAULT_TABLE, FaultSpec("cos", mode, ("h = sin u1",)))
    x, seeds, xs, vs = draw_case(e, prefix, np.random.default_rng(seed))
    assert not check_order(e.program, prefix, x, seeds, xs, vs, table=table).passed


def test_shapes_used_by_draw_case(corpus_by_name):
    e = corpus_by_name["two_output"]
    x, seeds, xs, vs = draw_case(e, "ata", np.random.default_rng(0))
    shapes, out = infer_shapes(e.program, "ata")
    assert [len(s) for s in seeds] == [s.dim for s in shapes]
    assert len(vs) == out.dim and len(xs) == e.program.n_inputs
