import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adinvar.engine import (
    A,
    T,
    ModeWord,
    Shape,
    all_words,
    derive,
    free_index,
    infer_shapes,
    jvp,
    second_order,
    vjp,
)
from adinvar.errors import DomainError, OrderCapError, SeedShapeError
from adinvar.oracle import DerivTensor, contract_word, fd_tensor
from adinvar.program import eval_primal

from symbolic import sym_tensor


def _seeds(rng, p, word):
    shapes, _ = infer_shapes(p, word)
    return [rng.uniform(-1, 1, s.dim) for s in shapes]


# -- mode words and shapes ---------------------------------------------------


def test_mode_word_text_and_name():
    w = ModeWord.parse("ataat")
    assert w.modes == (A, T, A, A, T)
    assert str(w) == "ataat" and w.order == 5
    assert w.name == "tangent of adjoint of adjoint of tangent of adjoint"
    assert ModeWord.parse("at").name == "tangent of adjoint"
    assert ModeWord.parse("ta").name == "adjoint of tangent"
    assert ModeWord().order == 0
    with pytest.raises(ValueError):
        ModeWord.parse("atx")


def test_infer_shapes_examples(product):
    assert infer_shapes(product, "t") == ([Shape("x", 2, "j1")], Shape("y", 1, "k"))
    assert infer_shapes(product, "a") == ([Shape("y", 1, "k")], Shape("x", 2, "j1"))
    assert infer_shapes(product, "ta") == ([Shape("x", 2, "j1"), Shape("y", 1, "k")], Shape("x", 2, "j2"))


def test_infer_shapes_five_levels(two_output):
    seeds, out = infer_shapes(two_output, "ataat")
    assert [(s.dim, s.free_index) for s in seeds] == [(2, "k"), (2, "j2"), (2, "j1"), (2, "j3"), (2, "j5")]
    assert out.free_index == "j4" == free_index("ataat")


def test_all_words():
    assert [str(w) for w in all_words(2)] == ["tt", "ta", "at", "aa"]
    assert len(all_words(5)) == 32


# -- first order ---------------------------------------------------------------


def test_jvp_examples(identity, product, sqrt_prog):
    assert jvp(identity, [2.0], [3.0])[1].tolist() == [3.0]
    assert jvp(product, [3.0, 5.0], [1.0, 0.0])[1].tolist() == [5.0]
    assert jvp(sqrt_prog, [4.0], [1.0])[1].tolist() == [0.25]


def test_vjp_examples(identity, product, two_output):
    assert vjp(identity, [2.0], [7.0])[1].tolist() == [7.0]
    assert vjp(product, [3.0, 5.0], [1.0])[1].tolist() == [5.0, 3.0]
    assert vjp(two_output, [3.0, 5.0], [1.0, 1.0])[1].tolist() == [6.0, 3.0]


def test_first_order_primal_matches_eval(corpus):
    rng = np.random.default_rng(1)
    for e in corpus:
        p = e.program
        x = e.midpoint()
        y = eval_primal(p, x)
        assert jvp(p, x, rng.uniform(-1, 1, p.n_inputs))[0].tobytes() == y.tobytes()
        assert vjp(p, x, rng.uniform(-1, 1, p.n_outputs))[0].tobytes() == y.tobytes()


def test_first_order_domain_errors(sqrt_prog):
    with pytest.raises(DomainError):
        jvp(sqrt_prog, [-1.0], [1.0])
    with pytest.raises(DomainError):
        vjp(sqrt_prog, [-1.0], [1.0])
    with pytest.raises(DomainError):
        derive(sqrt_prog, "tat", [-1.0], [[1.0]] * 3)


def test_base_case_bit_identity(corpus):
    rng = np.random.default_rng(2)
    for e in corpus:
        p = e.program
        x = e.midpoint()
        xd = rng.uniform(-1, 1, p.n_inputs)
        yb = rng.uniform(-1, 1, p.n_outputs)
        assert derive(p, "t", x, [xd]).value.tobytes() == jvp(p, x, xd)[1].tobytes()
        assert derive(p, "a", x, [yb]).value.tobytes() == vjp(p, x, yb)[1].tobytes()


# -- second order ---------------------------------------------------------------


def test_second_order_examples(square, identity):
    assert second_order(square, "TT", [3.0], [[1.0], [1.0]]).value.tolist() == [2.0]
    assert second_order(square, "TA", [3.0], [[1.0], [1.0]]).value.tolist() == [2.0]
    for kind in ("TT", "AT", "TA", "AA"):
        assert second_order(identity, kind, [2.0], [[1.0], [1.0]]).value.tolist() == [0.0]
    with pytest.raises(ValueError):
        second_order(square, "XX", [3.0], [[1.0], [1.0]])


def test_second_order_contractions(product):
    # F'' of x1*x2 is [[0,1],[1,0]]
    x = [3.0, 5.0]
    assert second_order(product, "TT", x, [[1, 2], [3, 4]]).value.tolist() == [1 * 4 + 2 * 3]
    assert second_order(product, "AT", x, [[1, 2], [1.5]]).value.tolist() == [3.0, 1.5]
    assert second_order(product, "TA", x, [[1.5], [1, 2]]).value.tolist() == [3.0, 1.5]
    assert second_order(product, "AA", x, [[1.5], [1, 2]]).value.tolist() == [3.0, 1.5]


# -- higher order ---------------------------------------------------------------


def test_cube_third_derivative(cube):
    assert derive(cube, "ttt", [1.0], [[1.0]] * 3).value.tolist() == [6.0]


def test_derive_empty_word_is_primal(product):
    r = derive(product, "", [3.0, 5.0])
    assert r.value.tolist() == [15.0]
    assert r.shape == Shape("y", 1, "k")


def test_fifth_order_word_against_symbolic_tensor(corpus_by_name):
    rng = np.random.default_rng(3)
    for name in ("pipeline", "two_output", "polar", "trig_mix"):
        e = corpus_by_name[name]
        p = e.program
        x = e.midpoint()
        seeds = _seeds(rng, p, "ataat")
        got = derive(p, "ataat", x, seeds).value
        t = DerivTensor(5, sym_tensor(p, x, 5))
        want = contract_word(t, "ataat", seeds)
        assert np.allclose(got, want, rtol=1e-12, atol=1e-12), name


def test_sixth_order_against_symbolic_tensor(pipeline):
    rng = np.random.default_rng(4)
    t = DerivTensor(6, sym_tensor(pipeline, [1.3], 6))
    for word in ("tttttt", "aaaaaa", "tatata", "aattaa"):
        seeds = _seeds(rng, pipeline, word)
        got = derive(pipeline, word, [1.3], seeds).value
        assert np.allclose(got, contract_word(t, word, seeds), rtol=1e-11, atol=1e-13), word


@pytest.mark.parametrize("word", [str(w) for w in all_words(3)])
def test_eight_third_order_programs_against_oracle(word, corpus):
    rng = np.random.default_rng(5)
    for e in corpus:
        p = e.program
        if p.n_inputs > 3 or p.n_outputs > 3:
            continue
        x = e.midpoint()
        t = fd_tensor(p, x, 3)
        seeds = _seeds(rng, p, word)
        got = derive(p, word, x, seeds).value
        want = contract_word(t, word, seeds)
        assert np.all(np.abs(got - want) <= np.maximum(1e-4, 1e-4 * np.abs(want))), (e.name, got, want)


def test_primal_preservation(corpus):
    rng = np.random.default_rng(6)
    for e in corpus:
        p = e.program
        x = e.midpoint()
        y = eval_primal(p, x)
        for word in ("tt", "at", "ata", "aat"):
            r = derive(p, word, x, _seeds(rng, p, word))
            assert r.primal_y.tobytes() == y.tobytes()


def test_intermediate_value_is_prefix_result(corpus_by_name):
    p = corpus_by_name["trig_mix"].program
    x = corpus_by_name["trig_mix"].midpoint()
    rng = np.random.default_rng(7)
    seeds = _seeds(rng, p, "tat")
    full = derive(p, "tat", x, seeds)
    prefix = derive(p, "ta", x, seeds[:2])
    assert full.intermediate_v.tobytes() == prefix.value.tobytes()


def test_seed_shape_errors(product):
    with pytest.raises(SeedShapeError):
        derive(product, "t", [1.0, 2.0], [[1.0]])
    with pytest.raises(SeedShapeError):
        derive(product, "ta", [1.0, 2.0], [[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(SeedShapeError):
        derive(product, "tt", [1.0, 2.0], [[1.0, 0.0]])


def test_order_cap(square, monkeypatch):
    with pytest.raises(OrderCapError):
        derive(square, "t" * 9, [1.0], [[1.0]] * 9)
    assert derive(square, "t" * 9, [1.0], [[1.0]] * 9, cap=9).value.tolist() == [0.0]
    monkeypatch.setenv("ADINVAR_ORDER_CAP", "2")
    with pytest.raises(OrderCapError):
        derive(square, "ttt", [1.0], [[1.0]] * 3)


def test_concurrent_calls_agree(corpus_by_name):
    e = corpus_by_name["network"]
    rng = np.random.default_rng(8)
    seeds = _seeds(rng, e.program, "ata")
    x = e.midpoint()
    ref = derive(e.program, "ata", x, seeds).value.tobytes()
    out = []

    def work():
        out.append(derive(e.program, "ata", x, seeds).value.tobytes())

    threads = [threading.Thread(target=work) for _ in range(4)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert out == [ref] * 4


# -- properties ---------------------------------------------------------------

_WORDS = [str(w) for n in (1, 2, 3) for w in all_words(n)]


@settings(max_examples=60, deadline=None)
@given(
    name=st.sampled_from(["pipeline", "trig_mix", "polar", "logsumexp", "rosenbrock"]),
    word=st.sampled_from(_WORDS),
    level=st.integers(0, 2),
    alpha=st.sampled_from([-3.0, 0.5, 2.0, 7.25]),
    seed=st.integers(0, 2**32 - 1),
)
def test_multilinear_in_each_seed(corpus_by_name, name, word, level, alpha, seed):
    e = corpus_by_name[name]
    p = e.program
    level = level % len(word)
    rng = np.random.default_rng(seed)
    x = e.midpoint()
    seeds = _seeds(rng, p, word)
    base = derive(p, word, x, seeds).value
    scaled = list(seeds)
    scaled[level] = alpha * seeds[level]
    got = derive(p, word, x, scaled).value
    scale = max(1.0, float(np.max(np.abs(alpha * base))))
    assert np.max(np.abs(got - alpha * base)) <= 1e-13 * scale


@settings(max_examples=60, deadline=None)
@given(
    name=st.sampled_from(["pipeline", "trig_mix", "polar", "logsumexp", "network"]),
    seed=st.integers(0, 2**32 - 1),
)
def test_tt_seed_swap_symmetry(corpus_by_name, name, seed):
    e = corpus_by_name[name]
    p = e.program
    rng = np.random.default_rng(seed)
    x = e.midpoint()
    x1, x2 = rng.uniform(-1, 1, (2, p.n_inputs))
    a = derive(p, "tt", x, [x1, x2]).value
    b = derive(p, "tt", x, [x2, x1]).value
    assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, float(np.max(np.abs(a))))
