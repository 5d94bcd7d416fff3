"""Derivative programs of any order, selected by a word over {t, a}."""

# %%
import numpy as np

from adinvar import derive, infer_shapes, load_corpus
from adinvar.engine import ModeWord, all_words
from adinvar.invariants import check_order, draw_case, enumerate_invariant_classes

corpus = {e.name: e for e in load_corpus()}
entry = corpus["trig_mix"]
prog = entry.program
x = entry.midpoint()

# %% words are read in application order; the name reads outside-in
w = ModeWord.parse("ataat")
print(w, "=", w.name)
seed_shapes, out_shape = infer_shapes(prog, w)
for i, s in enumerate(seed_shapes, start=1):
    print(f"  level {i} seed: {s}")
print("  output:", out_shape)

# %% evaluate it with random seeds
rng = np.random.default_rng(1)
seeds = [rng.uniform(-1, 1, s.dim) for s in seed_shapes]
res = derive(prog, w, x, seeds)
print("value:", res.value)

# %% the eight third-order programs
for word in all_words(3):
    shapes, _ = infer_shapes(prog, word)
    v = derive(prog, word, x, [rng.uniform(-1, 1, s.dim) for s in shapes]).value
    print(f"{str(word):4} {word.name:40} -> {np.round(v, 6)}")

# %% prefixes of length nu-1 fall into nu classes by their free index
for nu in range(1, 5):
    print(nu, [str(c) for c in enumerate_invariant_classes(nu)])

# %% the order-nu invariant for every prefix up to order 6
for nu in range(1, 7):
    worst = 0.0
    for prefix in all_words(nu - 1):
        xx, s, xs, vs = draw_case(entry, prefix, rng)
        worst = max(worst, check_order(prog, prefix, xx, s, xs, vs).rel_err)
    print(f"order {nu}: {2 ** (nu - 1):2} prefixes, worst rel residual {worst:.1e}")
