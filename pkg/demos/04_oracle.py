"""Finite-difference derivative tensors as an independent reference."""

# %%
import numpy as np

from adinvar import derive, infer_shapes, load_corpus
from adinvar.engine import all_words
from adinvar.oracle import check_contraction_commutativity, contract_word, fd_tensor, word_bindings

corpus = {e.name: e for e in load_corpus()}
entry = corpus["polar"]
prog, x = entry.program, entry.midpoint()

# %% Hessian tensor, axes (k, j1, j2)
H = fd_tensor(prog, x, 2)
print(np.round(H.entries, 6))
print("asymmetry removed by averaging:", H.asymmetry)

# %% each derivative program is one contraction of the tensor
T3 = fd_tensor(prog, x, 3)
rng = np.random.default_rng(2)
for w in all_words(3):
    shapes, _ = infer_shapes(prog, w)
    seeds = [rng.uniform(-1, 1, s.dim) for s in shapes]
    got = derive(prog, w, x, seeds).value
    want = contract_word(T3, w, seeds)
    slots = " ".join(s for s, _ in word_bindings(w, seeds))
    print(f"{w}  binds {slots:12}  max diff {np.max(np.abs(got - want)):.1e}")

# %% contraction order only matters through rounding
b = [("k", rng.uniform(-1, 1, 2))] + [(f"j{i}", rng.uniform(-1, 1, 3)) for i in (1, 2, 3)]
print("reordered contraction differs by", check_contraction_commutativity(T3, b, [3, 1, 0, 2]))
