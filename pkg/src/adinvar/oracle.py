"""Finite-difference derivative tensors and index contraction.

Nothing here touches the derivative tables: every number comes from
:func:`adinvar.program.eval_primal`, so the oracle stays independent of the
tangent and adjoint code it is used to check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import T, as_word
from .errors import SizeGuardError
from .program import Program, _as_vector, eval_primal

EPS = float(np.finfo(float).eps)
MAX_TENSOR_ENTRIES = 10_000
MAX_FD_ORDER = 3


@dataclass(frozen=True)
class FDConfig:
    base_step: float = EPS ** (1.0 / 3.0)
    relative_scaling: bool = True
    richardson_levels: int = 2
    scheme: str = "central"

    def __post_init__(self):
        if not self.base_step > 0:
            raise ValueError("base_step must be positive")
        if self.richardson_levels < 1:
            raise ValueError("richardson_levels must be at least 1")
        if self.scheme != "central":
            raise ValueError("only the central scheme is implemented")

    def step_for_order(self, order: int) -> float:
        # base_step is tuned for first derivatives (eps^(1/3)); an order-nu
        # central difference balances rounding against truncation at eps^(1/(nu+2))
        return self.base_step ** (3.0 / (order + 2))

    def scaled(self, h: float, x: float) -> float:
        return h * max(1.0, abs(x)) if self.relative_scaling else h


@dataclass(frozen=True)
class DerivTensor:
    """Dense F^[order](x) with axes ``(k, j1, ..., j_order)``."""

    order: int
    entries: np.ndarray
    asymmetry: float = 0.0

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1] if self.order else 0

    @property
    def dims(self) -> tuple[int, int]:
        return self.m, self.n**self.order


def _richardson(estimates: list) -> np.ndarray:
    """Neville table for an error expansion in even powers of h, halving h each row."""
    table = [np.asarray(e, dtype=float) for e in estimates]
    for k in range(1, len(table)):
        f = 4.0**k
        table = [(f * table[i + 1] - table[i]) / (f - 1.0) for i in range(len(table) - 1)]
    return table[0]


def fd_jvp(p: Program, x, xdot, cfg: FDConfig = FDConfig()) -> np.ndarray:
    """Directional derivative F'(x)·xdot by Richardson-extrapolated central differences."""
    x = np.array(_as_vector(x, p.n_inputs))
    xdot = np.array(_as_vector(xdot, p.n_inputs, "xdot"))
    h0 = cfg.scaled(cfg.base_step, float(np.max(np.abs(x))))
    norm2 = float(np.dot(xdot, xdot))
    if norm2 == 0.0:
        return np.zeros(p.n_outputs)
    estimates = []
    for level in range(cfg.richardson_levels):
        h = h0 / 2.0**level
        xp = x + h * xdot
        xm = x - h * xdot
        # divide by the step actually taken after rounding x +- h*xdot
        span = float(np.dot(xp - xm, xdot)) / norm2
        estimates.append((eval_primal(p, xp) - eval_primal(p, xm)) / span)
    return _richardson(estimates)


def _symmetrize(entries: np.ndarray, order: int) -> np.ndarray:
    if order < 2:
        return entries
    perms = list(itertools.permutations(range(1, order + 1)))
    acc = np.zeros_like(entries)
    for perm in perms:
        acc = acc + np.transpose(entries, (0,) + perm)
    return acc / len(perms)


def fd_tensor(p: Program, x, order: int, cfg: FDConfig = FDConfig(), max_order: int = MAX_FD_ORDER) -> DerivTensor:
    """All entries of F^[order](x) from nested central differences.

    Each entry ``(k, j1..j_order)`` is the order-fold central difference
    along the listed coordinates, extrapolated over ``cfg.richardson_levels``
    step halvings. The result is averaged over permutations of the j axes;
    the largest change that averaging made is kept in ``asymmetry``.
    """
    if order < 0:
        raise ValueError("order must be non-negative")
    if order > max_order:
        raise SizeGuardError(f"finite-difference tensors are limited to order {max_order}, got {order}")
    n, m = p.n_inputs, p.n_outputs
    if m * n**order > MAX_TENSOR_ENTRIES:
        raise SizeGuardError(f"tensor would have {m * n ** order} entries (limit {MAX_TENSOR_ENTRIES})")
    x = np.array(_as_vector(x, n))
    if order == 0:
        return DerivTensor(0, eval_primal(p, x))

    base = cfg.step_for_order(order)
    steps0 = np.array([cfg.scaled(base, xj) for xj in x])
    signs = list(itertools.product((1.0, -1.0), repeat=order))
    levels = []
    for level in range(cfg.richardson_levels):
        steps = steps0 / 2.0**level
        cache: dict[tuple, np.ndarray] = {}
        entries = np.empty((m,) + (n,) * order)
        for idx in itertools.product(range(n), repeat=order):
            total = np.zeros(m)
            for sg in signs:
                offset = [0] * n
                for s, j in zip(sg, idx):
                    offset[j] += int(s)
                key = tuple(offset)
                f = cache.get(key)
                if f is None:
                    f = eval_primal(p, x + np.array(offset) * steps)
                    cache[key] = f
                total = total + float(np.prod(sg)) * f
            denom = float(np.prod([2.0 * steps[j] for j in idx]))
            entries[(slice(None),) + idx] = total / denom
        levels.append(entries)
    raw = _richardson(levels)
    sym = _symmetrize(raw, order)
    return DerivTensor(order, sym, float(np.max(np.abs(sym - raw))) if raw.size else 0.0)


def _slot_axis(slot, order: int) -> int:
    if isinstance(slot, (int, np.integer)):
        axis = int(slot)
    elif slot == "k":
        axis = 0
    elif isinstance(slot, str) and slot.startswith("j") and slot[1:].isdigit():
        axis = int(slot[1:])
    else:
        raise ValueError(f"bad index slot {slot!r}; use 'k', 'j1', 'j2', ... or an axis number")
    if not 0 <= axis <= order:
        raise ValueError(f"slot {slot!r} does not exist in an order-{order} tensor")
    return axis


def contract(t: DerivTensor, bindings: Sequence[tuple]) -> np.ndarray | float:
    """Contract ``t`` with ``(slot, vector)`` bindings, applied in the given order.

    Every contraction sums over ascending indices, strictly left to right.
    At most one slot may stay free; the result is a vector over that slot,
    or a float when all slots are bound.
    """
    remaining = list(range(t.order + 1))
    seen = set()
    arr = np.asarray(t.entries, dtype=float)
    for slot, vec in bindings:
        axis = _slot_axis(slot, t.order)
        if axis in seen:
            raise ValueError(f"slot {slot!r} bound twice")
        seen.add(axis)
        vec = np.asarray(vec, dtype=float).ravel()
        pos = remaining.index(axis)
        if vec.shape[0] != arr.shape[pos]:
            raise ValueError(f"slot {slot!r} has length {arr.shape[pos]}, vector has {vec.shape[0]}")
        acc = np.take(arr, 0, axis=pos) * vec[0]
        for s in range(1, vec.shape[0]):
            acc = acc + np.take(arr, s, axis=pos) * vec[s]
        arr = acc
        remaining.pop(pos)
    if len(remaining) > 1:
        raise ValueError(f"{len(remaining)} slots left free; at most one is allowed")
    return float(arr) if not remaining else arr


def word_bindings(word, seeds: Sequence) -> list[tuple[str, np.ndarray]]:
    """Slot bindings that the derivative program ``word`` applies to F^[order].

    A tangent level ``i`` binds ``j_i``; an adjoint level binds whichever
    index the previous level left free and frees ``j_i`` instead.
    """
    word = as_word(word)
    if len(seeds) != len(word):
        raise ValueError(f"{word} needs {len(word)} seeds, got {len(seeds)}")
    free = "k"
    out = []
    for i, (mode, seed) in enumerate(zip(word, seeds), start=1):
        if mode is T:
            out.append((f"j{i}", np.asarray(seed, dtype=float)))
        else:
            out.append((free, np.asarray(seed, dtype=float)))
            free = f"j{i}"
    return out


def contract_word(t: DerivTensor, word, seeds: Sequence) -> np.ndarray:
    """What ``derive(p, word, x, seeds).value`` should equal, read off the tensor."""
    if t.order != len(as_word(word)):
        raise ValueError(f"tensor order {t.order} does not match word {word}")
    return np.atleast_1d(contract(t, word_bindings(word, seeds)))


def check_contraction_commutativity(t: DerivTensor, bindings: Sequence[tuple], permutation: Sequence[int]) -> float:
    """Max absolute difference between two orders of the same contractions."""
    if sorted(permutation) != list(range(len(bindings))):
        raise ValueError("permutation must reorder all bindings")
    a = np.atleast_1d(contract(t, bindings))
    b = np.atleast_1d(contract(t, [bindings[i] for i in permutation]))
    return float(np.max(np.abs(a - b))) if a.size else 0.0
