"""Derivative programs of arbitrary order by nesting tangent and adjoint modes.

A :class:`ModeWord` lists modes in *application* order: ``"ta"`` applies
tangent mode to the primal first and then adjoint mode to the resulting
tangent program, which is the "adjoint of tangent" program. Its
:attr:`ModeWord.name` gives the outside-in reading.

Evaluation nests one level per letter. The last applied mode is the
innermost scalar type (it wraps plain floats); the first applied mode is the
outermost. A tangent level carries ``(val, dot)`` pairs, an adjoint level
records a per-call tape of partials in the inner scalar type and sweeps it
backwards once the inner program has produced its output.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError, OrderCapError, SeedShapeError
from .program import Program, _as_vector, execute
from .scalar import (
    DEFAULT_TABLE,
    Active,
    ElementalTable,
    ELEMENTALS,
    accumulate,
    apply,
    scale,
)

DEFAULT_ORDER_CAP = 8


def order_cap() -> int:
    """Highest order ``derive`` accepts; ``ADINVAR_ORDER_CAP`` overrides the default 8."""
    raw = os.environ.get("ADINVAR_ORDER_CAP")
    if raw is None or raw.strip() == "":
        return DEFAULT_ORDER_CAP
    return int(raw)


class Mode(enum.Enum):
    TANGENT = "t"
    ADJOINT = "a"

    def __str__(self):
        return self.value


T = Mode.TANGENT
A = Mode.ADJOINT


@dataclass(frozen=True)
class ModeWord:
    modes: tuple[Mode, ...] = ()

    @classmethod
    def parse(cls, text: str) -> "ModeWord":
        try:
            return cls(tuple(Mode(c) for c in text.strip().lower()))
        except ValueError:
            raise ValueError(f"mode word must be a string over 't'/'a', got {text!r}") from None

    def __str__(self):
        return "".join(m.value for m in self.modes)

    def __repr__(self):
        return f"ModeWord({str(self)!r})"

    def __len__(self):
        return len(self.modes)

    def __iter__(self) -> Iterator[Mode]:
        return iter(self.modes)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return ModeWord(self.modes[i])
        return self.modes[i]

    def __add__(self, other):
        return ModeWord(self.modes + as_word(other).modes)

    @property
    def order(self) -> int:
        return len(self.modes)

    @property
    def name(self) -> str:
        """Outside-in name, e.g. ``"ta"`` -> ``"adjoint of tangent"``."""
        if not self.modes:
            return "primal"
        words = {T: "tangent", A: "adjoint"}
        return " of ".join(words[m] for m in reversed(self.modes))


def as_word(w) -> ModeWord:
    if isinstance(w, ModeWord):
        return w
    if isinstance(w, Mode):
        return ModeWord((w,))
    if isinstance(w, str):
        return ModeWord.parse(w)
    return ModeWord(tuple(m if isinstance(m, Mode) else Mode(m) for m in w))


@dataclass(frozen=True)
class Shape:
    """Which free index a derivative-program value carries.

    ``kind`` is ``"y"`` (index ``k``, length m) or ``"x"`` (some ``j_i``,
    length n).
    """

    kind: str
    dim: int
    free_index: str

    def __str__(self):
        return f"{self.kind.upper()}({self.dim})[{self.free_index}]"


def free_index(word) -> str:
    """Free index of the output of the derivative program ``word``."""
    idx = "k"
    for i, mode in enumerate(as_word(word), start=1):
        if mode is A:
            idx = f"j{i}"
    return idx


def infer_shapes(p: Program, word) -> tuple[list[Shape], Shape]:
    """Per-level seed shapes and the output shape of derivative program ``word``."""
    n, m = p.n_inputs, p.n_outputs
    current = Shape("y", m, "k")
    seeds = []
    for i, mode in enumerate(as_word(word), start=1):
        if mode is T:
            seeds.append(Shape("x", n, f"j{i}"))
        else:
            seeds.append(current)
            current = Shape("x", n, f"j{i}")
    return seeds, current


@dataclass(frozen=True)
class DerivResult:
    word: ModeWord
    value: np.ndarray
    shape: Shape
    primal_y: np.ndarray
    intermediate_v: np.ndarray


# -- first order: tangent and adjoint SAC over plain floats --------------------


def tangent_sweep(p: Program, x: Sequence[float], xdot: Sequence[float], table: ElementalTable = DEFAULT_TABLE):
    """Tangent SAC: values and tangents of every variable.

    Variables that do not depend on the inputs get tangent ``None``.
    """
    val = dict(zip(p.input_vars, x))
    dot = dict(zip(p.input_vars, xdot))
    rules = table.tangent
    for s, step in enumerate(p.steps, start=1):
        args = [val[o] for o in step.operands]
        val[step.target] = _step_value(s, step, args)
        if all(dot.get(o) is None for o in step.operands):
            dot[step.target] = None
            continue
        partials = rules[step.elemental](tuple(args), step.const_param)
        acc = None
        for o, q in zip(step.operands, partials):
            d = dot.get(o)
            if d is not None:
                acc = accumulate(acc, scale(q, d))
        dot[step.target] = acc
    return val, dot


def _step_value(s, step, args):
    try:
        return apply(step.elemental, args, step.const_param)
    except DomainError as err:
        if err.step is not None:
            raise
        raise err.at_step(s, step.elemental) from err


@dataclass
class FloatTape:
    """Adjoint SAC record: one entry per active step, in forward order."""

    input_vars: tuple[str, ...]
    entries: list  # (step index, target, [(operand, partial), ...])
    values: dict
    position: dict  # variable -> tape position

    def reverse(self, seeds: dict, start: int | None = None, trace: list | None = None) -> dict:
        """Propagate ``seeds`` (variable -> adjoint) backwards from tape position ``start``."""
        adj = {}
        for var, w in seeds.items():
            adj[var] = accumulate(adj.get(var), w)
        last = len(self.entries) - 1 if start is None else start
        for pos in range(last, -1, -1):
            s, target, edges = self.entries[pos]
            a = adj.get(target)
            if a is None:
                continue
            if trace is not None and a != 0.0:
                trace.append(s)
            for o, q in edges:
                adj[o] = accumulate(adj.get(o), scale(q, a))
        return adj


def record_tape(p: Program, x: Sequence[float], table: ElementalTable = DEFAULT_TABLE) -> FloatTape:
    val = dict(zip(p.input_vars, x))
    active = set(p.input_vars)
    rules = table.adjoint
    entries = []
    position = {}
    for s, step in enumerate(p.steps, start=1):
        args = [val[o] for o in step.operands]
        val[step.target] = _step_value(s, step, args)
        if not any(o in active for o in step.operands):
            continue
        partials = rules[step.elemental](tuple(args), step.const_param)
        edges = [(o, q) for o, q in zip(step.operands, partials) if o in active]
        active.add(step.target)
        position[step.target] = len(entries)
        entries.append((s, step.target, edges))
    return FloatTape(p.input_vars, entries, val, position)


def jvp(p: Program, x, xdot, table: ElementalTable = DEFAULT_TABLE) -> tuple[np.ndarray, np.ndarray]:
    """``(F(x), F'(x) xdot)`` by one tangent sweep."""
    x = _as_vector(x, p.n_inputs)
    xdot = _as_vector(xdot, p.n_inputs, "xdot")
    val, dot = tangent_sweep(p, x, xdot, table)
    y = np.array([val[v] for v in p.output_vars])
    ydot = np.array([0.0 if dot[v] is None else dot[v] for v in p.output_vars])
    return y, ydot


def vjp(p: Program, x, ybar, table: ElementalTable = DEFAULT_TABLE) -> tuple[np.ndarray, np.ndarray]:
    """``(F(x), F'(x)^T ybar)`` by recording a tape and sweeping it backwards."""
    x = _as_vector(x, p.n_inputs)
    ybar = _as_vector(ybar, p.n_outputs, "ybar")
    tape = record_tape(p, x, table)
    seeds = {}
    for v, w in zip(p.output_vars, ybar):
        if v in tape.position:
            seeds[v] = accumulate(seeds.get(v), w)
    adj = tape.reverse(seeds)
    y = np.array([tape.values[v] for v in p.output_vars])
    xbar = np.array([adj.get(v, 0.0) for v in p.input_vars])
    return y, xbar


# -- nested levels ----------------------------------------------------------


class Dual(Active):
    __slots__ = ("dot",)

    def __init__(self, level, val, dot):
        self.level = level
        self.val = val
        self.dot = dot

    def __repr__(self):
        return f"Dual(d{self.level.depth}, {self.val!r}, {self.dot!r})"


class Node(Active):
    __slots__ = ("index",)

    def __init__(self, level, val, index):
        self.level = level
        self.val = val
        self.index = index

    def __repr__(self):
        return f"Node(d{self.level.depth}, {self.val!r}, #{self.index})"


class TangentLevel:
    __slots__ = ("depth", "table")

    def __init__(self, depth, table):
        self.depth = depth
        self.table = table

    def apply(self, kind, args, param):
        inner = tuple(a.val if isinstance(a, Dual) and a.level is self else a for a in args)
        value = apply(kind, inner, param)
        partials = self.table.tangent[kind](inner, param)
        acc = None
        for a, q in zip(args, partials):
            if isinstance(a, Dual) and a.level is self:
                acc = accumulate(acc, scale(q, a.dot))
        return Dual(self, value, acc)

    def owns(self, v):
        return isinstance(v, Dual) and v.level is self

    def value(self, v):
        return v.val if self.owns(v) else v

    def tangent(self, v):
        return v.dot if self.owns(v) else 0.0


class AdjointLevel:
    __slots__ = ("depth", "table", "tape")

    def __init__(self, depth, table):
        self.depth = depth
        self.table = table
        self.tape = []

    def owns(self, v):
        return isinstance(v, Node) and v.level is self

    def input(self, x):
        self.tape.append(())
        return Node(self, x, len(self.tape) - 1)

    def apply(self, kind, args, param):
        inner = tuple(a.val if isinstance(a, Node) and a.level is self else a for a in args)
        value = apply(kind, inner, param)
        partials = self.table.adjoint[kind](inner, param)
        edges = tuple(
            (a.index, q) for a, q in zip(args, partials) if isinstance(a, Node) and a.level is self
        )
        self.tape.append(edges)
        return Node(self, value, len(self.tape) - 1)

    def value(self, v):
        return v.val if self.owns(v) else v

    def reverse(self, outputs, seeds, inputs):
        """Adjoints of ``inputs`` given adjoint ``seeds`` on ``outputs``."""
        adj = [None] * len(self.tape)
        for v, w in zip(outputs, seeds):
            if self.owns(v):
                adj[v.index] = accumulate(adj[v.index], w)
        for i in range(len(self.tape) - 1, -1, -1):
            a = adj[i]
            if a is None:
                continue
            for j, q in self.tape[i]:
                adj[j] = accumulate(adj[j], scale(q, a))
        return [0.0 if adj[x.index] is None else adj[x.index] for x in inputs]


def _depth(x) -> int:
    return x.level.depth if isinstance(x, Active) else 0


def _run(p: Program, modes: tuple, x: list, seeds: Sequence, table):
    """Evaluate derivative program ``modes`` on inputs ``x``.

    Returns ``(out, v, y)``: the order-ν output, the order-(ν−1) output and
    the primal output, all in the scalar type of ``x``.
    """
    if not modes:
        y = execute(p, x)
        return y, y, y
    *inner, last = modes
    depth = max((_depth(xi) for xi in x), default=0) + 1
    seed = seeds[-1]
    if last is T:
        level = TangentLevel(depth, table)
        xs = [Dual(level, xi, si) for xi, si in zip(x, seed)]
        out, _, y = _run(p, tuple(inner), xs, seeds[:-1], table)
        return [level.tangent(o) for o in out], [level.value(o) for o in out], [level.value(o) for o in y]
    level = AdjointLevel(depth, table)
    xs = [level.input(xi) for xi in x]
    out, _, y = _run(p, tuple(inner), xs, seeds[:-1], table)
    xbar = level.reverse(out, seed, xs)
    return xbar, [level.value(o) for o in out], [level.value(o) for o in y]


def _check_seeds(p, word, seeds) -> list[list[float]]:
    shapes, _ = infer_shapes(p, word)
    if len(seeds) != len(shapes):
        raise SeedShapeError(f"mode word {word} needs {len(shapes)} seed(s), got {len(seeds)}")
    out = []
    for i, (s, shape) in enumerate(zip(seeds, shapes), start=1):
        v = [float(t) for t in np.asarray(s, dtype=float).ravel()]
        if len(v) != shape.dim:
            raise SeedShapeError(
                f"seed {i} of {word} binds {shape.free_index} and needs length {shape.dim}, got {len(v)}"
            )
        out.append(v)
    return out


def derive(
    p: Program,
    word,
    x,
    seeds: Sequence = (),
    table: ElementalTable = DEFAULT_TABLE,
    cap: int | None = None,
) -> DerivResult:
    """Evaluate the order-ν derivative program selected by ``word``.

    ``seeds[i]`` is the direction of level ``i+1``: an x-shaped vector for a
    tangent level, or a vector shaped like the level-``i`` output for an
    adjoint level (see :func:`infer_shapes`).
    """
    word = as_word(word)
    cap = order_cap() if cap is None else cap
    if word.order > cap:
        raise OrderCapError(f"order {word.order} exceeds the cap {cap}")
    xv = _as_vector(x, p.n_inputs)
    sv = _check_seeds(p, word, list(seeds))
    out, v, y = _run(p, word.modes, xv, sv, table)
    _, shape = infer_shapes(p, word)
    return DerivResult(
        word=word,
        value=np.array(out, dtype=float),
        shape=shape,
        primal_y=np.array(y, dtype=float),
        intermediate_v=np.array(v, dtype=float),
    )


SECOND_ORDER_WORDS = {
    "TT": ModeWord((T, T)),
    "AT": ModeWord((T, A)),
    "TA": ModeWord((A, T)),
    "AA": ModeWord((A, A)),
}


def second_order(p: Program, kind: str, x, seeds: Sequence, table: ElementalTable = DEFAULT_TABLE) -> DerivResult:
    """One of the four second-derivative programs, named outside-in.

    ``TT``: F''·x1·x2, ``AT``: F''·x1·y12 (adjoint of tangent),
    ``TA``: F''·y1·x2 (tangent of adjoint), ``AA``: F''·y1·x12.
    """
    try:
        word = SECOND_ORDER_WORDS[kind.upper()]
    except KeyError:
        raise ValueError(f"kind must be one of TT, AT, TA, AA, got {kind!r}") from None
    return derive(p, word, x, seeds, table=table)


def all_words(order: int) -> list[ModeWord]:
    """All 2^order mode words of the given length, tangent-first lexicographic."""
    words = [ModeWord()]
    for _ in range(order):
        words = [w + m for w in words for m in (T, A)]
    return words


__all__ = [
    "A",
    "T",
    "DerivResult",
    "ELEMENTALS",
    "Mode",
    "ModeWord",
    "Shape",
    "all_words",
    "as_word",
    "derive",
    "free_index",
    "infer_shapes",
    "jvp",
    "order_cap",
    "record_tape",
    "second_order",
    "tangent_sweep",
    "vjp",
]
