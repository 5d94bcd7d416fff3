"""Generic scalar arithmetic and the elemental derivative table.

Every value flowing through a program is either a plain ``float`` or an
:class:`Active` scalar owned by one differentiation *level*. Elementals are
applied through :func:`apply`, which hands the operation to the outermost
level among its operands. That level evaluates the elemental on the inner
(unwrapped) operands and obtains the first partials from the
:class:`ElementalTable`, again in the inner scalar type. Because the partial
rules are written with the same generic functions (``mul``, ``cos``, ...),
nesting levels differentiates the partials themselves and higher
derivatives never need their own table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

from .errors import DomainError, NonDifferentiableError

PartialRule = Callable[[tuple, "float | None"], tuple]


class Active:
    """Base for scalars that belong to a differentiation level.

    Subclasses store the wrapped inner scalar in ``val``; ``level`` must
    provide ``depth`` (int, larger means further out) and
    ``apply(kind, args, param)``.
    """

    __slots__ = ("level", "val")

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, c):
        return powc(self, float(c))


def primal_value(x):
    """Strip every level off ``x`` and return the underlying float."""
    while isinstance(x, Active):
        x = x.val
    return x


def apply(kind: str, args: Sequence, param: float | None = None):
    """Apply elemental ``kind`` to ``args`` in the outermost active scalar type."""
    outer = None
    for a in args:
        if isinstance(a, Active):
            lv = a.level
            if outer is None or lv.depth > outer.depth:
                outer = lv
    if outer is None:
        return ELEMENTALS[kind].value(args, param)
    return outer.apply(kind, args, param)


# -- float value rules -------------------------------------------------------


def _v_add(a, c):
    return a[0] + a[1]


def _v_sub(a, c):
    return a[0] - a[1]


def _v_mul(a, c):
    return a[0] * a[1]


def _v_div(a, c):
    if a[1] == 0.0:
        raise DomainError("division by zero", "div")
    return a[0] / a[1]


def _v_neg(a, c):
    return -a[0]


def _v_id(a, c):
    return a[0]


def _v_sin(a, c):
    return math.sin(a[0])


def _v_cos(a, c):
    return math.cos(a[0])


def _v_exp(a, c):
    try:
        return math.exp(a[0])
    except OverflowError:
        raise DomainError(f"exp overflow at {a[0]!r}", "exp") from None


def _v_log(a, c):
    if not a[0] > 0.0:
        raise DomainError(f"log of non-positive operand {a[0]!r}", "log")
    return math.log(a[0])


def _v_sqrt(a, c):
    if a[0] < 0.0:
        raise DomainError(f"sqrt of negative operand {a[0]!r}", "sqrt")
    return math.sqrt(a[0])


def _v_tanh(a, c):
    return math.tanh(a[0])


def _v_powc(a, c):
    u = a[0]
    if c != math.floor(c):
        if not u > 0.0:
            raise DomainError(f"powc with non-integer exponent {c!r} needs a positive base, got {u!r}", "powc")
    elif u == 0.0 and c < 0.0:
        raise DomainError(f"powc of zero with negative exponent {c!r}", "powc")
    try:
        return math.pow(u, c)
    except OverflowError:
        raise DomainError(f"powc overflow at {u!r}", "powc") from None


def _v_const(a, c):
    return float(c)


# -- generic elemental functions ---------------------------------------------


def add(a, b):
    return apply("add", (a, b))


def sub(a, b):
    return apply("sub", (a, b))


def mul(a, b):
    return apply("mul", (a, b))


def div(a, b):
    return apply("div", (a, b))


def neg(a):
    return apply("neg", (a,))


def ident(a):
    return apply("id", (a,))


def sin(a):
    return apply("sin", (a,))


def cos(a):
    return apply("cos", (a,))


def exp(a):
    return apply("exp", (a,))


def log(a):
    return apply("log", (a,))


def sqrt(a):
    return apply("sqrt", (a,))


def tanh(a):
    return apply("tanh", (a,))


def powc(a, c: float):
    return apply("powc", (a,), c)


def scale(p, a):
    """``p * a`` with exact shortcuts for the constant partials +1 and -1."""
    if type(p) is float:
        if p == 1.0:
            return a
        if p == -1.0:
            return neg(a)
    return mul(p, a)


def accumulate(acc, term):
    return term if acc is None else add(acc, term)


def ordered_dot(a: Sequence[float], b: Sequence[float]) -> float:
    """Dot product summed strictly left to right."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    total = 0.0
    for i in range(len(a)):
        total = total + float(a[i]) * float(b[i])
    return total


# -- first-partial rules -----------------------------------------------------


def _p_add(a, c):
    return (1.0, 1.0)


def _p_sub(a, c):
    return (1.0, -1.0)


def _p_mul(a, c):
    return (a[1], a[0])


def _p_div(a, c):
    u, w = a
    r = div(1.0, w)
    return (r, neg(mul(div(u, w), r)))


def _p_neg(a, c):
    return (-1.0,)


def _p_id(a, c):
    return (1.0,)


def _p_sin(a, c):
    return (cos(a[0]),)


def _p_cos(a, c):
    return (neg(sin(a[0])),)


def _p_exp(a, c):
    return (exp(a[0]),)


def _p_log(a, c):
    return (div(1.0, a[0]),)


def _p_sqrt(a, c):
    if primal_value(a[0]) == 0.0:
        raise NonDifferentiableError("sqrt is not differentiable at 0", "sqrt")
    return (div(0.5, sqrt(a[0])),)


def _p_tanh(a, c):
    t = tanh(a[0])
    return (sub(1.0, mul(t, t)),)


def _p_powc(a, c):
    if c == 0.0:
        return (0.0,)
    if c != math.floor(c) and c < 1.0 and primal_value(a[0]) == 0.0:
        raise NonDifferentiableError(f"powc @ {c!r} is not differentiable at 0", "powc")
    return (mul(c, powc(a[0], c - 1.0)),)


def _p_const(a, c):
    return ()


@dataclass(frozen=True)
class Elemental:
    name: str
    arity: int
    value: Callable[[tuple, "float | None"], float]
    partials: PartialRule
    has_param: bool = False


ELEMENTALS: Mapping[str, Elemental] = MappingProxyType(
    {
        e.name: e
        for e in (
            Elemental("add", 2, _v_add, _p_add),
            Elemental("sub", 2, _v_sub, _p_sub),
            Elemental("mul", 2, _v_mul, _p_mul),
            Elemental("div", 2, _v_div, _p_div),
            Elemental("neg", 1, _v_neg, _p_neg),
            Elemental("id", 1, _v_id, _p_id),
            Elemental("sin", 1, _v_sin, _p_sin),
            Elemental("cos", 1, _v_cos, _p_cos),
            Elemental("exp", 1, _v_exp, _p_exp),
            Elemental("log", 1, _v_log, _p_log),
            Elemental("sqrt", 1, _v_sqrt, _p_sqrt),
            Elemental("tanh", 1, _v_tanh, _p_tanh),
            Elemental("powc", 1, _v_powc, _p_powc, has_param=True),
            Elemental("const", 0, _v_const, _p_const, has_param=True),
        )
    }
)


@dataclass(frozen=True)
class ElementalTable:
    """First-partial rules per elemental, kept separately for tangent and adjoint levels.

    The two maps are identical for a correct table; fault injection replaces
    entries in one or both of them.
    """

    tangent: Mapping[str, PartialRule] = field(
        default_factory=lambda: MappingProxyType({k: e.partials for k, e in ELEMENTALS.items()})
    )
    adjoint: Mapping[str, PartialRule] = field(
        default_factory=lambda: MappingProxyType({k: e.partials for k, e in ELEMENTALS.items()})
    )

    def replace(self, kind: str, rule: PartialRule, *, tangent: bool, adjoint: bool) -> "ElementalTable":
        if kind not in ELEMENTALS:
            raise KeyError(f"unknown elemental {kind!r}")
        t = dict(self.tangent)
        a = dict(self.adjoint)
        if tangent:
            t[kind] = rule
        if adjoint:
            a[kind] = rule
        return ElementalTable(MappingProxyType(t), MappingProxyType(a))

    @property
    def is_consistent(self) -> bool:
        """True when tangent and adjoint levels share every rule."""
        return all(self.tangent[k] is self.adjoint[k] for k in ELEMENTALS)


DEFAULT_TABLE = ElementalTable()


def _check_arity(kind, operands):
    if kind not in ELEMENTALS:
        raise KeyError(f"unknown elemental {kind!r}")
    arity = ELEMENTALS[kind].arity
    if len(operands) != arity:
        raise ValueError(f"{kind} takes {arity} operand(s), got {len(operands)}")


def _coerce(operands):
    return tuple(o if isinstance(o, Active) else float(o) for o in operands)


def elemental_value(kind: str, operands: Sequence, param: float | None = None):
    """Evaluate elemental ``kind`` in the active scalar type of ``operands``."""
    _check_arity(kind, operands)
    return apply(kind, _coerce(operands), param)


def elemental_partials(
    kind: str,
    operands: Sequence,
    param: float | None = None,
    table: ElementalTable = DEFAULT_TABLE,
    mode: str = "tangent",
) -> list:
    """First partials of ``kind`` at ``operands``, one per operand.

    ``mode`` selects the tangent or adjoint rule set of ``table``. The
    partials are computed in the scalar type of the operands, so passing
    nested active scalars differentiates the partials.
    """
    _check_arity(kind, operands)
    operands = _coerce(operands)
    # run the value rule first so domain violations surface as DomainError
    ELEMENTALS[kind].value(tuple(primal_value(o) for o in operands), param)
    rules = table.tangent if mode == "tangent" else table.adjoint
    return list(rules[kind](operands, param))
