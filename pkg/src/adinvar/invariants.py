"""Differential invariants of arbitrary order.

For any derivative program ``v = F^[ν-1]·V`` (selected by a prefix mode word
of length ν−1) its tangent extension ``v^(ν)`` and adjoint extension
``x_(ν)`` satisfy

    x_(ν) · x^(ν) = v_(ν) · v^(ν)

exactly in real arithmetic. :func:`check_order` evaluates both sides with
:func:`adinvar.engine.derive`; the first-order case uses the dedicated
tangent and adjoint sweeps.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .engine import T, A, ModeWord, all_words, as_word, derive, free_index, infer_shapes, jvp, order_cap, vjp
from .errors import AdinvarError, OrderCapError
from .program import CorpusEntry, DEFAULT_BOX, Program, _as_vector
from .scalar import DEFAULT_TABLE, ElementalTable, ordered_dot

DEFAULT_RNG_SEED = 20_240_611
TINY = float(np.finfo(float).tiny)


@dataclass(frozen=True)
class TolerancePolicy:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    order_growth: float = 10.0

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.order_growth >= 1):
            raise ValueError("tolerances must be positive and order_growth >= 1")

    def rel_for(self, nu: int) -> float:
        return self.rel_tol * self.order_growth ** (max(nu, 1) - 1)

    def judge(self, lhs: float, rhs: float, nu: int) -> tuple[float, float, bool]:
        abs_err = abs(lhs - rhs)
        scale = max(abs(lhs), abs(rhs))
        rel_err = abs_err / max(scale, TINY) if abs_err else 0.0
        ok = abs_err <= max(self.abs_tol, self.rel_for(nu) * scale)
        return abs_err, rel_err, ok


@dataclass
class InvariantReport:
    program: str
    prefix: str
    nu: int
    lhs: float | None
    rhs: float | None
    abs_err: float | None
    rel_err: float | None
    verdict: str
    rng_seed: int | None = None
    trial: int | None = None
    abs_tol: float | None = None
    rel_tol: float | None = None
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _report(name, prefix, nu, lhs, rhs, tol, rng_seed=None, trial=None):
    abs_err, rel_err, ok = tol.judge(lhs, rhs, nu)
    return InvariantReport(
        program=name,
        prefix=str(prefix),
        nu=nu,
        lhs=lhs,
        rhs=rhs,
        abs_err=abs_err,
        rel_err=rel_err,
        verdict="pass" if ok else "fail",
        rng_seed=rng_seed,
        trial=trial,
        abs_tol=tol.abs_tol,
        rel_tol=tol.rel_for(nu),
    )


def check_first_order(
    p: Program,
    x,
    xdot,
    ybar,
    tol: TolerancePolicy = TolerancePolicy(),
    table: ElementalTable = DEFAULT_TABLE,
    rng_seed: int | None = None,
) -> InvariantReport:
    """``(F'^T ybar)·xdot`` against ``ybar·(F' xdot)``."""
    _, xbar = vjp(p, x, ybar, table)
    _, ydot = jvp(p, x, xdot, table)
    lhs = ordered_dot(xbar, _as_vector(xdot, p.n_inputs))
    rhs = ordered_dot(_as_vector(ybar, p.n_outputs), ydot)
    return _report(p.name, ModeWord(), 1, lhs, rhs, tol, rng_seed)


def check_order(
    p: Program,
    prefix,
    x,
    seeds: Sequence,
    x_nu_seed,
    v_nu_seed,
    tol: TolerancePolicy = TolerancePolicy(),
    table: ElementalTable = DEFAULT_TABLE,
    rng_seed: int | None = None,
    cap: int | None = None,
) -> InvariantReport:
    """Order-ν invariant for the derivative program ``prefix`` (length ν−1).

    ``seeds`` are the directions of the prefix levels. ``x_nu_seed`` drives
    the tangent extension, ``v_nu_seed`` (shaped like the prefix output)
    the adjoint extension.
    """
    prefix = as_word(prefix)
    nu = prefix.order + 1
    seeds = list(seeds)
    tangent = derive(p, prefix + T, x, seeds + [x_nu_seed], table=table, cap=cap)
    adjoint = derive(p, prefix + A, x, seeds + [v_nu_seed], table=table, cap=cap)
    lhs = ordered_dot(adjoint.value, np.asarray(x_nu_seed, dtype=float).ravel())
    rhs = ordered_dot(np.asarray(v_nu_seed, dtype=float).ravel(), tangent.value)
    return _report(p.name, prefix, nu, lhs, rhs, tol, rng_seed)


SECOND_ORDER_PAIRS = {"TT_vs_AT": "t", "TA_vs_AA": "a"}


def check_second_order(
    p: Program,
    pair: str,
    x,
    seeds: Sequence,
    tol: TolerancePolicy = TolerancePolicy(),
    table: ElementalTable = DEFAULT_TABLE,
) -> InvariantReport:
    """Second-order invariants.

    ``TT_vs_AT`` takes ``seeds = (x1, x2, y12)`` and checks
    ``x_(2)·x2 = y12·y^(1,2)``; ``TA_vs_AA`` takes ``(y1, x2, x12)`` and
    checks ``x_(2)·x2 = x12·x^(2)_(1)``.
    """
    if pair not in SECOND_ORDER_PAIRS:
        raise ValueError(f"pair must be one of {sorted(SECOND_ORDER_PAIRS)}, got {pair!r}")
    if len(seeds) != 3:
        raise ValueError("second-order checks take exactly three seeds")
    first, x2, last = seeds
    return check_order(p, SECOND_ORDER_PAIRS[pair], x, [first], x2, last, tol=tol, table=table)


@dataclass(frozen=True)
class InvariantClass:
    free_index: str
    words: tuple[ModeWord, ...]

    def __str__(self):
        return f"{self.free_index}: [{', '.join(str(w) or '-' for w in self.words)}]"


def _index_key(idx: str) -> int:
    return 0 if idx == "k" else int(idx[1:])


def enumerate_invariant_classes(nu: int, cap: int | None = None) -> list[InvariantClass]:
    """Group the 2^(ν−1) order-(ν−1) programs by the free index of their output."""
    cap = order_cap() if cap is None else cap
    if not 1 <= nu <= cap:
        raise OrderCapError(f"order must lie in 1..{cap}, got {nu}")
    groups: dict[str, list[ModeWord]] = {}
    for w in all_words(nu - 1):
        groups.setdefault(free_index(w), []).append(w)
    return [InvariantClass(k, tuple(groups[k])) for k in sorted(groups, key=_index_key)]


def random_direction(rng: np.random.Generator, dim: int, floor: float = 1e-6) -> np.ndarray:
    """Uniform [-1, 1]^dim, redrawn until its norm exceeds ``floor``."""
    while True:
        v = rng.uniform(-1.0, 1.0, dim)
        if np.linalg.norm(v) > floor:
            return v


def draw_case(entry: CorpusEntry, prefix, rng: np.random.Generator):
    """Random primal point and seeds for :func:`check_order`."""
    p = entry.program
    lo = np.array([b[0] for b in entry.box])
    hi = np.array([b[1] for b in entry.box])
    x = rng.uniform(lo, hi)
    shapes, out = infer_shapes(p, prefix)
    seeds = [random_direction(rng, s.dim) for s in shapes]
    return x, seeds, random_direction(rng, p.n_inputs), random_direction(rng, out.dim)


def _as_entry(item) -> CorpusEntry:
    if isinstance(item, CorpusEntry):
        return item
    if isinstance(item, Program):
        return CorpusEntry(item, (DEFAULT_BOX,) * item.n_inputs)
    raise TypeError(f"corpus items must be Program or CorpusEntry, got {type(item).__name__}")


def run_suite(
    corpus: Iterable,
    max_order: int = 3,
    trials: int = 10,
    rng_seed: int = DEFAULT_RNG_SEED,
    tol: TolerancePolicy = TolerancePolicy(),
    table: ElementalTable = DEFAULT_TABLE,
    tables: dict | None = None,
    all_prefixes: bool = False,
    cap: int | None = None,
) -> list[InvariantReport]:
    """Check invariants of orders 1..max_order on every corpus program.

    By default one representative prefix per invariant class is checked
    (ν prefixes at order ν); ``all_prefixes`` checks all 2^(ν−1). Draws are
    reproducible: each case seeds its own generator from
    ``(rng_seed, program index, ν, prefix index, trial)``. ``tables`` maps
    program names to a table that replaces ``table`` for that program.
    A case that raises yields a report with verdict ``"error"``.
    """
    entries = [_as_entry(e) for e in corpus]
    if not entries:
        raise ValueError("corpus is empty")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    cap = order_cap() if cap is None else cap
    if not 1 <= max_order <= cap:
        raise OrderCapError(f"max_order must lie in 1..{cap}, got {max_order}")
    tables = tables or {}
    reports = []
    for pi, entry in enumerate(entries):
        tbl = tables.get(entry.name, table)
        for nu in range(1, max_order + 1):
            if all_prefixes:
                prefixes = all_words(nu - 1)
            else:
                prefixes = [c.words[0] for c in enumerate_invariant_classes(nu, cap)]
            for wi, prefix in enumerate(prefixes):
                for trial in range(trials):
                    rng = np.random.default_rng([rng_seed, pi, nu, wi, trial])
                    try:
                        x, seeds, xs, vs = draw_case(entry, prefix, rng)
                        r = check_order(entry.program, prefix, x, seeds, xs, vs, tol=tol, table=tbl, cap=cap)
                        r.rng_seed = rng_seed
                        r.trial = trial
                    except AdinvarError as err:
                        r = InvariantReport(
                            entry.name, str(prefix), nu, None, None, None, None, "error",
                            rng_seed=rng_seed, trial=trial, abs_tol=tol.abs_tol,
                            rel_tol=tol.rel_for(nu), error=str(err),
                        )
                    reports.append(r)
    return reports


def summarize(reports: Sequence[InvariantReport]) -> dict:
    counts = {"pass": 0, "fail": 0, "error": 0}
    for r in reports:
        counts[r.verdict] = counts.get(r.verdict, 0) + 1
    worst = max((r.rel_err for r in reports if r.rel_err is not None), default=0.0)
    return {"total": len(reports), **counts, "worst_rel_err": worst}
