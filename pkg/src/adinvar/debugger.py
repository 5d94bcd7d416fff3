"""Stepwise debugging of tangent/adjoint consistency, and fault injection.

:func:`debug_forward` runs the tangent SAC once, then for every step ``s``
seeds the adjoint of ``v_s`` with a random scalar, propagates it back to the
inputs over the forward tape truncated at ``s`` and checks

    x_(1) · x^(1) = v_s(1) · v_s^(1).

The least failing step localizes an inconsistent elemental. A rule that is
wrong identically in tangent and adjoint mode passes every such check;
:func:`fd_cross_check` compares against finite differences to catch it.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .engine import record_tape, tangent_sweep, jvp
from .errors import FaultSpecError, ParseError
from .invariants import DEFAULT_RNG_SEED, TolerancePolicy
from .oracle import FDConfig, fd_jvp
from .program import Program, _as_vector, execute, parse_program
from .scalar import ELEMENTALS, ElementalTable, ordered_dot

log = logging.getLogger(__name__)

FD_TOLERANCE = TolerancePolicy(abs_tol=1e-9, rel_tol=1e-6)


class FaultMode(enum.Enum):
    TANGENT_ONLY = "tangent"
    ADJOINT_ONLY = "adjoint"
    BOTH = "both"

    @classmethod
    def parse(cls, text) -> "FaultMode":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "tangent": cls.TANGENT_ONLY,
            "tangentonly": cls.TANGENT_ONLY,
            "adjoint": cls.ADJOINT_ONLY,
            "adjointonly": cls.ADJOINT_ONLY,
            "both": cls.BOTH,
        }
        try:
            return aliases[key]
        except KeyError:
            raise FaultSpecError(f"unknown fault mode {text!r}") from None


def compile_partial(expr: str, arity: int) -> Callable:
    """Turn a SAC fragment in ``u1``, ``u2`` (and ``c``, the ``@`` parameter) into a rule.

    Statements are separated by ``;`` or newlines and the last assigned
    variable is the value. A bare operand name such as ``"u2"`` is also
    accepted.
    """
    names = [f"u{i}" for i in range(1, arity + 1)] + ["c"]
    body = [s.strip() for s in expr.replace(";", "\n").splitlines() if s.strip()]
    if len(body) == 1 and body[0] in names:
        pos = names.index(body[0])
        return lambda args, c: (args + (0.0 if c is None else c,))[pos]
    if not body or "=" not in body[-1]:
        raise FaultSpecError(f"replacement {expr!r} must end with an assignment")
    result = body[-1].split("=", 1)[0].strip()
    text = "inputs " + " ".join(names) + "\noutputs " + result + "\n" + "\n".join(body) + "\n"
    try:
        prog = parse_program(text, name="replacement")
    except ParseError as err:
        raise FaultSpecError(f"bad replacement {expr!r}: {err}") from None

    def rule(args, c):
        return execute(prog, tuple(args) + (0.0 if c is None else float(c),))[0]

    return rule


@dataclass(frozen=True)
class FaultSpec:
    elemental: str
    mode: FaultMode
    replacement: tuple  # one SAC fragment (or callable(args, c)) per operand

    def __post_init__(self):
        if self.elemental not in ELEMENTALS:
            raise FaultSpecError(f"unknown elemental {self.elemental!r}")
        object.__setattr__(self, "mode", FaultMode.parse(self.mode))
        if isinstance(self.replacement, (str,)) or callable(self.replacement):
            object.__setattr__(self, "replacement", (self.replacement,))
        arity = ELEMENTALS[self.elemental].arity
        if len(self.replacement) != arity:
            raise FaultSpecError(
                f"{self.elemental} has {arity} operand(s) but {len(self.replacement)} replacement partial(s)"
            )

    def rule(self):
        arity = ELEMENTALS[self.elemental].arity
        parts = [r if callable(r) else compile_partial(r, arity) for r in self.replacement]
        return lambda args, c: tuple(f(tuple(args), c) for f in parts)


def inject_fault(table: ElementalTable, fault: FaultSpec) -> ElementalTable:
    """A copy of ``table`` whose tangent and/or adjoint rule for one elemental is replaced."""
    return table.replace(
        fault.elemental,
        fault.rule(),
        tangent=fault.mode in (FaultMode.TANGENT_ONLY, FaultMode.BOTH),
        adjoint=fault.mode in (FaultMode.ADJOINT_ONLY, FaultMode.BOTH),
    )


def apply_faults(table: ElementalTable, faults: Sequence[FaultSpec]) -> ElementalTable:
    for f in faults:
        table = inject_fault(table, f)
    return table


SQRT_SIGN_BUG = "h = const @ -0.5; s = sqrt u1; r = div h s"


def sqrt_sign_fault(mode="adjoint") -> FaultSpec:
    """d sqrt(u)/du taken as -1/(2 sqrt(u))."""
    return FaultSpec("sqrt", mode, (SQRT_SIGN_BUG,))


def parse_faults(data) -> list[FaultSpec]:
    """Fault registry: a JSON list of ``{elemental, mode, replacement}`` objects."""
    if isinstance(data, (str, bytes)):
        data = json.loads(data)
    if not isinstance(data, list):
        raise FaultSpecError("fault registry must be a JSON list")
    faults = []
    for i, item in enumerate(data):
        try:
            rep = item["replacement"]
            faults.append(FaultSpec(item["elemental"], item["mode"], tuple(rep) if isinstance(rep, list) else rep))
        except (KeyError, TypeError) as err:
            raise FaultSpecError(f"fault #{i}: expected elemental, mode and replacement ({err})") from None
    return faults


def load_faults(path) -> list[FaultSpec]:
    return parse_faults(Path(path).read_text(encoding="utf-8"))


@dataclass
class StepReport:
    step: int
    target: str
    elemental: str
    lhs: float
    rhs: float
    abs_err: float
    rel_err: float
    verdict: str
    adjoint_seed: float
    reached: tuple[int, ...] = ()  # steps whose adjoint was nonzero in this sweep

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def _step_seed(rng) -> float:
    while True:
        w = float(rng.uniform(-1.0, 1.0))
        if abs(w) >= 1e-3:
            return w


def debug_forward(
    p: Program,
    table: ElementalTable,
    x,
    xdot,
    rng_seed: int = DEFAULT_RNG_SEED,
    tol: TolerancePolicy = TolerancePolicy(),
    steps: Sequence[int] | None = None,
) -> tuple[list[StepReport], int | None]:
    """Check the first-order invariant after every step of ``p``.

    Returns the per-step reports and the least failing step (1-based), or
    ``None``. ``steps`` restricts the check to selected step indices; seeds
    are drawn for all steps regardless, so a selection does not change them.
    A step whose tangent is exactly zero is reported ``"inconclusive"``.
    """
    x = _as_vector(x, p.n_inputs)
    xdot = _as_vector(xdot, p.n_inputs, "xdot")
    _, dot = tangent_sweep(p, x, xdot, table)
    tape = record_tape(p, x, table)
    rng = np.random.default_rng(rng_seed)
    wanted = None if steps is None else set(steps)
    reports = []
    for s, step in enumerate(p.steps, start=1):
        w = _step_seed(rng)
        if wanted is not None and s not in wanted:
            continue
        vdot = dot.get(step.target)
        if vdot is None or vdot == 0.0 or step.target not in tape.position:
            # constants never carry a tangent; only an active zero deserves a warning
            level = logging.DEBUG if vdot is None else logging.WARNING
            log.log(level, "step %d (%s): tangent is exactly zero, invariant is vacuous", s, step.target)
            reports.append(StepReport(s, step.target, step.elemental, 0.0, 0.0, 0.0, 0.0, "inconclusive", w))
            continue
        trace: list[int] = []
        adj = tape.reverse({step.target: w}, start=tape.position[step.target], trace=trace)
        xbar = [adj.get(v, 0.0) for v in p.input_vars]
        lhs = ordered_dot(xbar, xdot)
        rhs = w * vdot
        abs_err, rel_err, ok = tol.judge(lhs, rhs, 1)
        reports.append(
            StepReport(s, step.target, step.elemental, lhs, rhs, abs_err, rel_err,
                       "pass" if ok else "fail", w, tuple(trace))
        )
    failing = [r.step for r in reports if r.verdict == "fail"]
    return reports, (min(failing) if failing else None)


@dataclass
class CrossCheckReport:
    program: str
    jvp: np.ndarray
    fd: np.ndarray
    abs_err: float
    rel_err: float
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def fd_cross_check(
    p: Program,
    table: ElementalTable,
    x,
    xdot,
    cfg: FDConfig = FDConfig(),
    tol: TolerancePolicy = FD_TOLERANCE,
) -> CrossCheckReport:
    """Tangent under ``table`` against a finite-difference tangent.

    The finite differences never consult the derivative table, so this is
    the check that exposes a rule that is wrong in both modes alike.
    """
    _, ydot = jvp(p, x, xdot, table)
    fd = fd_jvp(p, x, xdot, cfg)
    diff = np.abs(ydot - fd)
    abs_err = float(np.max(diff)) if diff.size else 0.0
    scale = max(float(np.max(np.abs(ydot))), float(np.max(np.abs(fd))))
    rel_err = abs_err / scale if scale > 0 else 0.0
    if scale == 0.0:
        verdict = "inconclusive"
    else:
        verdict = "pass" if abs_err <= max(tol.abs_tol, tol.rel_tol * scale) else "fail"
    return CrossCheckReport(p.name, ydot, fd, abs_err, rel_err, verdict)
