"""Single assignment code (SAC): program representation, text format, evaluation.

A ``.sac`` file looks like::

    # y = sin(sqrt(x)) * sqrt(x)
    inputs x1
    outputs y1
    v1 = sqrt x1
    v2 = sin v1
    y1 = mul v2 v1

Each assignment line is ``<id> = <elemental> <operand>... [@ <real>]``.
The ``@`` parameter is only used by ``powc`` (the exponent) and ``const``
(the value).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ParseError
from .scalar import ELEMENTALS, apply

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_TOKEN = re.compile(r"\S+")

DEFAULT_BOX = (0.5, 2.0)


@dataclass(frozen=True)
class Assignment:
    target: str
    elemental: str
    operands: tuple[str, ...]
    const_param: float | None = None
    line: int | None = field(default=None, compare=False)

    def __str__(self):
        text = f"{self.target} = {self.elemental}"
        if self.operands:
            text += " " + " ".join(self.operands)
        if self.const_param is not None:
            text += f" @ {self.const_param!r}"
        return text


@dataclass(frozen=True)
class Program:
    name: str
    input_vars: tuple[str, ...]
    output_vars: tuple[str, ...]
    steps: tuple[Assignment, ...]

    @property
    def n_inputs(self) -> int:
        return len(self.input_vars)

    @property
    def n_outputs(self) -> int:
        return len(self.output_vars)

    def to_text(self) -> str:
        """Canonical SAC serialization; ``parse_program`` inverts it."""
        lines = ["inputs " + " ".join(self.input_vars), "outputs " + " ".join(self.output_vars)]
        lines.extend(str(s) for s in self.steps)
        return "\n".join(lines) + "\n"

    def elementals(self) -> set[str]:
        return {s.elemental for s in self.steps}


@dataclass(frozen=True)
class Violation:
    kind: str
    step: int | None
    message: str


def validate_program(p: Program) -> list[Violation]:
    """Every structural problem of ``p``; an empty list means valid.

    Step indices in the result are 1-based.
    """
    out: list[Violation] = []
    if not p.input_vars:
        out.append(Violation("NoInputs", None, "program has no inputs"))
    if not p.output_vars:
        out.append(Violation("NoOutputs", None, "program has no outputs"))
    for name in p.input_vars + p.output_vars:
        if not _IDENT.match(name):
            out.append(Violation("BadIdentifier", None, f"invalid identifier {name!r}"))
    if len(set(p.input_vars)) != len(p.input_vars):
        out.append(Violation("DuplicateInput", None, "an input is listed twice"))
    if len(set(p.output_vars)) != len(p.output_vars):
        out.append(Violation("DuplicateOutput", None, "an output is listed twice"))
    for name in sorted(set(p.input_vars) & set(p.output_vars)):
        out.append(Violation("OutputIsInput", None, f"{name} is both input and output"))

    inputs = set(p.input_vars)
    defined = set(p.input_vars)
    assigned: set[str] = set()
    for s, step in enumerate(p.steps, start=1):
        e = ELEMENTALS.get(step.elemental)
        if not _IDENT.match(step.target):
            out.append(Violation("BadIdentifier", s, f"invalid identifier {step.target!r}"))
        if e is None:
            out.append(Violation("UnknownElemental", s, f"unknown elemental {step.elemental!r}"))
        else:
            if len(step.operands) != e.arity:
                out.append(
                    Violation(
                        "ArityMismatch",
                        s,
                        f"{step.elemental} takes {e.arity} operand(s), got {len(step.operands)}",
                    )
                )
            if e.has_param and step.const_param is None:
                out.append(Violation("ParamMissing", s, f"{step.elemental} needs '@ <real>'"))
            if not e.has_param and step.const_param is not None:
                out.append(Violation("ParamUnexpected", s, f"{step.elemental} takes no '@' parameter"))
        for op in step.operands:
            if op not in defined:
                out.append(Violation("UseBeforeDef", s, f"{op} used before assignment"))
        if step.target in inputs:
            out.append(Violation("InputAssigned", s, f"input {step.target} is assigned"))
        elif step.target in assigned:
            out.append(Violation("Reassigned", s, f"{step.target} is assigned twice"))
        assigned.add(step.target)
        defined.add(step.target)
    for name in p.output_vars:
        if name not in assigned and name not in inputs:
            out.append(Violation("OutputUndefined", None, f"output {name} is never assigned"))
    return out


def _parse_real(tok: str, line: int, col: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected a real number, got {tok!r}", line, col) from None


def _header(tokens, keyword, line):
    if not tokens or tokens[0][1] != keyword:
        col = tokens[0][0] if tokens else 1
        raise ParseError(f"expected '{keyword} <id> ...'", line, col)
    names = []
    for col, tok in tokens[1:]:
        if not _IDENT.match(tok):
            raise ParseError(f"invalid identifier {tok!r}", line, col)
        names.append(tok)
    if not names:
        raise ParseError(f"'{keyword}' needs at least one identifier", line, tokens[0][0] + len(keyword))
    return tuple(names)


def parse_program(text: str, name: str = "program") -> Program:
    """Parse SAC text into a validated :class:`Program`.

    Raises :class:`ParseError` with the offending line (and column where it
    is known) on the first syntax or structural problem.
    """
    header: list[tuple[str, ...]] = []
    steps: list[Assignment] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        tokens = [(m.start() + 1, m.group()) for m in _TOKEN.finditer(body)]
        if not tokens:
            continue
        if len(header) < 2:
            header.append(_header(tokens, ("inputs", "outputs")[len(header)], lineno))
            continue
        if len(tokens) < 3 or tokens[1][1] != "=":
            col = tokens[1][0] if len(tokens) > 1 else tokens[0][0] + len(tokens[0][1])
            raise ParseError("expected '<id> = <elemental> <operand>...'", lineno, col)
        tcol, target = tokens[0]
        if not _IDENT.match(target):
            raise ParseError(f"invalid identifier {target!r}", lineno, tcol)
        ecol, kind = tokens[2]
        if kind not in ELEMENTALS:
            raise ParseError(f"unknown elemental {kind!r}", lineno, ecol)
        rest = tokens[3:]
        param = None
        at = [i for i, (_, t) in enumerate(rest) if t == "@"]
        if at:
            i = at[0]
            if len(rest) != i + 2:
                col = rest[i][0]
                raise ParseError("'@' must be followed by exactly one real", lineno, col)
            param = _parse_real(rest[i + 1][1], lineno, rest[i + 1][0])
            rest = rest[:i]
        for col, tok in rest:
            if not _IDENT.match(tok):
                raise ParseError(f"invalid operand {tok!r}", lineno, col)
        steps.append(Assignment(target, kind, tuple(t for _, t in rest), param, line=lineno))
    if len(header) < 2:
        raise ParseError("missing 'inputs' and 'outputs' header lines", None)

    p = Program(name, header[0], header[1], tuple(steps))
    problems = validate_program(p)
    if problems:
        v = problems[0]
        line = p.steps[v.step - 1].line if v.step is not None else None
        raise ParseError(f"{v.kind}: {v.message}", line)
    return p


def execute(p: Program, inputs: Sequence) -> list:
    """Run ``p`` on ``inputs`` of any scalar type and return the outputs.

    Steps run strictly in SAC order. Domain errors are re-raised with the
    1-based step index attached.
    """
    env = dict(zip(p.input_vars, inputs))
    for s, step in enumerate(p.steps, start=1):
        try:
            env[step.target] = apply(step.elemental, [env[o] for o in step.operands], step.const_param)
        except DomainError as err:
            if err.step is not None:
                raise
            raise err.at_step(s, step.elemental) from err
    return [env[v] for v in p.output_vars]


def _as_vector(x, n, what="x") -> list[float]:
    v = [float(t) for t in np.asarray(x, dtype=float).ravel()]
    if len(v) != n:
        raise ValueError(f"{what} has length {len(v)}, expected {n}")
    return v


def eval_primal(p: Program, x) -> np.ndarray:
    """y = F(x) in plain floating point."""
    return np.array(execute(p, _as_vector(x, p.n_inputs)), dtype=float)


def load_program(path) -> Program:
    path = Path(path)
    return parse_program(path.read_text(encoding="utf-8"), name=path.stem)


# -- corpus ------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusEntry:
    """A program with the box its random primal points are drawn from."""

    program: Program
    box: tuple[tuple[float, float], ...]

    @property
    def name(self):
        return self.program.name

    def midpoint(self) -> np.ndarray:
        return np.array([(lo + hi) / 2 for lo, hi in self.box])


def parse_box(text: str, n: int) -> tuple[tuple[float, float], ...]:
    """Box sidecar: one ``lo hi`` line for all inputs, or one line per input."""
    rows = []
    for raw in text.splitlines():
        body = raw.split("#", 1)[0].split()
        if not body:
            continue
        if len(body) != 2:
            raise ValueError(f"box line needs 'lo hi', got {raw!r}")
        lo, hi = float(body[0]), float(body[1])
        if not lo < hi:
            raise ValueError(f"empty box interval [{lo}, {hi}]")
        rows.append((lo, hi))
    if len(rows) == 1:
        rows = rows * n
    if len(rows) != n:
        raise ValueError(f"box has {len(rows)} intervals, program has {n} inputs")
    return tuple(rows)


def load_entry(path) -> CorpusEntry:
    path = Path(path)
    p = load_program(path)
    box_path = path.with_suffix(".box")
    if box_path.exists():
        box = parse_box(box_path.read_text(encoding="utf-8"), p.n_inputs)
    else:
        box = (DEFAULT_BOX,) * p.n_inputs
    return CorpusEntry(p, box)


def corpus_dir() -> Path:
    """Directory of the bundled example corpus."""
    return Path(str(resources.files("adinvar") / "corpus"))


def load_corpus(paths: Iterable | None = None) -> list[CorpusEntry]:
    """Load ``.sac`` files (directories are scanned, sorted by file name)."""
    if paths is None:
        paths = [corpus_dir()]
    files = []
    for path in paths:
        path = Path(path)
        if path.is_dir():
            files.extend(sorted(path.glob("*.sac")))
        else:
            files.append(path)
    return [load_entry(f) for f in files]
