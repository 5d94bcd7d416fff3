"""Command line front end: ``adinvar check | derive | debug | oracle``.

Exit codes: 0 when every check passes, 1 when a mathematical failure is
detected, 2 on usage, parse or environment errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .debugger import debug_forward, fd_cross_check, load_faults, apply_faults
from .engine import all_words, as_word, derive, infer_shapes, order_cap
from .errors import AdinvarError
from .invariants import DEFAULT_RNG_SEED, TolerancePolicy, random_direction, run_suite, summarize
from .oracle import FDConfig, contract_word, fd_tensor
from .program import load_corpus, load_entry
from .scalar import DEFAULT_TABLE

ORACLE_TOL = 1e-4


class UsageError(Exception):
    pass


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _vec(v) -> str:
    return " ".join(_fmt(t) for t in np.atleast_1d(v))


def _parse_vector(text: str) -> list[float]:
    text = text.strip()
    try:
        if text.startswith("["):
            return [float(t) for t in json.loads(text)]
        return [float(t) for t in text.replace(",", " ").split()]
    except (ValueError, TypeError):
        raise UsageError(f"cannot read a vector from {text!r}") from None


def _load_seed_spec(text: str):
    """``ones``, a JSON file, or inline JSON: a list of vectors or ``{"x": ..., "seeds"/"xdot": ...}``."""
    if text == "ones":
        return "ones"
    path = Path(text)
    raw = path.read_text(encoding="utf-8") if path.exists() else text
    try:
        data = json.loads(raw)
    except json.JSONDecodeError:
        raise UsageError(f"--seeds must be 'ones', a JSON file or inline JSON, got {text!r}") from None
    if isinstance(data, list):
        data = {"seeds": data}
    if not isinstance(data, dict):
        raise UsageError("seed JSON must be a list or an object")
    return data


def _table(args):
    if not getattr(args, "faults", None):
        return DEFAULT_TABLE
    return apply_faults(DEFAULT_TABLE, load_faults(args.faults))


def _tolerance(args) -> TolerancePolicy:
    base = TolerancePolicy()
    return TolerancePolicy(
        abs_tol=base.abs_tol if args.abs_tol is None else args.abs_tol,
        rel_tol=base.rel_tol if args.rel_tol is None else args.rel_tol,
    )


def _write(args, text: str):
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _point(args, entry, spec) -> np.ndarray:
    if args.x is not None:
        x = _parse_vector(args.x)
    elif isinstance(spec, dict) and "x" in spec:
        x = [float(t) for t in spec["x"]]
    else:
        return entry.midpoint()
    if len(x) != entry.program.n_inputs:
        raise UsageError(f"x has length {len(x)}, program has {entry.program.n_inputs} inputs")
    return np.array(x)


def cmd_check(args) -> int:
    cap = order_cap()
    if not 1 <= args.max_order <= cap:
        raise UsageError(f"--max-order must lie in 1..{cap} (ADINVAR_ORDER_CAP), got {args.max_order}")
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    corpus = load_corpus(args.paths)
    if not corpus:
        raise UsageError("no .sac programs found")
    reports = run_suite(
        corpus,
        max_order=args.max_order,
        trials=args.trials,
        rng_seed=args.rng_seed,
        tol=_tolerance(args),
        table=_table(args),
        all_prefixes=args.all_prefixes,
    )
    if args.format == "json":
        text = "".join(r.to_json() + "\n" for r in reports)
    else:
        lines = []
        for r in reports:
            if r.verdict != "pass":
                detail = r.error if r.error else f"lhs={_fmt(r.lhs)} rhs={_fmt(r.rhs)} rel_err={r.rel_err:.3e}"
                lines.append(f"{r.verdict.upper():5} {r.program} nu={r.nu} prefix={r.prefix or '-'} "
                             f"trial={r.trial} {detail}")
        s = summarize(reports)
        lines.append(f"{s['total']} checks: {s['pass']} pass, {s['fail']} fail, {s['error']} error; "
                     f"worst rel_err {s['worst_rel_err']:.3e}")
        text = "\n".join(lines) + "\n"
    _write(args, text)
    return 0 if all(r.passed for r in reports) else 1


def cmd_derive(args) -> int:
    entry = load_entry(args.program)
    p = entry.program
    word = as_word(args.word)
    if args.seeds is None and not args.random_seeds:
        raise UsageError("derive needs --seeds or --random-seeds")
    spec = _load_seed_spec(args.seeds) if args.seeds is not None else None
    x = _point(args, entry, spec)
    shapes, _ = infer_shapes(p, word)
    if args.random_seeds:
        rng = np.random.default_rng(args.rng_seed)
        seeds = [random_direction(rng, s.dim) for s in shapes]
    elif spec == "ones":
        seeds = [np.ones(s.dim) for s in shapes]
    else:
        seeds = spec.get("seeds")
        if seeds is None:
            raise UsageError("seed JSON needs a 'seeds' list")
    res = derive(p, word, x, seeds, table=_table(args))
    if args.format == "json":
        out = {
            "program": p.name,
            "word": str(word),
            "name": word.name,
            "shape": str(res.shape),
            "x": list(map(float, x)),
            "value": res.value.tolist(),
            "primal_y": res.primal_y.tolist(),
            "intermediate_v": res.intermediate_v.tolist(),
        }
        _write(args, json.dumps(out) + "\n")
    else:
        _write(
            args,
            f"program: {p.name}\n"
            f"word: {word} ({word.name})\n"
            f"x: {_vec(x)}\n"
            f"shape: {res.shape}\n"
            f"value: {_vec(res.value)}\n",
        )
    return 0


def cmd_debug(args) -> int:
    entry = load_entry(args.program)
    p = entry.program
    spec = _load_seed_spec(args.seeds) if args.seeds is not None else None
    x = _point(args, entry, spec)
    if spec == "ones" or spec is None:
        xdot = np.ones(p.n_inputs) if spec == "ones" else random_direction(np.random.default_rng(args.rng_seed), p.n_inputs)
    else:
        xdot = spec.get("xdot")
        if xdot is None:
            raise UsageError("seed JSON for debug needs an 'xdot' vector")
    table = _table(args)
    steps = None
    if args.steps:
        steps = [int(t) for t in args.steps.replace(",", " ").split()]
    reports, first = debug_forward(p, table, x, xdot, rng_seed=args.rng_seed, tol=_tolerance(args), steps=steps)
    cross = fd_cross_check(p, table, x, xdot)
    invariants_ok = all(r.verdict != "fail" for r in reports)
    if cross.verdict == "fail" and invariants_ok:
        message = "shared conceptual error suspected"
    elif first is not None:
        message = f"tangent/adjoint inconsistency first detected at step {first}"
    elif cross.verdict == "fail":
        message = "finite differences disagree with the tangent"
    else:
        message = "finite differences, tangents and adjoints agree"
    if args.format == "json":
        out = {
            "program": p.name,
            "steps": [
                {
                    "step": r.step, "target": r.target, "elemental": r.elemental,
                    "lhs": r.lhs, "rhs": r.rhs, "abs_err": r.abs_err, "rel_err": r.rel_err,
                    "verdict": r.verdict,
                }
                for r in reports
            ],
            "first_failure": first,
            "fd": {"jvp": cross.jvp.tolist(), "fd": cross.fd.tolist(), "rel_err": cross.rel_err,
                   "verdict": cross.verdict},
            "message": message,
        }
        _write(args, json.dumps(out) + "\n")
    else:
        lines = [f"{'step':>4}  {'target':<8} {'elemental':<9} {'lhs':>24} {'rhs':>24} {'rel_err':>10}  verdict"]
        for r in reports:
            lines.append(f"{r.step:>4}  {r.target:<8} {r.elemental:<9} {_fmt(r.lhs):>24} {_fmt(r.rhs):>24} "
                         f"{r.rel_err:>10.3e}  {r.verdict}")
        lines.append(f"first failure: {first if first is not None else 'none'}")
        lines.append(f"finite differences: jvp={_vec(cross.jvp)} fd={_vec(cross.fd)} "
                     f"rel_err={cross.rel_err:.3e} {cross.verdict}")
        lines.append(message)
        _write(args, "\n".join(lines) + "\n")
    return 1 if (first is not None or cross.verdict == "fail") else 0


def cmd_oracle(args) -> int:
    entry = load_entry(args.program)
    p = entry.program
    x = _point(args, entry, None)
    t = fd_tensor(p, x, args.order, FDConfig())
    rng = np.random.default_rng(args.rng_seed)
    table = _table(args)
    residual = 0.0
    for w in all_words(args.order):
        shapes, _ = infer_shapes(p, w)
        seeds = [random_direction(rng, s.dim) for s in shapes]
        got = derive(p, w, x, seeds, table=table).value
        want = contract_word(t, w, seeds)
        err = np.abs(got - want) / np.maximum(1.0, np.abs(want))
        residual = max(residual, float(np.max(err)))
    ok = residual <= ORACLE_TOL
    entries = np.round(t.entries, 10) + 0.0
    if args.format == "json":
        out = {
            "program": p.name,
            "order": args.order,
            "x": list(map(float, x)),
            "tensor": t.entries.tolist(),
            "symmetry_residual": t.asymmetry,
            "derive_residual": residual,
            "verdict": "pass" if ok else "fail",
        }
        _write(args, json.dumps(out) + "\n")
    else:
        if t.entries.size <= 64:
            body = np.array2string(entries, precision=8, suppress_small=True)
        else:
            body = "sha256 " + hashlib.sha256(t.entries.tobytes()).hexdigest()
        _write(
            args,
            f"program: {p.name}\norder: {args.order}\nx: {_vec(x)}\n"
            f"tensor (k, j1, ...):\n{body}\n"
            f"symmetry residual: {t.asymmetry:.3e}\n"
            f"derive-vs-contraction residual: {residual:.3e} ({'pass' if ok else 'fail'})\n",
        )
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adinvar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, tolerances=True):
        sp.add_argument("--rng-seed", type=int, default=DEFAULT_RNG_SEED)
        sp.add_argument("--faults", help="JSON fault registry applied to the elemental table")
        sp.add_argument("--format", choices=("text", "json"), default="text")
        sp.add_argument("--out", help="write the report here instead of stdout")
        if tolerances:
            sp.add_argument("--abs-tol", type=float)
            sp.add_argument("--rel-tol", type=float)

    sp = sub.add_parser("check", help="differential invariants over a corpus")
    sp.add_argument("paths", nargs="+", help=".sac files or directories")
    sp.add_argument("--max-order", type=int, default=3)
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--all-prefixes", action="store_true", help="check every prefix word, not one per class")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("derive", help="evaluate one derivative program")
    sp.add_argument("program")
    sp.add_argument("--word", required=True, help="modes in application order, e.g. 'ataat'")
    sp.add_argument("--x", help="primal point, e.g. '1,2'")
    sp.add_argument("--seeds", help="'ones', a JSON file or inline JSON")
    sp.add_argument("--random-seeds", action="store_true")
    common(sp, tolerances=False)
    sp.set_defaults(func=cmd_derive)

    sp = sub.add_parser("debug", help="stepwise tangent/adjoint consistency and finite differences")
    sp.add_argument("program")
    sp.add_argument("--x")
    sp.add_argument("--seeds", help="'ones', or JSON with an 'xdot' vector")
    sp.add_argument("--steps", help="only check these step indices, e.g. '1,3'")
    common(sp)
    sp.set_defaults(func=cmd_debug)

    sp = sub.add_parser("oracle", help="finite-difference derivative tensor and comparison")
    sp.add_argument("program")
    sp.add_argument("--order", type=int, default=2)
    sp.add_argument("--x")
    common(sp, tolerances=False)
    sp.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, AdinvarError, OSError, ValueError, KeyError) as err:
        print(f"adinvar {args.command}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
