"""Arbitrary-order tangent and adjoint derivative programs over single
assignment code, with differential invariants to validate them."""

from .engine import A, T, DerivResult, Mode, ModeWord, Shape, derive, infer_shapes, jvp, second_order, vjp
from .errors import (
    AdinvarError,
    DomainError,
    NonDifferentiableError,
    OrderCapError,
    ParseError,
    SeedShapeError,
    SizeGuardError,
)
from .program import CorpusEntry, Program, eval_primal, load_corpus, load_program, parse_program, validate_program
from .scalar import DEFAULT_TABLE, ElementalTable, elemental_partials, elemental_value

__version__ = "0.1.0"

__all__ = [
    "A", "T", "DerivResult", "Mode", "ModeWord", "Shape",
    "derive", "infer_shapes", "jvp", "second_order", "vjp",
    "AdinvarError", "DomainError", "NonDifferentiableError", "OrderCapError",
    "ParseError", "SeedShapeError", "SizeGuardError",
    "CorpusEntry", "Program", "eval_primal", "load_corpus", "load_program",
    "parse_program", "validate_program",
    "DEFAULT_TABLE", "ElementalTable", "elemental_partials", "elemental_value",
]
