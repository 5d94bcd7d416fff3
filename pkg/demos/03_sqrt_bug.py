"""A wrong derivative of sqrt, seen by invariants, the debugger and finite differences."""

# %%
import numpy as np

from adinvar import DEFAULT_TABLE, jvp, parse_program, vjp
from adinvar.debugger import debug_forward, fd_cross_check, inject_fault, sqrt_sign_fault
from adinvar.invariants import check_first_order

prog = parse_program(
    """
    inputs x1
    outputs y1
    v1 = sqrt x1
    v2 = sin v1
    y1 = mul v2 v1
    """,
    name="pipeline",
)
x, xdot = [1.3], [0.7]

# %% d sqrt(u)/du taken as -1/(2 sqrt(u)), in the adjoint rules only
adjoint_bug = inject_fault(DEFAULT_TABLE, sqrt_sign_fault("adjoint"))
print(check_first_order(prog, x, xdot, [1.0], table=adjoint_bug))

# %% stepping through the program points at the sqrt step
reports, first = debug_forward(prog, adjoint_bug, x, xdot)
for r in reports:
    print(f"step {r.step} {r.elemental:5} lhs={r.lhs:+.6f} rhs={r.rhs:+.6f} {r.verdict}")
print("first failing step:", first)

# %% the same mistake in both modes is invisible to the invariant
both_bug = inject_fault(DEFAULT_TABLE, sqrt_sign_fault("both"))
reports, first = debug_forward(prog, both_bug, x, xdot)
print("debugger with shared error, first failure:", first)
print("tangent:", jvp(prog, x, xdot, both_bug)[1], "adjoint:", vjp(prog, x, [1.0], both_bug)[1] * xdot)

# %% finite differences never look at the derivative table
c = fd_cross_check(prog, both_bug, x, xdot)
print(f"jvp={c.jvp} fd={c.fd} rel_err={c.rel_err:.2f} -> {c.verdict}")

# %% the classic case, sqrt at 4
sq = parse_program("inputs x1\noutputs y1\ny1 = sqrt x1")
c = fd_cross_check(sq, both_bug, [4.0], [1.0])
print("sqrt'(4): tangent", c.jvp[0], "finite differences", np.round(c.fd[0], 10))
