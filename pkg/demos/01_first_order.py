"""Tangents, adjoints and the first-order invariant on a small program."""

# %%
import numpy as np

from adinvar import jvp, parse_program, vjp
from adinvar.invariants import check_first_order

prog = parse_program(
    """
    inputs x1 x2
    outputs y1 y2
    v1 = mul x1 x2
    v2 = sin v1
    y1 = add v2 x1
    y2 = exp v1
    """,
    name="demo",
)
x = np.array([0.7, -1.1])

# %% one tangent and one adjoint sweep
xdot = np.array([1.0, 0.5])
ybar = np.array([0.3, -2.0])
y, ydot = jvp(prog, x, xdot)
_, xbar = vjp(prog, x, ybar)
print("y    =", y)
print("ydot =", ydot)
print("xbar =", xbar)

# %% both products are the same number, ybar . J xdot
print("xbar . xdot =", xbar @ xdot)
print("ybar . ydot =", ybar @ ydot)

# %% the library version reports the residual and a verdict
r = check_first_order(prog, x, xdot, ybar)
print(r.verdict, f"abs_err={r.abs_err:.1e}")

# %% many random draws
rng = np.random.default_rng(0)
errs = [
    check_first_order(prog, rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)).rel_err
    for _ in range(1000)
]
print("worst relative residual over 1000 draws:", max(errs))
