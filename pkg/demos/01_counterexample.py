"""
Gradient descent that meets the complexity bound but does not converge
=======================================================================

A 1-D function built from smooth bumps near 0.  Gradient descent from x = 1
with alternating step sizes visits exactly x^k = 1/(k+1).  The best gradient
seen so far shrinks like 1/T, yet half of the iterates sit on a bump plateau
where f' = 1.
"""

import numpy as np

from optlab.counterexample import counterexample_summary, run_counterexample
from optlab.plotting import plot_counterexample

tr = run_counterexample(10_000)

# the iterates are exact up to rounding
print("max |x^k - 1/(k+1)| =", np.max(np.abs(tr.x - 1.0 / (tr.k + 1))))

# odd k: plateau, f' = 1.  even k: f' = x^k = 1/(k+1)
for k in range(1, 7):
    print(f"k={k}  x={tr.x[k]:.6f}  f'={tr.grad[k]:.6f}")

summary = counterexample_summary(tr)
print("plateau parity:", summary["plateau_parity"])
print("min |f'|^2 =", summary["min_grad_sq"], "<= 1/T^2 =", 1.0 / tr.T ** 2)
print("sum alpha_k |f'|^2 =", summary["weighted_grad_sum"])

with open("counterexample.svg", "w") as fh:
    fh.write(plot_counterexample(run_counterexample(200)))
