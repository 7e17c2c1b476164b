"""
Checking the descent recursion of SGD on an ensemble
=====================================================

Run 64 independent SGD replications on a quadratic with bounded-variance
noise, then test the expected one-step descent inequality at every k with a
5-stderr tolerance.  Halving the right-hand side gives a negative control.
"""

from optlab.experiment import run_config
from optlab.optimizers import Schedule
from optlab.verifier import ConditionParams, check_complexity_curve, check_P3, check_recursion, recursion_spec

ens = run_config({"method": "sgd", "problem": {"name": "quadratic", "dim": 5}, "oracle": {"C": 0.0, "D": 1.0},
                  "schedule": {"kind": "inv_k", "c": 1.0}, "T": 1000, "reps": 64, "seed": 1})

rep = check_recursion(ens, "sgd_descent")
print("descent recursion:", rep.verdict, f"({rep.statistics['pass_fraction']:.3f} of k pass)")

bad = check_recursion(ens, recursion_spec("sgd_descent", 0.5))
print("halved right-hand side:", bad.verdict)

# step-length moments: E|x+ - x|^2 <= alpha^2 (A + B |grad f|^2) with A = D, B = 1
p3 = check_P3(ens, ConditionParams(b=2, q=2, p1=2, p2=2, A=1.0, B=1.0), Schedule("inv_k"))
print("step-length condition:", p3.verdict)

cc = check_complexity_curve(ens)
print(f"min_k E|grad f|^2 against T: slope {cc.statistics['slope']:.2f}")
