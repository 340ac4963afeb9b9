"""Hoelder stability on manifolds, and two ways it can fail.

The interval family ``chi_[a,b]`` under integration is Lipschitz stable, ball
indicators in ``L^p`` are Hoelder stable with exponent ``1/p``, and finite
Fejer measurements keep the constant bounded once ``N`` is large enough.
Two explicit counterexamples show why injectivity of the differential and
a nonvanishing weight are needed.

Run with ``python demos/02_stability_and_instability.py`` (about a minute).
"""
from __future__ import annotations

from chartrecon.forward import IDENTITY, INTEGRATION, multiplication
from chartrecon.manifolds import BallFamily, IntervalFamily
from chartrecon.stabilitylab import (
    counterexample_sin,
    counterexample_weight,
    empirical_stability,
    find_sufficient_N,
    projected_stability,
    weight_ratio_bound,
)

fam = IntervalFamily(eps=0.1)
K = fam.compact_spec()

# %%
# Stability of F itself: the largest ratio ||x - y|| / ||Fx - Fy|| over
# sampled pairs, and the log-log slope on near pairs.
rep = empirical_stability(fam, INTEGRATION, K, pairs=4000, seed=0)
print(f"interval/integration: C_hat {rep.C_hat:.3f}, alpha_hat {rep.alpha_hat:.4f}")

for p in (1.0, 2.0, 4.0):
    ball = BallFamily(n=2, p=p)
    r = empirical_stability(ball, IDENTITY, ball.compact_spec(), pairs=2000, seed=0)
    print(f"ball indicators in L^{p:g}: alpha_hat {r.alpha_hat:.4f} (expected {1 / p:g})")

# %%
# Finite measurements.  With N = 0 only the mean survives and the constant
# blows up; from moderate N on it settles near the constant of F.
for r in projected_stability(fam, INTEGRATION, K, [0, 4, 16, 64], pairs=1000, seed=0):
    print(f"N={r.N:3d}: C_hat {r.C_hat:.3g}")

scan = find_sufficient_N(fam, INTEGRATION, K, C=1.0, delta=0.05, N_grid=[4, 8, 16, 32, 64, 128], count=200)
print(f"smallest N with deficit below delta/(4C): {scan.N_star}")

# %%
# A C^1 function whose derivative is discontinuous at 0: at x_k = 1/(2 k pi)
# the derivative equals 1/(k pi), so it tends to 0 although f'(0) = 1.
print("f'(x_k) * k * pi:", [round(v * k * 3.141592653589793, 15) for k, v in zip((1, 10, 100), counterexample_sin([1, 10, 100]))])

# %%
# Multiplication by exp(-1/t): shifting the interval by t changes the image
# by roughly exp(-1/t), far less than any power of t.
ts = [0.2, 0.1, 0.05, 0.025]
print("weight:", multiplication().label)
for t, ratio in zip(ts, counterexample_weight(ts, alpha=1.0)):
    print(f"t={t:<6g} ratio {ratio:.3e} <= {weight_ratio_bound(t, 1.0):.3e}")
