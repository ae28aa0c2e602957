"""Latin hypercube context sets and Welch's t-test on seed results.

Run: python3 demos/05_lhs_and_welch.py
"""

import numpy as np

from ctxrl.lhs import lhs_sample
from ctxrl.spaces import ContextSpace
from ctxrl.stats import welch_t_test

print("== LHS: one sample per stratum per dimension ==")
space = ContextSpace((("gravity", 1.0, 20.0), ("mass", 0.1, 2.0)))
pts = lhs_sample(7, space, seed=1000)
for p in pts:
    print(f"  id {p.context_id}: g={p.values[0]:6.2f}  m={p.values[1]:5.2f}")
g = np.sort([p.values[0] for p in pts])
strata = np.floor((g - 1.0) / 19.0 * 7).astype(int)
print(f"gravity strata occupied: {strata.tolist()}  (each exactly once)")

tr = lhs_sample(7, space, seed=1000)
va = lhs_sample(7, space, seed=1001)
te = lhs_sample(7, space, seed=1002)
print("\ntrain/validation/test sets from distinct seeds; first gravity of each:")
print(f"  {tr[0].values[0]:.3f} / {va[0].values[0]:.3f} / {te[0].values[0]:.3f}")

print("\n== Welch's t-test on per-seed mean returns ==")
aware = [-310.0, -305.5, -321.0, -298.0, -312.5]
agnostic = [-355.0, -348.2, -370.1, -339.9, -361.0]
res = welch_t_test(aware, agnostic)
print(f"aware vs agnostic: t={res.t:.3f}, df={res.df:.2f}, p={res.p:.4g}")

close_a = [-310.0, -305.5, -321.0]
close_b = [-311.0, -306.0, -322.5]
res2 = welch_t_test(close_a, close_b)
print(f"two similar methods: t={res2.t:.3f}, df={res2.df:.2f}, p={res2.p:.4g} "
      f"(p > 0.05: no significant difference)")
