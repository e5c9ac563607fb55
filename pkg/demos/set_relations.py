"""
How the model sets relate
=========================

The sets are nested in some directions and incomparable in others.  Every
strict or incomparable relation has a small explicit counterexample, and
the checker replays all of them over a range of sizes.
"""

import numpy as np

from patchmodels import verify_theorems
from patchmodels.settheory import (gen_gs_not_sp, gen_lr_not_sp, gen_sp_not_lr,
                                   gen_splr_not_js)


"""
Group sparse but not sparse: two groups, each sparse in its own rotated
basis, whose columns together span too many directions.
"""

cx = gen_gs_not_sp(n=2, K=1, theta=np.pi / 4)
print(cx.serialize())
for claim, result, ok in cx.evaluate():
    print(f"  {claim.spec.kind} at K={claim.spec.K}: {bool(result)} (expected {claim.expected})")


"""
The other constructions.
"""

for cx in (gen_sp_not_lr(3, 3, 2), gen_lr_not_sp(2, 1, 3), gen_splr_not_js(2)):
    ok = all(flag for _, _, flag in cx.evaluate())
    print(f"{cx.name}: all claims confirmed = {ok}")


"""
The full battery, as run by ``patchmodels verify``.
"""

summary = verify_theorems(samples=5)
print(summary.to_table())
print("all statements pass:", summary.passed)
