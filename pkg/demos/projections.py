"""
Projections onto the model sets
===============================

Each model set has a cheap projector: hard thresholding of coefficients
(SP), row thresholding for a shared support (JS), and truncated SVD (LR).
Membership of a collection of groups can be checked with or without a
witness dictionary.
"""

import numpy as np

from patchmodels import (ModelSpec, check_membership, hard_threshold, l0_inf_norm, lr_project,
                         row_threshold)
from patchmodels.learning import random_orthonormal

rng = np.random.default_rng(0)


"""
H_K keeps the K largest magnitudes of every column; ties go to the smaller
index.  The row version keeps the K rows of largest norm.
"""

B = np.array([[3.0, -1.0], [-3.0, 0.5], [0.2, 4.0], [1.0, 1.0]])
print("H_1 per column:\n", hard_threshold(B, 1))
print("row threshold, K=2:\n", row_threshold(B, 2))
print("nonzero rows:", l0_inf_norm(row_threshold(B, 2)))


"""
Truncated SVD is the best rank-K approximation; its error is the tail of
the squared singular values.
"""

Y = rng.normal(size=(8, 64))
L, record = lr_project(Y, 3)
s = np.linalg.svd(Y, compute_uv=False)
print("rank-3 error", np.sum((Y - L) ** 2), "tail", np.sum(s[3:] ** 2))
print("replayed on the same data:", np.allclose(record.apply([Y])[0], L))


"""
Membership.  Groups synthesised from K atoms of one dictionary with a
shared support are JS, and so SP, GS, LR too.
"""

D = random_orthonormal(6, 3)
X = np.zeros((6, 10))
X[[1, 4]] = rng.normal(size=(2, 10))
groups = [D @ X, D @ (X * 2)]
for kind in ("SP", "JS", "LR"):
    m = check_membership(groups, ModelSpec(kind, 2), None if kind == "LR" else D)
    print(f"{kind:>2} at K=2: {bool(m)}")
print("SP at K=1:", bool(check_membership(groups, ModelSpec("SP", 1), D)))
