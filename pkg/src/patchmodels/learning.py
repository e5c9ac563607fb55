"""Unitary dictionary learning for the SP, GS and JS models.

Each learner alternates two exact minimisation steps on
``sum ||Z - D X||_F^2`` subject to ``D^T D = I``:

* coding: ``X = H_K(D^T Z)`` column-wise (SP, GS) or row-wise
  ``X_i = row_threshold(D^T Z_i, K)`` (JS);
* dictionary: orthogonal Procrustes, ``D = U V^T`` with
  ``U S V^T = svd(Z X^T)``.

Both steps are global minimisers of their block, so the objective trace is
non-increasing.  Iteration counts are fixed; there is no early exit.
"""

from dataclasses import dataclass

import numpy as np

from .imageio import rng_from_seed
from .projectors import (SparseCode, hard_threshold, row_threshold, svd)

__all__ = [
    "INITS",
    "LearnConfig",
    "is_unitary",
    "dct_dictionary",
    "random_orthonormal",
    "initial_dictionary",
    "sparse_code_sp",
    "update_dictionary",
    "learn_sp",
    "learn_gs",
    "learn_js",
    "save_dictionary",
    "load_dictionary",
    "format_dictionary",
    "parse_dictionary",
]

INITS = ("identity", "dct_like", "seeded_random_orthonormal")


@dataclass
class LearnConfig:
    """Settings shared by the learners.

    `init` is one of :data:`INITS` or an explicit ``n x n`` (or, for
    :func:`learn_gs`, ``N x n x n``) array used as a warm start.
    """

    K: int
    iters: int = 20
    init: object = "identity"
    seed: int = 0

    def __post_init__(self):
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        if isinstance(self.init, str) and self.init not in INITS:
            raise ValueError(f"unknown init {self.init!r}; expected one of {INITS}")


def is_unitary(D, tol=1e-10):
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[-1]
    return D.shape[-2:] == (n, n) and np.max(np.abs(np.swapaxes(D, -1, -2) @ D - np.eye(n))) <= tol


def _dct_1d(n):
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    C = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    C[0] /= np.sqrt(2.0)
    return C.T  # columns are atoms


def dct_dictionary(n):
    """Orthonormal DCT-II atoms; separable 2-D DCT when `n` is a square."""
    side = int(round(np.sqrt(n)))
    if side * side == n:
        return np.kron(_dct_1d(side), _dct_1d(side))
    return _dct_1d(n)


def random_orthonormal(n, seed):
    """Haar-distributed orthogonal matrix from a seeded generator."""
    A = rng_from_seed(seed).standard_normal((n, n))
    Q, R = np.linalg.qr(A)
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Q * d


def initial_dictionary(n, init="identity", seed=0):
    if not isinstance(init, str):
        D = np.array(init, dtype=np.float64)
        if D.shape[-2:] != (n, n):
            raise ValueError(f"initial dictionary must be {n}x{n}")
        return D
    if init == "identity":
        return np.eye(n)
    if init == "dct_like":
        return dct_dictionary(n)
    if init == "seeded_random_orthonormal":
        return random_orthonormal(n, seed)
    raise ValueError(f"unknown init {init!r}")


def sparse_code_sp(D, z, K):
    """Optimal ``K``-sparse code of `z` under the unitary dictionary `D`.

    For unitary `D`, ``||z - D x|| = ||D^T z - x||``, so the synthesis
    problem is solved exactly by hard-thresholding the transform
    coefficients.
    """
    D = np.asarray(D, dtype=np.float64)
    return SparseCode(hard_threshold(D.T @ np.asarray(z, dtype=np.float64), K))


def update_dictionary(Z, X, current=None):
    """Unitary ``D`` minimising ``||Z - D X||_F`` (orthogonal Procrustes).

    Accepts stacks of problems.  When ``Z X^T`` vanishes every unitary
    matrix is optimal and `current` (default: identity) is returned.
    """
    Z = np.asarray(Z, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    A = Z @ np.swapaxes(X, -1, -2)
    return _procrustes(A, current)


def _procrustes(A, current):
    n = A.shape[-1]
    if current is None:
        current = np.broadcast_to(np.eye(n), A.shape)
    U, _, Vt = svd(A)
    D = U @ Vt
    degenerate = ~np.any(A != 0, axis=(-2, -1))
    if np.any(degenerate):
        D = np.where(degenerate[..., None, None], current, D)
    return D


def _objective(Z, D, X):
    R = Z - D @ X
    return np.sum(R * R, axis=(-2, -1))


def _as_matrix(patches):
    Z = np.asarray(patches, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] == 0:
        raise ValueError("patches must be a non-empty n x P matrix (columns are patches)")
    return Z


def learn_sp(patches, cfg):
    """Learn one unitary dictionary for ``K``-sparse coding of all patches.

    Parameters
    ----------
    patches : array_like
      ``n x P`` matrix, one patch per column.
    cfg : LearnConfig

    Returns
    -------
    D : ndarray
      Learned ``n x n`` unitary dictionary.
    trace : ndarray
      Objective ``sum_i ||z_i - D x_i||^2`` after each iteration.
    """
    Z = _as_matrix(patches)
    D = initial_dictionary(Z.shape[0], cfg.init, cfg.seed)
    trace = []
    for _ in range(cfg.iters):
        X = hard_threshold(D.T @ Z, cfg.K)
        D = update_dictionary(Z, X, D)
        trace.append(_objective(Z, D, X))
    return D, np.asarray(trace)


def _stack(groups):
    shapes = {np.shape(Y) for Y in groups}
    if len(shapes) == 1:
        return np.asarray(groups, dtype=np.float64)
    return None


def learn_gs(groups, cfg):
    """Learn a separate unitary dictionary for every group.

    Group ``i`` only sees its own patches.  Groups of equal size are
    processed as one batched computation.

    Returns
    -------
    dicts : list of ndarray
    traces : list of ndarray
    """
    groups = list(groups)
    if not groups:
        return [], []
    n = np.shape(groups[0])[0]
    init = initial_dictionary(n, cfg.init, cfg.seed)
    Zs = _stack(groups)
    if Zs is None:
        out = []
        for i, Z in enumerate(groups):
            D0 = init[i] if init.ndim == 3 else init
            out.append(learn_sp(Z, LearnConfig(cfg.K, cfg.iters, D0, cfg.seed)))
        return [d for d, _ in out], [t for _, t in out]
    D = np.array(np.broadcast_to(init, (len(groups), n, n)))
    trace = []
    for _ in range(cfg.iters):
        X = hard_threshold(np.swapaxes(D, -1, -2) @ Zs, cfg.K)
        D = update_dictionary(Zs, X, D)
        trace.append(_objective(Zs, D, X))
    trace = np.asarray(trace).T
    return list(D), list(trace)


def learn_js(groups, cfg):
    """Learn one unitary dictionary for jointly sparse coding of all groups.

    Returns
    -------
    D : ndarray
    trace : ndarray
      Objective ``sum_i ||Z_i - D X_i||_F^2`` after each iteration.
    """
    groups = [np.asarray(Y, dtype=np.float64) for Y in groups]
    if not groups:
        raise ValueError("need at least one group")
    n = groups[0].shape[0]
    D = initial_dictionary(n, cfg.init, cfg.seed)
    Zs = _stack(groups)
    trace = []
    for _ in range(cfg.iters):
        if Zs is not None:
            X = row_threshold(D.T @ Zs, cfg.K)
            A = np.einsum("gik,gjk->ij", Zs, X)
        else:
            X = [row_threshold(D.T @ Z, cfg.K) for Z in groups]
            A = sum(Z @ x.T for Z, x in zip(groups, X))
        D = _procrustes(A, D)
        if Zs is not None:
            trace.append(float(np.sum(_objective(Zs, D, X))))
        else:
            trace.append(float(sum(_objective(Z, D, x) for Z, x in zip(groups, X))))
    return D, np.asarray(trace)


def format_dictionary(D):
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if D.shape != (n, n):
        raise ValueError("dictionary must be square")
    rows = [" ".join(f"{v:.17g}" for v in row) for row in D]
    return f"DICT n={n}\n" + "\n".join(rows) + "\n"


def parse_dictionary(text):
    lines = [l for l in text.splitlines() if l.strip()]
    if not lines or not lines[0].startswith("DICT n="):
        raise ValueError("missing 'DICT n=<n>' header")
    n = int(lines[0][len("DICT n="):])
    D = np.array([[float(v) for v in l.split()] for l in lines[1:]])
    if D.shape != (n, n):
        raise ValueError(f"expected {n}x{n} values, got shape {D.shape}")
    return D


def save_dictionary(D, path):
    with open(path, "w") as f:
        f.write(format_dictionary(D))


def load_dictionary(path):
    with open(path) as f:
        return parse_dictionary(f.read())
