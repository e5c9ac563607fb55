"""Model-set primitives: thresholding, norms, low-rank projection, membership.

Patch groups are passed around as sequences of ``n x M_i`` matrices; a
3-D array of shape ``(N, n, M)`` is accepted wherever a list is.

The six model kinds (all at level ``K``) are

=====  =============================================================
SP     every patch ``K``-sparse under one shared unitary dictionary
GS     every patch ``K``-sparse under a per-group unitary dictionary
JS     every group row-sparse (``l0,inf <= K``) under one dictionary
GJS    every group row-sparse under a per-group dictionary
LR     every group has rank at most ``K``
SPLR   both SP and LR
=====  =============================================================
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

__all__ = [
    "KINDS",
    "L0_TOL",
    "RANK_TOL",
    "ModelSpec",
    "SparseCode",
    "Membership",
    "SparseRecord",
    "RowRecord",
    "SubspaceRecord",
    "ChainRecord",
    "MixtureRecord",
    "hard_threshold",
    "hard_threshold_mask",
    "row_threshold",
    "row_threshold_mask",
    "l0_norm",
    "l0_inf_norm",
    "svd",
    "lr_project",
    "rank_leq",
    "check_membership",
]

KINDS = ("SP", "GS", "JS", "GJS", "LR", "SPLR")
L0_TOL = 1e-12
RANK_TOL = 1e-9


@dataclass(frozen=True)
class ModelSpec:
    """A model kind and its level ``K`` (sparsity or rank)."""

    kind: str
    K: int

    def __post_init__(self):
        object.__setattr__(self, "kind", self.kind.upper())
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.K < 0:
            raise ValueError("K must be nonnegative")

    def check_sizes(self, groups):
        """Raise unless ``K < min(n, M_i)`` for every group."""
        for i, Y in enumerate(groups):
            n, m = np.shape(Y)
            if not self.K < min(n, m):
                raise ValueError(f"group {i}: need K < min(n, M_i) = {min(n, m)}")


@dataclass
class SparseCode:
    """A code vector together with its support."""

    values: np.ndarray

    @property
    def support(self):
        return np.flatnonzero(np.abs(self.values) > 0)


def _check_k(K, n):
    if K < 0:
        raise ValueError("K must be nonnegative")
    if K > n:
        raise ValueError(f"K={K} exceeds dimension {n}")


def _topk_mask(score, K, axis):
    # Largest K scores along `axis`; among ties at the cut the smaller
    # indices win.
    n = score.shape[axis]
    if K == 0:
        return np.zeros(score.shape, dtype=bool)
    if K >= n:
        return np.ones(score.shape, dtype=bool)
    kth = np.take(np.partition(score, n - K, axis=axis), [n - K], axis=axis)
    above = score > kth
    tied = score == kth
    room = K - np.sum(above, axis=axis, keepdims=True)
    return above | (tied & (np.cumsum(tied, axis=axis) <= room))


def hard_threshold_mask(b, K):
    """Support of :func:`hard_threshold` as a boolean array."""
    b = np.asarray(b, dtype=np.float64)
    axis = 0 if b.ndim == 1 else -2
    _check_k(K, b.shape[axis])
    return _topk_mask(np.abs(b), K, axis)


def hard_threshold(b, K):
    """Keep the `K` largest-magnitude entries, zero the rest.

    This is the Euclidean projection onto the set of ``K``-sparse vectors.
    Ties are broken in favour of the smaller index.  For a matrix (or a
    stack of matrices) the operator acts on every column independently.
    """
    b = np.asarray(b, dtype=np.float64)
    return np.where(hard_threshold_mask(b, K), b, 0.0)


def row_threshold_mask(B, K):
    """Boolean ``(..., n)`` mask of the rows kept by :func:`row_threshold`."""
    B = np.asarray(B, dtype=np.float64)
    if B.ndim < 2:
        raise ValueError("row_threshold expects a matrix")
    _check_k(K, B.shape[-2])
    return _topk_mask(np.sum(B * B, axis=-1), K, -1)


def row_threshold(B, K):
    """Keep the `K` rows of largest Euclidean norm, zero the others.

    The result has ``l0,inf`` norm at most `K`; it is the Frobenius-norm
    projection onto matrices with at most `K` nonzero rows.
    """
    B = np.asarray(B, dtype=np.float64)
    return np.where(row_threshold_mask(B, K)[..., None], B, 0.0)


def l0_norm(x, tol=L0_TOL):
    """Number of entries with magnitude above `tol`."""
    return int(np.count_nonzero(np.abs(np.asarray(x)) > tol))


def l0_inf_norm(B, tol=L0_TOL):
    """Number of rows of `B` holding at least one entry above `tol`."""
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    return int(np.count_nonzero(np.any(np.abs(B) > tol, axis=-1)))


def svd(Y, full_matrices=False):
    """SVD with a deterministic sign convention.

    Each left singular vector is flipped (together with its right
    partner) so that its largest-magnitude entry is positive.  Works on
    stacks of matrices.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if not np.all(np.isfinite(Y)):
        raise np.linalg.LinAlgError("SVD of a matrix with non-finite entries")
    U, s, Vt = np.linalg.svd(Y, full_matrices=full_matrices)
    idx = np.argmax(np.abs(U), axis=-2)
    signs = np.sign(np.take_along_axis(U, idx[..., None, :], axis=-2))
    signs[signs == 0] = 1.0
    U = U * signs
    k = s.shape[-1]
    Vt = Vt.copy()
    Vt[..., :k, :] *= np.swapaxes(signs[..., :k], -1, -2)
    return U, s, Vt


def lr_project(Y, K):
    """Best rank-`K` approximation of `Y` via truncated SVD.

    Returns
    -------
    L : ndarray
      ``P diag(H_K(s)) Q^T``.  Its squared Frobenius distance to `Y` is the
      sum of the squared singular values beyond the `K` largest.
    record : SubspaceRecord
      The leading `K` left singular vectors, replayable as ``U U^T``.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise ValueError("lr_project expects a matrix")
    if not 1 <= K <= min(Y.shape):
        raise ValueError(f"need 1 <= K <= {min(Y.shape)}")
    U, s, Vt = svd(Y)
    L = (U[:, :K] * s[:K]) @ Vt[:K]
    return L, SubspaceRecord([U[:, :K]])


def rank_leq(Y, K, tol=RANK_TOL):
    """True iff the ``(K+1)``-th singular value is at most ``tol * s_1``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    s = np.linalg.svd(np.asarray(Y, dtype=np.float64), compute_uv=False)
    if s.size <= K or s[0] == 0:
        return True
    return bool(s[K] <= tol * s[0])


def _numerical_rank(Y, tol):
    s = np.linalg.svd(np.asarray(Y, dtype=np.float64), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0, s
    return int(np.count_nonzero(s > tol * s[0])), s


# -- replayable linear projectors --------------------------------------------


def _as_list(groups):
    return [np.asarray(Y, dtype=np.float64) for Y in groups]


@dataclass
class SparseRecord:
    """Per-patch supports under per-group (or shared) dictionaries.

    ``dicts[i]`` is the dictionary of group ``i``; ``masks[i]`` the
    ``(n, M_i)`` boolean supports.  Replay computes
    ``D (mask * (D^T Z))`` for every group.
    """

    kind: str
    dicts: list
    masks: list

    def apply(self, groups):
        out = []
        for D, mask, Z in zip(self.dicts, self.masks, _as_list(groups)):
            out.append(D @ np.where(mask, D.T @ Z, 0.0))
        return out


@dataclass
class RowRecord:
    """Shared row supports ``(n,)`` per group under one dictionary."""

    kind: str
    dictionary: np.ndarray
    rows: list

    def apply(self, groups):
        D = self.dictionary
        return [D @ np.where(r[:, None], D.T @ Z, 0.0)
                for r, Z in zip(self.rows, _as_list(groups))]


@dataclass
class SubspaceRecord:
    """Orthonormal column-space bases; replay is ``U U^T Z``."""

    bases: list
    kind: str = "LR"

    def apply(self, groups):
        return [U @ (U.T @ Z) for U, Z in zip(self.bases, _as_list(groups))]


@dataclass
class ChainRecord:
    """Projectors applied one after another (first element first)."""

    records: list = field(default_factory=list)
    kind: str = "ALT"

    def apply(self, groups):
        out = _as_list(groups)
        for rec in self.records:
            out = rec.apply(out)
        return out


@dataclass
class MixtureRecord:
    """Weighted sum of projector outputs."""

    records: list
    weights: list
    kind: str = "CONVEX"

    def apply(self, groups):
        groups = _as_list(groups)
        parts = [rec.apply(groups) for rec in self.records]
        return [sum(w * p[i] for w, p in zip(self.weights, parts))
                for i in range(len(groups))]


# -- membership ---------------------------------------------------------------


@dataclass
class Membership:
    """Verdict of :func:`check_membership` with a plain-data certificate."""

    member: bool
    certificate: dict

    def __bool__(self):
        return self.member


def _witness_list(witness, count, shared):
    if witness is None:
        return None
    if shared:
        D = np.asarray(witness, dtype=np.float64)
        if D.ndim == 3:
            if len(D) != 1:
                raise ValueError("a shared-dictionary model takes one witness")
            D = D[0]
        return [D] * count
    dicts = [np.asarray(D, dtype=np.float64) for D in witness]
    if len(dicts) != count:
        raise ValueError(f"expected {count} witness dictionaries, got {len(dicts)}")
    return dicts


def _check_unitary(D, tol=1e-8):
    n = D.shape[0]
    if D.shape != (n, n) or np.max(np.abs(D.T @ D - np.eye(n))) > tol:
        raise ValueError("witness dictionary is not unitary")


def _witnessed(groups, dicts, K, joint, tol):
    for i, (Y, D) in enumerate(zip(groups, dicts)):
        _check_unitary(D)
        C = D.T @ Y
        thr = tol * max(np.max(np.abs(Y), initial=0.0), 1.0)
        nz = np.abs(C) > thr
        if joint:
            count = int(np.count_nonzero(nz.any(axis=1)))
            if count > K:
                return Membership(False, {"mode": "witness", "group": i,
                                          "nonzero_rows": count})
        else:
            per_col = nz.sum(axis=0)
            if per_col.size and per_col.max() > K:
                j = int(np.argmax(per_col))
                return Membership(False, {"mode": "witness", "group": i, "column": j,
                                          "nonzeros": int(per_col[j])})
    return Membership(True, {"mode": "witness"})


def _rank_check(groups, K, tol):
    for i, Y in enumerate(groups):
        rank, s = _numerical_rank(Y, tol)
        if rank > K:
            return Membership(False, {"mode": "rank", "group": i,
                                      "singular_value": float(s[K]),
                                      "rank_tol": tol})
    return Membership(True, {"mode": "rank", "rank_tol": tol})


def _distinct_lines(vectors, tol):
    lines = []
    for v in vectors:
        norm = np.linalg.norm(v)
        if norm == 0:
            continue
        u = v / norm
        if not any(abs(abs(u @ l) - 1.0) <= tol for l in lines):
            lines.append(u)
    return lines


def _lines_orthogonal(cols, tol):
    """K=1 decision: directions must form pairwise orthogonal lines."""
    thr = tol * max(np.max(np.abs(cols), initial=0.0), 1.0)
    cols = [c for c in cols.T if np.max(np.abs(c), initial=0.0) > thr]
    lines = _distinct_lines(cols, np.sqrt(tol))
    for a, b in combinations(range(len(lines)), 2):
        cos = abs(lines[a] @ lines[b])
        if cos > np.sqrt(tol):
            return False, {"lines": len(lines), "pair": (a, b), "abs_cos": float(cos)}
    return True, {"lines": len(lines)}


def _general_position(Y, K, tol):
    # Every K columns linearly independent.
    cols = Y / np.linalg.norm(Y, axis=0)
    for subset in combinations(range(Y.shape[1]), K):
        s = np.linalg.svd(cols[:, subset], compute_uv=False)
        if s[-1] <= np.sqrt(tol) * s[0]:
            return False
    return True


def _hyperplane_sparse(groups, K, shared, tol):
    # n = K + 1.  A rank-K group whose columns are in general position in
    # their span S, with more than (K+1)(K-1) columns, is K-sparse under D
    # only if S is orthogonal to an atom of D: each of the K+1 atoms' normal
    # hyperplanes meets S in a (K-1)-space holding at most K-1 columns.
    # SP then holds iff those normals pairwise commute (parallel or
    # orthogonal); GS always holds for rank <= K.
    projectors = []
    for i, Y in enumerate(groups):
        rank, _ = _numerical_rank(Y, tol)
        if not shared:
            if rank > K:
                raise ValueError(f"group {i} has full rank; no complete GS decision")
            continue
        if rank != K or Y.shape[1] <= (K + 1) * (K - 1) or not _general_position(Y, K, tol):
            raise ValueError(
                f"group {i} is not a generic rank-K group; no complete SP decision")
        U = svd(Y)[0][:, :K]
        projectors.append((i, U @ U.T))
    for (i, P), (j, Q) in combinations(projectors, 2):
        gap = np.max(np.abs(P @ Q - Q @ P))
        if gap > np.sqrt(tol):
            return Membership(False, {"mode": "brute_force_hyperplane", "pair": (i, j),
                                      "commutator": float(gap)})
    return Membership(True, {"mode": "brute_force_hyperplane"})


def _brute_sparse(groups, K, shared, tol):
    n = groups[0].shape[0]
    if K != 1:
        if K == n - 1:
            return _hyperplane_sparse(groups, K, shared, tol)
        raise ValueError("brute-force SP/GS membership needs K = 1 or K = n - 1")
    if shared:
        ok, info = _lines_orthogonal(np.hstack(groups), tol)
        return Membership(ok, {"mode": "brute_force", **info})
    for i, Y in enumerate(groups):
        ok, info = _lines_orthogonal(Y, tol)
        if not ok:
            return Membership(False, {"mode": "brute_force", "group": i, **info})
    return Membership(True, {"mode": "brute_force"})


def _brute_joint(groups, K, tol):
    # JS implies rank <= K per group.  When every nonzero group has rank
    # exactly K, a shared unitary D exists iff the orthogonal projectors
    # onto the column spaces pairwise commute.
    projectors = []
    for i, Y in enumerate(groups):
        rank, s = _numerical_rank(Y, tol)
        if rank > K:
            return Membership(False, {"mode": "subspace", "group": i,
                                      "singular_value": float(s[K]), "rank_tol": tol})
        if rank == 0:
            continue
        if rank < K:
            raise ValueError(
                f"group {i} has rank {rank} < K; no complete JS decision available")
        U = svd(Y)[0][:, :rank]
        projectors.append((i, U @ U.T))
    for (i, P), (j, Q) in combinations(projectors, 2):
        gap = np.max(np.abs(P @ Q - Q @ P))
        if gap > np.sqrt(tol):
            return Membership(False, {"mode": "subspace", "pair": (i, j),
                                      "commutator": float(gap)})
    return Membership(True, {"mode": "subspace"})


def check_membership(groups, spec, witness=None, tol=RANK_TOL, brute_force=False):
    """Decide whether `groups` lie in the model set described by `spec`.

    Parameters
    ----------
    groups : sequence of ndarray
      ``n x M_i`` patch matrices.
    spec : ModelSpec
      Model kind and level.
    witness : ndarray or sequence of ndarray, optional
      Unitary dictionary (SP, JS) or one dictionary per group (GS, GJS).
      With a witness the check is "the codes ``D^T Y_i`` have the required
      sparsity pattern", up to `tol` relative to the group's largest entry.
    tol : float
      Relative rank / sparsity tolerance.
    brute_force : bool
      Use a complete decision procedure instead of a witness: for SP and
      GS with ``K = 1`` (patch directions must form pairwise orthogonal
      lines) or ``K = n - 1`` with generic rank-``K`` groups (their
      hyperplanes must have parallel or orthogonal normals), and for JS
      when every nonzero group has rank exactly ``K`` (column-space
      projectors must commute).  Other cases raise ``ValueError``.

    Returns
    -------
    Membership
      Truthy verdict plus a certificate dict naming the decision mode and,
      on failure, the offending group, column or singular value.

    Raises
    ------
    ValueError
      If a sparsity model is checked with neither witness nor brute force.
    """
    groups = _as_list(groups)
    kind, K = spec.kind, spec.K
    if kind in ("LR",) or (kind == "GJS" and witness is None):
        return _rank_check(groups, K, tol)
    if kind == "SPLR":
        lr = _rank_check(groups, K, tol)
        if not lr:
            return lr
        sp = check_membership(groups, ModelSpec("SP", K), witness, tol, brute_force)
        return Membership(sp.member, {**sp.certificate, "rank_tol": tol})
    shared = kind in ("SP", "JS")
    joint = kind in ("JS", "GJS")
    dicts = _witness_list(witness, len(groups), shared)
    if dicts is not None:
        return _witnessed(groups, dicts, K, joint, tol)
    if not brute_force:
        raise ValueError(f"{kind} membership needs a witness dictionary or brute_force=True")
    if kind == "JS":
        return _brute_joint(groups, K, tol)
    return _brute_sparse(groups, K, shared, tol)
