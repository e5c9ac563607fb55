"""Constructive witnesses for the model-set relationships, and a checker.

The inclusions between model sets are certified sample-wise on random set
members.  Strict inclusions and non-inclusions are certified only by
explicit counterexamples whose negative claims go through a complete
decision procedure of :func:`patchmodels.projectors.check_membership`:
a rank test, the commuting-projector test for joint sparsity, or the
line / hyperplane tests for sparsity at ``K = 1`` and ``K = n - 1``.

Summary of what is certified (``N`` groups, level ``K``)::

    N = 1:  JS = GJS = LR = SPLR,   SP = GS,   JS < SP
    N > 1:  JS < SP < GS,   JS < GJS < GS,   GJS = LR,
            SP !<= LR,   LR !<= SP (N > C(n, K)),   JS < SPLR (K >= 2)

At ``K = 1`` a group in SPLR is a set of rank-one groups whose directions
are atoms of one unitary dictionary, which makes it jointly sparse; the
checker reports ``SPLR = JS`` there instead of a strict inclusion.
"""

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
import csv
import io

import numpy as np

from .imageio import rng_from_seed
from .learning import random_orthonormal
from .projectors import ModelSpec, check_membership, svd

__all__ = [
    "Claim",
    "Counterexample",
    "CertificationError",
    "Check",
    "Summary",
    "DEFAULT_SIZES",
    "STATEMENTS",
    "rotation_dictionary",
    "circulant_block",
    "splr_blocks",
    "gen_gs_not_sp",
    "gen_sp_not_lr",
    "gen_lr_not_sp",
    "gen_splr_not_js",
    "random_members",
    "svd_witnesses",
    "verify_theorems",
]

DEFAULT_SIZES = ((2, 1), (3, 1), (3, 2), (4, 1), (4, 2))
MAX_RETRIES = 100

STATEMENTS = {
    "T1.1": "N=1: JS = GJS = LR = SPLR",
    "T1.2": "N=1: SP = GS",
    "T1.3": "N=1: JS strictly inside SP",
    "T2.1": "JS strictly inside SP strictly inside GS",
    "T2.2": "JS strictly inside GJS strictly inside GS",
    "T2.3": "GJS = LR",
    "T2.4": "SP not inside LR",
    "T2.5": "LR not inside SP when N > C(n,K)",
    "T2.6": "JS strictly inside SPLR",
}


class CertificationError(RuntimeError):
    """A certificate failed; carries the failing check."""

    def __init__(self, check):
        super().__init__(f"{check.statement} failed: {check.name} (n={check.n}, K={check.K})"
                         f"\n{check.instance}")
        self.check = check


@dataclass
class Claim:
    """Expected verdict of one membership question on a counterexample."""

    spec: ModelSpec
    expected: bool
    witness: object = None
    brute_force: bool = False


@dataclass
class Counterexample:
    """Patch groups with witnesses and membership claims about them."""

    name: str
    groups: list
    claims: list = field(default_factory=list)
    witnesses: dict = field(default_factory=dict)

    def evaluate(self):
        """``[(claim, Membership, ok)]`` for every claim."""
        out = []
        for c in self.claims:
            m = check_membership(self.groups, c.spec, c.witness, brute_force=c.brute_force)
            out.append((c, m, m.member == c.expected))
        return out

    def serialize(self):
        parts = [f"# {self.name}"]
        for i, Y in enumerate(self.groups):
            parts.append(f"group {i}:\n" + np.array2string(np.asarray(Y), precision=17,
                                                           max_line_width=200))
        return "\n".join(parts)


# -- constructions --------------------------------------------------------------


def rotation_dictionary(n, theta):
    """Identity with a planar rotation by `theta` in the first two axes."""
    D = np.eye(n)
    c, s = np.cos(theta), np.sin(theta)
    D[:2, :2] = [[c, -s], [s, c]]
    return D


def _scales(rng, size):
    return rng.uniform(0.5, 2.0, size) * rng.choice([-1.0, 1.0], size)


def gen_gs_not_sp(n=2, K=1, theta=np.pi / 4, M=4, seed=0):
    """Two groups sparse under ``I`` and a rotated ``I`` respectively.

    Group codes are 1-sparse and use both of the first two atoms, so the
    group patch directions are the two axes and the two rotated axes.
    These four lines are pairwise orthogonal only when `theta` is a
    multiple of ``pi/2``; such angles are rejected.
    """
    if K != 1:
        raise ValueError("this construction is for K = 1")
    if n < 2 or M < 2:
        raise ValueError("need n >= 2 and M >= 2")
    if np.isclose(np.cos(theta) * np.sin(theta), 0.0, atol=1e-12):
        raise ValueError("theta is a multiple of pi/2; the rotated atoms coincide "
                         "with the axes and the groups are SP")
    rng = rng_from_seed(seed)
    dicts = [np.eye(n), rotation_dictionary(n, theta)]
    groups = []
    for D in dicts:
        X = np.zeros((n, M))
        X[np.arange(M) % 2, np.arange(M)] = _scales(rng, M)
        groups.append(D @ X)
    claims = [Claim(ModelSpec("GS", 1), True, witness=dicts),
              Claim(ModelSpec("SP", 1), False, brute_force=True)]
    return Counterexample(f"gs_not_sp(n={n}, theta={theta:.6g})", groups, claims,
                          {"GS": dicts})


def circulant_block(K):
    """``(K+1) x (K+1)`` matrix of ones with a zero diagonal (full rank)."""
    return np.ones((K + 1, K + 1)) - np.eye(K + 1)


def gen_sp_not_lr(n, M, K, N=2, seed=0):
    """Groups that are ``K``-sparse under ``I`` yet have rank ``K + 1``.

    Each code matrix has the circulant block in its top-left corner,
    zero rows below it and random ``K``-sparse extra columns.
    """
    if not (n >= K + 1 and M >= K + 1 and K >= 1):
        raise ValueError("need n >= K+1, M >= K+1 and K >= 1")
    rng = rng_from_seed(seed)
    groups = []
    for _ in range(N):
        X = np.zeros((n, M))
        X[:K + 1, :K + 1] = circulant_block(K)
        for j in range(K + 1, M):
            support = rng.choice(n, K, replace=False)
            X[support, j] = _scales(rng, K)
        groups.append(X)
    eye = np.eye(n)
    claims = [Claim(ModelSpec("SP", K), True, witness=eye),
              Claim(ModelSpec("LR", K), False)]
    return Counterexample(f"sp_not_lr(n={n}, M={M}, K={K}, N={N})", groups, claims,
                          {"SP": eye})


def _generic_directions(n, N, rng):
    for _ in range(MAX_RETRIES):
        V = rng.standard_normal((n, N))
        V /= np.linalg.norm(V, axis=0)
        cos = np.abs(V.T @ V)[np.triu_indices(N, 1)]
        if np.all(cos < 1 - 1e-6) and np.all(cos > 1e-6):
            return V
    raise RuntimeError("could not draw generic directions")


def gen_lr_not_sp(n=2, K=1, N=3, M=None, seed=0, directions=None):
    """Rank-``K`` groups that no single unitary dictionary sparsifies.

    ``K = 1``: group ``i`` repeats one direction ``d_i``; ``N > n`` lines
    cannot all be atoms of one orthonormal basis.  ``K = n - 1``: group
    ``i`` holds generic vectors of a hyperplane with normal ``d_i``; the
    normals are pairwise neither parallel nor orthogonal.  `directions`
    (``n x N``) overrides the seeded draw for ``K = 1``.
    """
    if N <= comb(n, K):
        raise ValueError(f"need N > C(n, K) = {comb(n, K)}")
    if K not in (1, n - 1):
        raise ValueError("constructions exist for K = 1 and K = n - 1")
    rng = rng_from_seed(seed)
    if K == 1:
        M = M or 3
        if directions is None:
            V = _generic_directions(n, N, rng)
        else:
            V = np.asarray(directions, dtype=np.float64)
            V = V / np.linalg.norm(V, axis=0)
        groups = [np.outer(V[:, i], _scales(rng, M)) for i in range(N)]
    else:
        M = M or (K + 1) * (K - 1) + 1
        normals = _generic_directions(n, N, rng)
        groups = []
        for i in range(N):
            basis = svd(np.eye(n) - np.outer(normals[:, i], normals[:, i]))[0][:, :K]
            groups.append(basis @ rng.standard_normal((K, M)))
    claims = [Claim(ModelSpec("LR", K), True),
              Claim(ModelSpec("SP", K), False, brute_force=True)]
    return Counterexample(f"lr_not_sp(n={n}, K={K}, N={N})", groups, claims)


def splr_blocks(K):
    """The two ``(K+1) x (K+1)`` code matrices of the SPLR-not-JS example.

    Every column has at most ``K`` nonzeros, every row is nonzero, and
    the last column of the first block is
    ``sum_{j<K} X[:, j] - (K-1) X[:, K-1]`` so the rank is ``K``.  The
    second block is the first one reversed along both axes.
    """
    if K < 2:
        raise ValueError("the construction needs K >= 2")
    X = np.ones((K + 1, K + 1))
    for i in range(1, K + 1):
        X[i, K - i] = 0.0
    X[:, K] = X[:, :K - 1].sum(axis=1) - (K - 1) * X[:, K - 1]
    return X, X[::-1, ::-1].copy()


def gen_splr_not_js(K, n=None, M=None):
    """Two groups in SP and LR (hence SPLR) that are not jointly sparse.

    Zero rows pad the blocks up to `n`; extra columns repeat the last one.
    Both groups have rank exactly ``K`` and the projectors onto their
    column spaces do not commute, so no shared unitary dictionary reduces
    both codes to ``K`` nonzero rows.
    """
    n = n or K + 1
    M = M or K + 1
    if n < K + 1 or M < K + 1:
        raise ValueError("need n >= K+1 and M >= K+1")
    groups = []
    for B in splr_blocks(K):
        X = np.zeros((n, M))
        X[:K + 1, :K + 1] = B
        X[:K + 1, K + 1:] = B[:, -1:]
        groups.append(X)
    eye = np.eye(n)
    claims = [Claim(ModelSpec("SP", K), True, witness=eye),
              Claim(ModelSpec("LR", K), True),
              Claim(ModelSpec("SPLR", K), True, witness=eye),
              Claim(ModelSpec("JS", K), False, witness=eye),
              Claim(ModelSpec("JS", K), False, brute_force=True)]
    return Counterexample(f"splr_not_js(n={n}, M={M}, K={K})", groups, claims, {"SP": eye})


# -- random members ---------------------------------------------------------------


def random_members(kind, n, K, N, M, rng):
    """Random groups in the model set `kind`, with their witness.

    Returns ``(groups, witness)``; the witness is one dictionary for SP/JS,
    a list for GS/GJS and ``None`` for LR.
    """
    kind = kind.upper()
    seed = lambda: int(rng.integers(2**63))
    if kind in ("SP", "JS"):
        dicts = [random_orthonormal(n, seed())] * N
    elif kind in ("GS", "GJS"):
        dicts = [random_orthonormal(n, seed()) for _ in range(N)]
    elif kind == "LR":
        return [rng.standard_normal((n, K)) @ rng.standard_normal((K, M))
                for _ in range(N)], None
    else:
        raise ValueError(f"no sampler for {kind}")
    groups = []
    for D in dicts:
        X = np.zeros((n, M))
        if kind in ("JS", "GJS"):
            rows = rng.choice(n, K, replace=False)
            X[rows] = rng.standard_normal((K, M))
        else:
            for j in range(M):
                X[rng.choice(n, K, replace=False), j] = rng.standard_normal(K)
        groups.append(D @ X)
    witness = dicts[0] if kind in ("SP", "JS") else dicts
    return groups, witness


def svd_witnesses(groups):
    """Per-group full left singular bases (the GJS witness of an LR member)."""
    return [svd(Y, full_matrices=True)[0] for Y in groups]


# -- the certificate battery ---------------------------------------------------------


@dataclass
class Check:
    statement: str
    name: str
    n: int
    K: int
    passed: bool
    detail: str = ""
    instance: str = ""


@dataclass
class Summary:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def statements(self):
        """``[(statement, sizes, n_checks, verdict)]`` in statement order."""
        rows = []
        for sid in STATEMENTS:
            mine = [c for c in self.checks if c.statement == sid]
            sizes = sorted({(c.n, c.K) for c in mine})
            verdict = "pass" if mine and all(c.passed for c in mine) else "fail"
            rows.append((sid, ";".join(f"n={n} K={k}" for n, k in sizes), len(mine), verdict))
        return rows

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["statement", "description", "sizes", "checks", "verdict"])
        for sid, sizes, count, verdict in self.statements():
            w.writerow([sid, STATEMENTS[sid], sizes, count, verdict])
        return buf.getvalue()

    def to_table(self):
        rows = self.statements()
        lines = [f"{'statement':<10} {'verdict':<8} {'checks':>6}  sizes"]
        for sid, sizes, count, verdict in rows:
            lines.append(f"{sid:<10} {verdict:<8} {count:>6}  {sizes}")
        return "\n".join(lines)


class _Battery:
    def __init__(self, abort, inject):
        self.checks = []
        self.abort = abort
        self.inject = inject

    def record(self, statement, name, n, K, ok, detail="", instance=""):
        if self.inject == statement and not any(c.statement == statement for c in self.checks):
            ok = not ok
            detail = "injected failure; " + detail
        check = Check(statement, name, n, K, bool(ok), detail, instance if not ok else "")
        self.checks.append(check)
        if not ok and self.abort:
            raise CertificationError(check)

    def counterexample(self, statement, cx, n, K, only=None):
        for claim, m, ok in cx.evaluate():
            if only is not None and claim.spec.kind not in only:
                continue
            name = f"{cx.name}: {claim.spec.kind}/{claim.spec.K} is " \
                   f"{'member' if claim.expected else 'non-member'}"
            self.record(statement, name, n, K, ok, str(m.certificate),
                        cx.serialize())

    def member(self, statement, name, groups, spec, n, K, witness=None, expected=True,
               brute_force=False):
        m = check_membership(groups, spec, witness, brute_force=brute_force)
        cx = Counterexample(name, groups)
        self.record(statement, name, n, K, m.member == expected, str(m.certificate),
                    cx.serialize())


def verify_theorems(sizes=DEFAULT_SIZES, samples=20, seed=0, abort=False,
                    inject_failure=None, sink=None):
    """Certify every statement of both theorems at small sizes.

    Parameters
    ----------
    sizes : sequence of (n, K)
      Patch dimensions and levels to certify at (``K < n``).
    samples : int
      Random members per inclusion check.
    abort : bool
      Raise :class:`CertificationError` at the first failure.
    inject_failure : str, optional
      Statement id whose first check is forced to fail (exercises the
      failure path).
    sink : callable, optional
      Called with every :class:`Check` as it is produced.

    Returns
    -------
    Summary
    """
    rng = rng_from_seed(seed)
    bat = _Battery(abort, inject_failure)
    for n, K in sizes:
        if not 1 <= K < n:
            raise ValueError(f"invalid size n={n}, K={K}")
        M = n + 2
        _theorem_one(bat, rng, n, K, M, samples)
        _theorem_two(bat, rng, n, K, M, samples)
    if sink is not None:
        for c in bat.checks:
            sink(c)
    return Summary(bat.checks)


def _theorem_one(bat, rng, n, K, M, samples):
    for _ in range(samples):
        # LR member: the SVD basis witnesses JS, GJS and SP at once.
        groups, _ = random_members("LR", n, K, 1, M, rng)
        W = svd_witnesses(groups)
        for kind, wit in (("LR", None), ("GJS", W), ("JS", W[0]), ("SPLR", W[0])):
            bat.member("T1.1", f"rank-{K} group in {kind}", groups, ModelSpec(kind, K),
                       n, K, wit)
        # A rank K+1 group is outside all four.
        groups, _ = random_members("LR", n, K + 1, 1, M, rng) if K + 1 <= n else (None, None)
        if groups is not None:
            for kind in ("LR", "GJS", "SPLR"):
                bat.member("T1.1", f"rank-{K + 1} group not in {kind}", groups,
                           ModelSpec(kind, K), n, K, expected=False)
            bat.member("T1.1", f"rank-{K + 1} group not in JS", groups, ModelSpec("JS", K),
                       n, K, expected=False, brute_force=True)
        groups, D = random_members("SP", n, K, 1, M, rng)
        bat.member("T1.2", "SP member with its dictionary", groups, ModelSpec("SP", K),
                   n, K, D)
        bat.member("T1.2", "same group in GS with the same dictionary", groups,
                   ModelSpec("GS", K), n, K, [D])
        groups, D = random_members("JS", n, K, 1, M, rng)
        bat.member("T1.3", "JS member in SP", groups, ModelSpec("SP", K), n, K, D)
    if K in (1, n - 1):
        # Same verdict for SP and GS on a group outside both (N=1).
        groups = [rng.standard_normal((n, M))]
        sp = check_membership(groups, ModelSpec("SP", K), brute_force=True) if K == 1 else None
        if sp is not None:
            gs = check_membership(groups, ModelSpec("GS", K), brute_force=True)
            bat.record("T1.2", "generic group: SP and GS verdicts agree", n, K,
                       sp.member == gs.member and not sp.member)
    cx = gen_sp_not_lr(n, K + 1, K, N=1, seed=int(rng.integers(2**63)))
    bat.counterexample("T1.3", cx, n, K, only=("SP",))
    bat.member("T1.3", f"{cx.name}: not in JS", cx.groups, ModelSpec("JS", K), n, K,
               expected=False, brute_force=True)


def _theorem_two(bat, rng, n, K, M, samples):
    N = 3
    for _ in range(samples):
        groups, D = random_members("JS", n, K, N, M, rng)
        spec = lambda kind: ModelSpec(kind, K)
        bat.member("T2.1", "JS member in SP", groups, spec("SP"), n, K, D)
        bat.member("T2.1", "JS member in GS", groups, spec("GS"), n, K, [D] * N)
        bat.member("T2.2", "JS member in GJS", groups, spec("GJS"), n, K, [D] * N)
        bat.member("T2.6", "JS member in SPLR", groups, spec("SPLR"), n, K, D)
        groups, D = random_members("SP", n, K, N, M, rng)
        bat.member("T2.1", "SP member in GS", groups, spec("GS"), n, K, [D] * N)
        groups, Ds = random_members("GJS", n, K, N, M, rng)
        bat.member("T2.2", "GJS member in GS", groups, spec("GS"), n, K, Ds)
        bat.member("T2.3", "GJS member in LR", groups, spec("LR"), n, K)
        groups, _ = random_members("LR", n, K, N, M, rng)
        bat.member("T2.3", "LR member in GJS (SVD witnesses)", groups, spec("GJS"), n, K,
                   svd_witnesses(groups))
        # Verdict equality on instances that may or may not be members.
        rank = int(rng.integers(1, min(n, M) + 1))
        groups, _ = random_members("LR", n, rank, N, M, rng)
        lr = check_membership(groups, spec("LR"))
        gjs = check_membership(groups, spec("GJS"), svd_witnesses(groups))
        bat.record("T2.3", f"rank-{rank} groups: GJS and LR verdicts agree", n, K,
                   lr.member == gjs.member and lr.member == (rank <= K))

    seed = lambda: int(rng.integers(2**63))
    sp_lr = gen_sp_not_lr(n, M, K, N=2, seed=seed())
    bat.counterexample("T2.4", sp_lr, n, K)
    # SP but not JS, GS but not GJS: the same rank-(K+1) groups.
    bat.counterexample("T2.1", sp_lr, n, K, only=("SP",))
    bat.member("T2.1", f"{sp_lr.name}: not in JS", sp_lr.groups, ModelSpec("JS", K), n, K,
               expected=False, brute_force=True)
    bat.member("T2.2", f"{sp_lr.name}: in GS", sp_lr.groups, ModelSpec("GS", K), n, K,
               [np.eye(n)] * 2)
    bat.member("T2.2", f"{sp_lr.name}: not in GJS", sp_lr.groups, ModelSpec("GJS", K), n, K,
               expected=False)

    if K == 1:
        gs_sp = gen_gs_not_sp(n, 1, theta=float(rng.uniform(0.1, np.pi / 2 - 0.1)),
                              seed=seed())
        bat.counterexample("T2.1", gs_sp, n, K)
    if K in (1, n - 1):
        lr_sp = gen_lr_not_sp(n, K, comb(n, K) + 1, seed=seed())
        bat.counterexample("T2.5", lr_sp, n, K)
        if K == n - 1 and K > 1:
            # GS but not SP: rank-K groups are GS via their SVD bases.
            bat.member("T2.1", f"{lr_sp.name}: in GS", lr_sp.groups, ModelSpec("GS", K), n,
                       K, svd_witnesses(lr_sp.groups))
            bat.counterexample("T2.1", lr_sp, n, K, only=("SP",))
        if K == 1:
            # GJS but not JS: rank-one groups on non-orthogonal lines.
            bat.member("T2.2", f"{lr_sp.name}: in GJS", lr_sp.groups, ModelSpec("GJS", K),
                       n, K, svd_witnesses(lr_sp.groups))
            bat.member("T2.2", f"{lr_sp.name}: not in JS", lr_sp.groups, ModelSpec("JS", K),
                       n, K, expected=False, brute_force=True)

    if K >= 2:
        cx = gen_splr_not_js(K, n=n, M=M)
        bat.counterexample("T2.6", cx, n, K)
        bat.member("T2.2", f"{cx.name}: in GJS", cx.groups, ModelSpec("GJS", K), n, K,
                   svd_witnesses(cx.groups))
        bat.member("T2.2", f"{cx.name}: not in JS", cx.groups, ModelSpec("JS", K), n, K,
                   expected=False, brute_force=True)
    else:
        # K = 1: every SPLR instance is JS.  Check it on SP-and-LR groups
        # built from orthogonal atoms.
        D = random_orthonormal(n, seed())
        atoms = rng.integers(0, n, size=3)
        groups = [np.outer(D[:, a], rng.standard_normal(M)) for a in atoms]
        splr = check_membership(groups, ModelSpec("SPLR", 1), D)
        js = check_membership(groups, ModelSpec("JS", 1), brute_force=True)
        bat.record("T2.6", "K=1: SPLR member is also JS (no strict gap at K=1)", n, K,
                   splr.member and js.member)
