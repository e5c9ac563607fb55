"""Projection denoisers, multi-model fusion and image-level P1 fusion.

Every single-model denoiser maps patch groups ``Z_i`` to their projection
onto the local subspace selected by the model and returns the projector
as a replayable record, so the estimate can later be split into
``P u + P e`` (see :mod:`patchmodels.metrics`).
"""

from dataclasses import dataclass
from functools import partial

import numpy as np

from .learning import LearnConfig, learn_gs, learn_js, learn_sp
from .projectors import (ChainRecord, MixtureRecord, ModelSpec, RowRecord,
                         SparseRecord, SubspaceRecord, hard_threshold_mask,
                         row_threshold_mask, svd)

__all__ = [
    "DenoiseResult",
    "FusionSpec",
    "denoise_sp",
    "denoise_gs",
    "denoise_js",
    "denoise_lr",
    "denoise_splr",
    "alternating_projection",
    "convex_combine",
    "combine_results",
    "mu_grid",
    "line_search_mu",
    "make_denoiser",
    "oracle_denoise",
    "CenteredRecord",
    "remove_dc",
    "p1_objective",
    "p1_gradient",
    "fuse_image_p1",
    "p1_line_search",
]


@dataclass
class DenoiseResult:
    """Denoised groups, the projector that produced them, and the model."""

    estimate: list
    record: object
    model: object

    def replay(self, groups):
        return self.record.apply(groups)


@dataclass
class FusionSpec:
    """Weights of the P1 fusion problem.

    ``mode='fixed_mu'`` uses `mu`; ``mode='line_search'`` scans
    :func:`mu_grid` ``(grid)`` against a reference image.
    """

    mu: float = 0.5
    lambda_f: float = 1e-2
    mode: str = "fixed_mu"
    grid: float = 0.1

    def __post_init__(self):
        if not 0 <= self.mu <= 1:
            raise ValueError("mu must lie in [0, 1]")
        if self.lambda_f < 0:
            raise ValueError("lambda_f must be nonnegative")
        if self.mode not in ("fixed_mu", "line_search"):
            raise ValueError(f"unknown fusion mode {self.mode!r}")


def _groups(groups):
    return [np.asarray(Z, dtype=np.float64) for Z in groups]


def _stack(groups):
    if len({Z.shape for Z in groups}) == 1:
        return np.stack(groups)
    return None


def _sparse(groups, dicts, K, kind):
    groups = _groups(groups)
    Zs = _stack(groups)
    if Zs is not None:
        Ds = np.asarray(dicts)
        C = np.swapaxes(Ds, -1, -2) @ Zs
        mask = hard_threshold_mask(C, K)
        est = list(Ds @ np.where(mask, C, 0.0))
        masks = list(mask)
    else:
        est, masks = [], []
        for D, Z in zip(dicts, groups):
            C = D.T @ Z
            m = hard_threshold_mask(C, K)
            masks.append(m)
            est.append(D @ np.where(m, C, 0.0))
    record = SparseRecord(kind, [np.asarray(D) for D in dicts], masks)
    return DenoiseResult(est, record, ModelSpec(kind, K))


def denoise_sp(groups, D, K):
    """Project every patch onto its best ``K`` atoms of the shared `D`."""
    groups = list(groups)
    D = np.asarray(D, dtype=np.float64)
    return _sparse(groups, [D] * len(groups), K, "SP")


def denoise_gs(groups, dicts, K):
    """Like :func:`denoise_sp` with dictionary ``dicts[i]`` for group ``i``."""
    groups = list(groups)
    dicts = [np.asarray(D, dtype=np.float64) for D in dicts]
    if len(dicts) != len(groups):
        raise ValueError(f"got {len(dicts)} dictionaries for {len(groups)} groups")
    return _sparse(groups, dicts, K, "GS")


def denoise_js(groups, D, K):
    """Project each group onto its ``K`` strongest shared atoms of `D`."""
    groups = _groups(groups)
    D = np.asarray(D, dtype=np.float64)
    Zs = _stack(groups)
    if Zs is not None:
        C = D.T @ Zs
        rows = row_threshold_mask(C, K)
        est = list(D @ np.where(rows[..., None], C, 0.0))
        rows = list(rows)
    else:
        est, rows = [], []
        for Z in groups:
            C = D.T @ Z
            r = row_threshold_mask(C, K)
            rows.append(r)
            est.append(D @ np.where(r[:, None], C, 0.0))
    return DenoiseResult(est, RowRecord("JS", D, rows), ModelSpec("JS", K))


def denoise_lr(groups, K):
    """Best rank-``K`` approximation of every group (truncated SVD)."""
    groups = _groups(groups)
    for i, Z in enumerate(groups):
        if K > min(Z.shape):
            raise ValueError(f"group {i}: K={K} exceeds min(n, M_i)={min(Z.shape)}")
    Zs = _stack(groups)
    if Zs is not None:
        bases = list(svd(Zs)[0][..., :K])
    else:
        bases = [svd(Z)[0][:, :K] for Z in groups]
    est = [U @ (U.T @ Z) for U, Z in zip(bases, groups)]
    return DenoiseResult(est, SubspaceRecord(bases), ModelSpec("LR", K))


def alternating_projection(groups, projectors, t):
    """Apply the `projectors` cyclically for `t` full rounds.

    ``f_t = P_last ... P_first f_{t-1}`` with ``f_0 = z``.  Each projector
    is a callable mapping groups to a :class:`DenoiseResult`; the returned
    record chains every individual projection in order.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    current = _groups(groups)
    chain = []
    model = None
    for _ in range(t):
        for proj in projectors:
            res = proj(current)
            chain.append(res.record)
            current = res.estimate
            model = res.model
    return DenoiseResult(current, ChainRecord(chain), model)


def _check_weights(weights):
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    if abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
    return weights


def convex_combine(estimates, weights):
    """Pointwise weighted sum of equally shaped estimates.

    Each estimate is an array or a list of group arrays.
    """
    weights = _check_weights(weights)
    if len(estimates) != len(weights):
        raise ValueError("one weight per estimate is required")
    first = estimates[0]
    if isinstance(first, np.ndarray):
        shapes = {np.shape(e) for e in estimates}
        if len(shapes) != 1:
            raise ValueError("estimate shapes disagree")
        return sum(w * np.asarray(e, dtype=np.float64) for w, e in zip(weights, estimates))
    out = []
    for parts in zip(*estimates):
        if len({np.shape(p) for p in parts}) != 1:
            raise ValueError("estimate shapes disagree")
        out.append(sum(w * np.asarray(p, dtype=np.float64) for w, p in zip(weights, parts)))
    return out


def combine_results(results, weights):
    """Convex combination of denoiser results, keeping a mixture record."""
    weights = _check_weights(weights)
    est = convex_combine([r.estimate for r in results], weights)
    record = MixtureRecord([r.record for r in results], list(weights))
    return DenoiseResult(est, record, tuple(r.model for r in results))


def mu_grid(step=0.1):
    """``0, step, ..., 1`` with both endpoints always present."""
    if not 0 < step <= 1:
        raise ValueError("grid step must lie in (0, 1]")
    count = int(round(1.0 / step))
    grid = np.linspace(0.0, 1.0, count + 1) if np.isclose(count * step, 1.0) else \
        np.append(np.arange(0.0, 1.0, step), 1.0)
    return grid


def _sq_error(est, reference):
    if isinstance(est, np.ndarray):
        return float(np.sum((est - reference) ** 2))
    return float(sum(np.sum((e - r) ** 2) for e, r in zip(est, reference)))


def line_search_mu(est_a, est_b, reference, step=0.1):
    """Best ``mu`` on :func:`mu_grid` for ``mu*A + (1-mu)*B`` vs `reference`.

    Returns
    -------
    mu : float
      Grid weight with the smallest squared error (first one on ties).
    errors : ndarray
      Squared error for every grid point.
    """
    grid = mu_grid(step)
    errors = np.array([_sq_error(convex_combine([est_a, est_b], [m, 1 - m]), reference)
                       for m in grid])
    return float(grid[int(np.argmin(errors))]), errors


def denoise_splr(groups, D, K, t=10):
    """Approximate projection onto SP-and-LR by alternating SP then LR."""
    return alternating_projection(
        groups, [partial(denoise_sp, D=D, K=K), partial(denoise_lr, K=K)], t)


def make_denoiser(kind, K, train_groups, cfg=None, t=10):
    """Train a model on `train_groups` and return its denoiser.

    The returned callable maps groups (indexed like `train_groups` for
    GS) to a :class:`DenoiseResult`.  GJS projection coincides with LR
    and needs no training.  SPLR alternates SP and LR `t` times.
    """
    kind = kind.upper()
    cfg = cfg or LearnConfig(K)
    train_groups = _groups(train_groups)
    if kind in ("LR", "GJS"):
        return partial(denoise_lr, K=K)
    if kind == "SP":
        D, _ = learn_sp(np.hstack(train_groups), cfg)
        return partial(denoise_sp, D=D, K=K)
    if kind == "SPLR":
        D, _ = learn_sp(np.hstack(train_groups), cfg)
        return partial(denoise_splr, D=D, K=K, t=t)
    if kind == "GS":
        dicts, _ = learn_gs(train_groups, cfg)
        return partial(denoise_gs, dicts=dicts, K=K)
    if kind == "JS":
        D, _ = learn_js(train_groups, cfg)
        return partial(denoise_js, D=D, K=K)
    raise ValueError(f"unknown model kind {kind!r}")


def oracle_denoise(denoiser, clean_groups, noisy_groups):
    """Fix the projector on clean data, then apply it to the noisy data."""
    res = denoiser(clean_groups)
    return DenoiseResult(res.record.apply(noisy_groups), res.record, res.model)


@dataclass
class CenteredRecord:
    """``x -> P(x - mean) + mean`` with patch means taken per column."""

    inner: object

    @property
    def kind(self):
        return self.inner.kind

    def apply(self, groups):
        groups = _groups(groups)
        means = [Z.mean(axis=0, keepdims=True) for Z in groups]
        out = self.inner.apply([Z - m for Z, m in zip(groups, means)])
        return [x + m for x, m in zip(out, means)]


def remove_dc(denoiser):
    """Wrap `denoiser` so it models mean-free patches.

    The patch means bypass the model and are added back unchanged; the
    composite map stays linear, so its record still decomposes.
    """
    def run(groups):
        groups = _groups(groups)
        means = [Z.mean(axis=0, keepdims=True) for Z in groups]
        res = denoiser([Z - m for Z, m in zip(groups, means)])
        est = [x + m for x, m in zip(res.estimate, means)]
        return DenoiseResult(est, CenteredRecord(res.record), res.model)
    return run


# -- image-level fusion (P1) ---------------------------------------------------


def _same_shape(*images):
    images = [np.asarray(x, dtype=np.float64) for x in images]
    if len({x.shape for x in images}) != 1:
        raise ValueError("image dimensions disagree: "
                         + ", ".join(str(x.shape) for x in images))
    return images


def p1_objective(x, y, x_a, x_b, mu, lambda_f):
    """``lambda_f ||x-y||^2 + mu ||x-x_a||^2 + (1-mu) ||x-x_b||^2``."""
    return float(lambda_f * np.sum((x - y) ** 2) + mu * np.sum((x - x_a) ** 2)
                 + (1 - mu) * np.sum((x - x_b) ** 2))


def p1_gradient(x, y, x_a, x_b, mu, lambda_f):
    return 2 * (lambda_f * (x - y) + mu * (x - x_a) + (1 - mu) * (x - x_b))


def fuse_image_p1(y, x_a, x_b, spec, reference=None):
    """Closed-form minimiser of the P1 fusion objective.

    ``x = (lambda_f y + mu x_a + (1 - mu) x_b) / (1 + lambda_f)``.
    In ``line_search`` mode `mu` is chosen on the grid by squared error
    against `reference`, which is then required.
    """
    y, x_a, x_b = _same_shape(y, x_a, x_b)
    mu = spec.mu
    if spec.mode == "line_search":
        if reference is None:
            raise ValueError("line search needs a reference image")
        mu, _ = p1_line_search(y, x_a, x_b, reference, spec.lambda_f, spec.grid)
    return (spec.lambda_f * y + mu * x_a + (1 - mu) * x_b) / (1 + spec.lambda_f)


def p1_line_search(y, x_a, x_b, reference, lambda_f, step=0.1):
    """Grid weight minimising the fused image's error against `reference`."""
    y, x_a, x_b, reference = _same_shape(y, x_a, x_b, reference)
    grid = mu_grid(step)
    errors = []
    for m in grid:
        x = fuse_image_p1(y, x_a, x_b, FusionSpec(float(m), lambda_f))
        errors.append(np.sum((x - reference) ** 2))
    errors = np.asarray(errors)
    return float(grid[int(np.argmin(errors))]), errors
