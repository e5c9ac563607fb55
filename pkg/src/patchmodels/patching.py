"""Patch extraction, block matching and the grouping operators.

A *grouping plan* lists, for every group, the top-left ``(row, col)``
positions of its member patches.  :func:`group` gathers those patches
into ``n x M_i`` matrices (column ``j`` is patch ``j`` scanned row-major),
and :func:`aggregate` is the matching adjoint-and-normalise step: every
pixel becomes the average of all patch copies that contain it.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "GroupingPlan",
    "patch_grid",
    "extract_patches",
    "block_match",
    "sample_references",
    "group",
    "aggregate",
    "pixel_multiplicity",
]


@dataclass
class GroupingPlan:
    """Member patch positions of every group.

    Attributes
    ----------
    patch_side : int
      Side length of the square patches (``n = patch_side**2``).
    groups : list of ndarray
      One ``(M_i, 2)`` integer array of top-left positions per group.
    """

    patch_side: int
    groups: list = field(default_factory=list)

    def __post_init__(self):
        self.groups = [np.asarray(g, dtype=np.intp).reshape(-1, 2) for g in self.groups]

    @property
    def n(self):
        return self.patch_side ** 2

    def __len__(self):
        return len(self.groups)

    def validate(self, shape):
        """Raise ``ValueError`` if any member patch leaves an image of `shape`."""
        h, w = shape
        p = self.patch_side
        for i, g in enumerate(self.groups):
            if g.size == 0:
                raise ValueError(f"group {i} is empty")
            bad = (g[:, 0] < 0) | (g[:, 1] < 0) | (g[:, 0] > h - p) | (g[:, 1] > w - p)
            if bad.any():
                r, c = g[np.argmax(bad)]
                raise ValueError(
                    f"group {i}: patch at ({r}, {c}) is out of bounds for image {h}x{w}")

    def to_text(self):
        lines = [f"PLAN n={self.patch_side}"]
        for g in self.groups:
            lines.append(" ".join(f"{r},{c}" for r, c in g))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = text.splitlines()
        if not lines or not lines[0].startswith("PLAN n="):
            raise ValueError("missing 'PLAN n=<patch_side>' header")
        patch_side = int(lines[0][len("PLAN n="):])
        groups = []
        for line in lines[1:]:
            if not line.strip():
                continue
            groups.append([tuple(int(v) for v in tok.split(",")) for tok in line.split()])
        return cls(patch_side, groups)

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_text())

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_text(f.read())


def _check_patch(shape, patch_side):
    h, w = shape
    if patch_side < 1:
        raise ValueError("patch_side must be positive")
    if patch_side > min(h, w):
        raise ValueError(f"patch side {patch_side} larger than image {h}x{w}")


def _axis_positions(length, patch_side, stride):
    pos = list(range(0, length - patch_side + 1, stride))
    if pos[-1] != length - patch_side:
        pos.append(length - patch_side)
    return pos


def patch_grid(shape, patch_side, stride):
    """Top-left positions on a `stride` grid, plus the last row/column.

    The returned ``(P, 2)`` array is in row-major order.  With
    ``stride <= patch_side`` the patches at these positions cover every
    pixel.
    """
    _check_patch(shape, patch_side)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    rows = _axis_positions(shape[0], patch_side, stride)
    cols = _axis_positions(shape[1], patch_side, stride)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.stack([rr.ravel(), cc.ravel()], axis=1).astype(np.intp)


def sample_references(shape, patch_side, count, rng):
    """`count` distinct patch positions drawn without replacement.

    Positions are returned in row-major order.  All positions are returned
    when the image holds no more than `count` patches.
    """
    grid = patch_grid(shape, patch_side, 1)
    if count < 1:
        raise ValueError("count must be >= 1")
    if count >= len(grid):
        return grid
    return grid[np.sort(rng.choice(len(grid), count, replace=False))]


def _patch_view(image, patch_side):
    return sliding_window_view(image, (patch_side, patch_side))


def extract_patches(image, patch_side, stride=1):
    """Vectorized patches on the :func:`patch_grid` positions.

    Returns
    -------
    positions : ndarray
      ``(P, 2)`` top-left positions.
    patches : ndarray
      ``(n, P)`` matrix whose columns are the row-major patch vectors.
    """
    image = np.asarray(image, dtype=np.float64)
    positions = patch_grid(image.shape, patch_side, stride)
    view = _patch_view(image, patch_side)
    patches = view[positions[:, 0], positions[:, 1]].reshape(len(positions), -1)
    return positions, patches.T.copy()


def _window_start(center, length, patch_side, window):
    # Window of `window` pixels centred on the patch, shifted to stay inside.
    if window >= length:
        return 0
    start = center - (window - patch_side) // 2
    return int(min(max(start, 0), length - window))


def block_match(image, references, patch_side, window, M):
    """Group each reference patch with its `M - 1` nearest neighbours.

    Candidates are all patch positions (stride 1) lying inside a
    ``window x window`` search region centred on the reference and clipped
    to the image.  Distance is squared Euclidean on raw intensities.  The
    reference is always the first member; the others follow in order of
    increasing distance, ties broken by smaller row-major position.

    Parameters
    ----------
    image : array_like
      2-D image.
    references : array_like
      ``(R, 2)`` top-left positions of the reference patches.
    patch_side, window, M : int
      Patch side, search window side and group size.

    Returns
    -------
    plan : GroupingPlan

    Raises
    ------
    ValueError
      If a search window holds fewer than `M` candidate patches.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape
    _check_patch(image.shape, patch_side)
    if M < 1:
        raise ValueError("M must be >= 1")
    if window < patch_side:
        raise ValueError("window must be at least the patch side")
    references = np.asarray(references, dtype=np.intp).reshape(-1, 2)
    view = _patch_view(image, patch_side)
    n = patch_side ** 2
    groups = []
    for r0, c0 in references:
        if not (0 <= r0 <= h - patch_side and 0 <= c0 <= w - patch_side):
            raise ValueError(f"reference ({r0}, {c0}) is out of bounds")
        top = _window_start(r0, h, patch_side, window)
        left = _window_start(c0, w, patch_side, window)
        nr = min(window, h) - patch_side + 1
        nc = min(window, w) - patch_side + 1
        if nr * nc < M:
            raise ValueError(
                f"search window at ({r0}, {c0}) has {nr * nc} candidates, "
                f"{M - nr * nc} short of M={M}")
        cand = view[top:top + nr, left:left + nc].reshape(-1, n)
        ref = view[r0, c0].reshape(n)
        dist = np.sum((cand - ref) ** 2, axis=1)
        rr, cc = np.divmod(np.arange(nr * nc), nc)
        rr += top
        cc += left
        linear = rr * w + cc
        self_idx = (r0 - top) * nc + (c0 - left)
        dist[self_idx] = -1.0  # forces the reference to the front
        order = np.lexsort((linear, dist))[:M]
        groups.append(np.stack([rr[order], cc[order]], axis=1))
    return GroupingPlan(patch_side, groups)


def group(image, plan):
    """Gather the patches of every group into ``n x M_i`` matrices."""
    image = np.asarray(image, dtype=np.float64)
    plan.validate(image.shape)
    view = _patch_view(image, plan.patch_side)
    return [view[g[:, 0], g[:, 1]].reshape(len(g), -1).T.copy() for g in plan.groups]


def _pixel_indices(plan, width):
    p = plan.patch_side
    offsets = (np.arange(p)[:, None] * width + np.arange(p)[None, :]).ravel()
    # (n, M_i) flat pixel index per group, matching the group() layout.
    return [offsets[:, None] + (g[:, 0] * width + g[:, 1])[None, :] for g in plan.groups]


def pixel_multiplicity(plan, shape):
    """Number of patch copies covering each pixel (diagonal of sum V_i* V_i)."""
    idx = np.concatenate([i.ravel() for i in _pixel_indices(plan, shape[1])])
    return np.bincount(idx, minlength=shape[0] * shape[1]).reshape(shape)


def aggregate(plan, groups, shape):
    """Rebuild an image from (possibly modified) patch groups.

    Each pixel is the multiplicity-weighted average of all patch copies
    containing it.  The average is formed as the first copy plus the mean
    deviation from it, so unmodified groups reproduce the image exactly.

    Raises
    ------
    ValueError
      If some pixel is covered by no patch, or shapes disagree with `plan`.
    """
    h, w = shape
    plan.validate(shape)
    if len(groups) != len(plan.groups):
        raise ValueError(f"plan has {len(plan.groups)} groups, got {len(groups)}")
    idx_list = _pixel_indices(plan, w)
    for i, (idx, g) in enumerate(zip(idx_list, groups)):
        if np.shape(g) != idx.shape:
            raise ValueError(f"group {i} has shape {np.shape(g)}, expected {idx.shape}")
    idx = np.concatenate([i.ravel() for i in idx_list])
    vals = np.concatenate([np.asarray(g, dtype=np.float64).ravel() for g in groups])
    counts = np.bincount(idx, minlength=h * w)
    if not counts.all():
        missing = int(np.flatnonzero(counts == 0)[0])
        raise ValueError(f"pixel {missing} (row {missing // w}, col {missing % w}) "
                         "is not covered by any patch")
    _, first = np.unique(idx, return_index=True)
    anchor = vals[first]
    dev = np.bincount(idx, weights=vals - anchor[idx], minlength=h * w)
    return (anchor + dev / counts).reshape(h, w)
