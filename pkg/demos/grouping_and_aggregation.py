"""
Grouping similar patches and putting them back
==============================================

Nonlocal denoisers work on groups of similar patches.  This script writes
a noisy PGM, block-matches a few reference patches, and checks that
aggregating the untouched groups returns the image exactly.
"""

import tempfile
from pathlib import Path

import numpy as np

from patchmodels import NoiseSpec, add_noise, aggregate, block_match, group, load_pgm, save_pgm
from patchmodels.patching import patch_grid, pixel_multiplicity


"""
A small synthetic scene: a smooth ramp, a bright disc and some stripes.
"""

y, x = np.mgrid[0:64, 0:64]
clean = 40 + 2 * x + 80 * ((x - 40) ** 2 + (y - 24) ** 2 < 120) + 30 * (np.sin(y / 2.0) > 0)
clean = np.clip(clean, 0, 255).astype(np.float64)

noisy = add_noise(clean, NoiseSpec(sigma=20, seed=1))
out = Path(tempfile.mkdtemp())
save_pgm(noisy, out / "noisy.pgm")
noisy = load_pgm(out / "noisy.pgm")   # values are rounded to 0..255 on disk
print("noisy image written to", out / "noisy.pgm")


"""
Reference patches on a grid with stride 4 (at most the patch side, so every
pixel is covered).  Each reference gathers its 16 nearest neighbours inside
a 20x20 window; the reference itself always comes first.
"""

refs = patch_grid(noisy.shape, 8, 4)
plan = block_match(noisy, refs, patch_side=8, window=20, M=16)
groups = group(noisy, plan)
print(f"{len(plan)} groups of shape {groups[0].shape}")
print("first group positions:", plan.groups[0][:4].tolist(), "...")


"""
Aggregation averages the overlapping copies of each pixel, so grouping
followed by aggregation is the identity.
"""

back = aggregate(plan, groups, noisy.shape)
print("max |aggregate(group(x)) - x| =", np.abs(back - noisy).max())
m = pixel_multiplicity(plan, noisy.shape)
print("copies per pixel: min", m.min(), "max", m.max())
