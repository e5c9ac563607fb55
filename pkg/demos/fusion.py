"""
Combining two models
====================

Two ways to use a sparse and a low-rank model together.  Alternating the
projections pushes the estimate toward the intersection of the model sets,
which raises the modeling error.  Averaging the two estimates instead helps
whenever their errors point in different enough directions.
"""

import numpy as np

from patchmodels import FusionSpec, NoiseSpec, add_noise, block_match, fuse_image_p1, group, psnr
from patchmodels.denoising import (alternating_projection, combine_results, line_search_mu,
                                   make_denoiser)
from patchmodels.metrics import check_improvement_condition, decompose, energy
from patchmodels.patching import aggregate, patch_grid

y, x = np.mgrid[0:96, 0:96]
clean = 128 + 50 * np.sin(x / 6.0) + 40 * ((x // 16 + y // 16) % 2)
noisy = add_noise(clean, NoiseSpec(20, seed=3))
plan = block_match(noisy, patch_grid(noisy.shape, 8, 4), 8, 24, 32)
z, u = group(noisy, plan), group(clean, plan)
e = [a - b for a, b in zip(z, u)]

K = 6
sp = make_denoiser("sp", K, z)
lr = make_denoiser("lr", K, z)
a, b = sp(z), lr(z)
alt = alternating_projection(z, [sp, lr], t=10)


"""
Modeling error (alpha) of each estimate.
"""

for name, res in (("sp", a), ("lr", b), ("alt", alt)):
    d = decompose(res.record, u, e)
    print(f"{name:>4}: alpha {d.modeling_error / energy(u):.4f}  "
          f"beta {d.survived_noise / energy(e):.4f}")


"""
Convex combination with the weight chosen on a grid against the clean
groups.  Aggregation is linear, so the mixed image is the mix of images.
"""

mu, _ = line_search_mu(a.estimate, b.estimate, u)
mix = combine_results([a, b], [mu, 1 - mu])
for name, res in (("sp", a), ("lr", b), (f"mix mu={mu:.1f}", mix)):
    print(f"{name:>10}: PSNR {psnr(clean, aggregate(plan, res.estimate, clean.shape)):.2f} dB")


"""
Whether mixing helps is decided by the angle between the two error vectors
and the gap between their sizes.
"""

ea = np.concatenate([(f - c).ravel() for f, c in zip(a.estimate, u)])
eb = np.concatenate([(f - c).ravel() for f, c in zip(b.estimate, u)])
c = check_improvement_condition(ea, eb, mu)
print(f"cos(theta) {c.cos_theta:.3f}, gamma {c.gamma:.3f}, mixing helps: {c.holds}")


"""
P1 fusion adds a pull toward the noisy image.
"""

img_a = aggregate(plan, a.estimate, clean.shape)
img_b = aggregate(plan, b.estimate, clean.shape)
for lam in (0.0, 0.01, 0.1):
    fused = fuse_image_p1(noisy, img_a, img_b, FusionSpec(mu, lam))
    print(f"lambda_f {lam:<5}: PSNR {psnr(clean, fused):.2f} dB")
