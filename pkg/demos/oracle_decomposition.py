"""
Modeling error versus survived noise
====================================

A projection denoiser splits its error into P u - u (how badly the model
fits the clean image) and P e (noise that gets through).  In the oracle
setting the projector is fixed on clean data, so both terms can be read off
exactly.  Survived noise grows linearly with K, roughly K/n.
"""

import numpy as np

from patchmodels import NoiseSpec, add_noise, block_match, group, make_report
from patchmodels.denoising import make_denoiser, oracle_denoise
from patchmodels.learning import LearnConfig
from patchmodels.patching import sample_references

try:
    from skimage import data
    clean = data.camera()[128:320, 128:320].astype(np.float64)
except ImportError:
    y, x = np.mgrid[0:192, 0:192]
    clean = 128 + 60 * np.sin(x / 7.0) * np.cos(y / 11.0)

noisy = add_noise(clean, NoiseSpec(20, seed=0))
refs = sample_references(clean.shape, 8, 300, np.random.default_rng(1))
plan = block_match(clean, refs, 8, 30, 32)   # oracle: matched on the clean image
u = group(clean, plan)
e = [z - c for z, c in zip(group(noisy, plan), u)]
z = [a + b for a, b in zip(u, e)]


"""
Sweep K for the sparse, group-sparse, jointly sparse and low-rank models.
"""

print(f"{'model':>5} {'K':>3} {'alpha':>8} {'beta':>7} {'K/n':>6} {'SNR_out dB':>10}")
for K in (4, 8, 16):
    for kind in ("sp", "gs", "js", "lr"):
        den = make_denoiser(kind, K, u, LearnConfig(K, 10))
        res = oracle_denoise(den, u, z)
        r = make_report(kind, K, 20, res.record, u, e)
        print(f"{kind:>5} {K:>3} {r.alpha:8.4f} {r.beta:7.4f} {K / 64:6.4f} "
              f"{10 * np.log10(r.snr_out):10.2f}")
