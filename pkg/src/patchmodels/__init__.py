"""Patch-based image models, their projection denoisers and fusion.

Submodules
----------
imageio
  PGM reading/writing and seeded Gaussian noise.
patching
  Patch extraction, block matching, grouping and exact aggregation.
projectors
  Thresholding operators, low-rank projection and model-set membership.
learning
  Unitary dictionary learning for the SP, GS and JS models.
denoising
  Single-model denoisers, alternating projection, convex and P1 fusion.
metrics
  Modeling error / survived noise decomposition, SNR and PSNR.
settheory
  Constructive counterexamples and a checker for the set relationships.
cli
  The ``patchmodels`` command.
"""

from .imageio import NoiseSpec, add_noise, load_pgm, save_pgm
from .patching import GroupingPlan, aggregate, block_match, extract_patches, group
from .projectors import (ModelSpec, check_membership, hard_threshold, l0_inf_norm,
                         lr_project, rank_leq, row_threshold)
from .learning import LearnConfig, learn_gs, learn_js, learn_sp
from .denoising import (FusionSpec, alternating_projection, convex_combine, denoise_gs,
                        denoise_js, denoise_lr, denoise_sp, denoise_splr, fuse_image_p1)
from .metrics import alpha_beta, decompose, make_report, psnr, snr_out
from .settheory import verify_theorems

__version__ = "0.1.0"
