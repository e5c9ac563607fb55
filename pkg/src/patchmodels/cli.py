"""Command-line front end: ``patchmodels <command> [options]``.

Commands
--------
noise     add seeded Gaussian noise to a PGM image
learn     learn SP / GS / JS dictionaries from an image's patch groups
denoise   noise, match, learn, denoise and aggregate one image
fuse      P1 fusion of two estimates of the same noisy image
sweep     alpha / beta / SNR table over models and sparsity levels
verify    certify the model-set relationships

Exit status is 0 on success, 1 on a usage error, 2 on a data error
(unreadable image, too small for the search window, ...) and 3 when a
certificate fails.  ``PATCHMODELS_THREADS`` caps the BLAS thread pool.
"""

import argparse
from dataclasses import replace
import os
import sys

import numpy as np

from .denoising import (FusionSpec, alternating_projection, combine_results,
                        fuse_image_p1, line_search_mu, make_denoiser, mu_grid,
                        oracle_denoise, p1_line_search, remove_dc)
from .imageio import NoiseSpec, PGMError, add_noise, load_pgm, rng_from_seed, save_pgm
from .learning import INITS, LearnConfig, format_dictionary, learn_gs, learn_js, learn_sp
from .metrics import make_report, psnr, write_reports
from .patching import aggregate, block_match, group, patch_grid, sample_references
from .settheory import DEFAULT_SIZES, STATEMENTS, verify_theorems

__all__ = ["main", "build_parser", "Experiment", "prepare", "run_models"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3
MODELS = ("sp", "gs", "js", "gjs", "lr", "splr")
COMBINES = ("none", "alt", "convex")

REPORT_HELP = """\
CSV columns: model,K,sigma,alpha,beta,snr_in,snr_out,psnr_db
  alpha    modeling error ||Pu - u||^2 / ||u||^2
  beta     survived noise ||Pe||^2 / ||e||^2
  snr_in   ||u||^2 / ||e||^2 (inf when sigma = 0)
  snr_out  1 / (alpha + beta / snr_in)
  psnr_db  PSNR of the actual estimate, peak 255
Combined rows are labelled A+B:alt or A+B:convex@<mu>."""


class UsageError(Exception):
    """Bad flag values or combinations (exit status 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_k(text):
    """``"10"``, ``"2,4,8"`` or an inclusive range ``"1-8"``."""
    values = []
    try:
        for part in text.split(","):
            if "-" in part.strip()[1:]:
                lo, hi = part.split("-")
                values.extend(range(int(lo), int(hi) + 1))
            else:
                values.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid K list {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("K values must be >= 1")
    return sorted(set(values))


def _common(p, models=True):
    p.add_argument("--sigma", type=float, default=20.0, help="noise std (default 20)")
    p.add_argument("--seed", type=int, default=0, help="seed for noise and sampling")
    p.add_argument("--patch", type=int, default=8, help="patch side (default 8)")
    p.add_argument("--window", type=int, default=50, help="search window side (default 50)")
    p.add_argument("--m", type=int, default=64, help="patches per group (default 64)")
    p.add_argument("--iters", type=int, default=20, help="learning iterations (default 20)")
    p.add_argument("--init", choices=INITS, default="identity",
                   help="initial dictionary (default identity)")
    p.add_argument("--remove-dc", action="store_true",
                   help="model mean-free patches (default: raw patches)")
    p.add_argument("--out-dir", default=".", help="output directory (default .)")
    if models:
        p.add_argument("--model", nargs="+", choices=MODELS, default=["sp"],
                       help="model kind(s)")


def build_parser():
    parser = _Parser(prog="patchmodels", description=__doc__.split("\n\n")[0],
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    raw = argparse.RawDescriptionHelpFormatter

    p = sub.add_parser("noise", help="add Gaussian noise to an image", formatter_class=raw,
                       description="Writes <out-dir>/noisy.pgm (values rounded, clipped).")
    p.add_argument("image")
    p.add_argument("--sigma", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("learn", help="learn dictionaries", formatter_class=raw,
                       description="Learns from the image as given (add noise with --sigma).\n"
                       "Writes plan.txt, dict_<model>.txt and trace_<model>.csv "
                       "(columns: iter,objective).  GS writes one DICT block per group.")
    p.add_argument("image")
    _common(p)
    p.set_defaults(sigma=0.0)
    p.add_argument("--k", type=int, required=True, help="sparsity level")
    p.add_argument("--refs", type=int, default=1000, help="reference patches (default 1000)")

    p = sub.add_parser("denoise", help="denoise one image", formatter_class=raw,
                       description="Noise -> match -> learn -> denoise -> aggregate.\n"
                       "References lie on a --stride grid so every pixel is covered.\n"
                       "Writes noisy.pgm, denoised_<label>.pgm and report.csv "
                       "(needs the clean image).\n\n" + REPORT_HELP)
    p.add_argument("image", nargs="?", help="clean image (noise is simulated)")
    p.add_argument("--noisy", help="use this noisy image instead of simulating one")
    _common(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--combine", choices=COMBINES, default="none")
    p.add_argument("--mu", type=float, help="convex weight of the first model "
                   "(default: line search against the clean image)")
    p.add_argument("--t", type=int, default=10, help="alternating rounds (default 10)")
    p.add_argument("--stride", type=int, default=4, help="reference grid stride (default 4)")
    p.add_argument("--oracle", action="store_true", help="train on the clean image")

    p = sub.add_parser("fuse", help="P1 fusion of two estimates", formatter_class=raw,
                       description="Writes fused.pgm and, with --reference, fuse.csv "
                       "(columns: image,mu,lambda_f,psnr_db).")
    p.add_argument("noisy")
    p.add_argument("estimate_a")
    p.add_argument("estimate_b")
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--line-search", action="store_true",
                   help="choose mu on a 0.1 grid against --reference")
    p.add_argument("--grid", type=float, default=0.1)
    p.add_argument("--reference")
    p.add_argument("--lambda-f", type=float, default=1e-2, help="fidelity weight (0.01)")
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("sweep", help="metrics over models and K", formatter_class=raw,
                       description="Samples --refs seeded reference patches per image, "
                       "block-matches, trains\n(on clean data with --oracle), denoises and "
                       "writes one row per (model, K)\nto sweep.csv, pooling all images.\n\n"
                       + REPORT_HELP)
    p.add_argument("images", nargs="+")
    _common(p)
    p.add_argument("--k", type=parse_k, default=[10], help="K list, e.g. 10 or 2,4,8 or 1-16")
    p.add_argument("--combine", choices=COMBINES, default="none")
    p.add_argument("--mu", type=float)
    p.add_argument("--t", type=int, default=10)
    p.add_argument("--refs", type=int, default=1000)
    p.add_argument("--oracle", action="store_true")

    p = sub.add_parser("verify", help="certify the set relationships", formatter_class=raw,
                       description="Prints a table and writes verify.csv "
                       "(columns: statement,description,sizes,checks,verdict).\n"
                       "Statements: " + ", ".join(STATEMENTS))
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--inject-failure", choices=tuple(STATEMENTS), help=argparse.SUPPRESS)
    return parser


# -- shared pipeline ------------------------------------------------------------


class Experiment:
    """Groups of one image under one grouping plan.

    `noise` is ``noisy - clean`` when the clean image is known, else None.
    """

    def __init__(self, plan, shape, noisy, clean=None):
        self.plan = plan
        self.shape = shape
        self.noisy = group(noisy, plan)
        self.clean = None if clean is None else group(clean, plan)
        self.noise = None if clean is None else group(noisy - clean, plan)


def prepare(noisy, references, args, clean=None, oracle=False):
    """Block-match (on the clean image in oracle mode) and group."""
    source = clean if oracle else noisy
    plan = block_match(source, references, args.patch, args.window, args.m)
    return Experiment(plan, noisy.shape, noisy, clean)


def _denoiser(kind, K, train, args):
    cfg = LearnConfig(K, args.iters, args.init, args.seed)
    if not args.remove_dc:
        return make_denoiser(kind, K, train, cfg, getattr(args, "t", 10))
    train = [Z - Z.mean(axis=0, keepdims=True) for Z in train]
    return remove_dc(make_denoiser(kind, K, train, cfg, getattr(args, "t", 10)))


def run_models(exp, kinds, K, args, oracle=False, combine="none", mu=None):
    """Denoise `exp` with each model (and their combination).

    Returns ``[(label, DenoiseResult)]``.  Convex weights default to a
    line search against the clean groups.
    """
    train = exp.clean if oracle else exp.noisy
    denoisers = {k: _denoiser(k, K, train, args) for k in kinds}

    def run(den):
        return oracle_denoise(den, exp.clean, exp.noisy) if oracle else den(exp.noisy)

    results = [(k, run(denoisers[k])) for k in kinds]
    if combine == "alt":
        procs = [denoisers[k] for k in kinds]
        alt = lambda g: alternating_projection(g, procs, args.t)
        results.append(("+".join(kinds) + ":alt", run(alt)))
    elif combine == "convex":
        a, b = results[0][1], results[1][1]
        if mu is None:
            mu, _ = line_search_mu(a.estimate, b.estimate, exp.clean)
        results.append(("+".join(kinds) + f":convex@{mu:g}",
                         combine_results([a, b], [mu, 1 - mu])))
    return results


class _Pooled:
    """Per-image records applied to the concatenation of their groups."""

    def __init__(self, records, counts):
        self.records = records
        self.counts = counts

    def apply(self, groups):
        out, start = [], 0
        for rec, c in zip(self.records, self.counts):
            out.extend(rec.apply(groups[start:start + c]))
            start += c
        return out


# -- commands -----------------------------------------------------------------------


def _check_sizes(args, K_values, kinds=()):
    n = args.patch * args.patch
    for name in ("patch", "window", "m", "iters"):
        if getattr(args, name) < 1:
            raise UsageError(f"--{name} must be >= 1")
    if args.window < args.patch:
        raise UsageError("--window must be at least --patch")
    if args.m > (args.window - args.patch + 1) ** 2:
        raise UsageError("--m exceeds the number of patches in a search window")
    if args.sigma < 0:
        raise UsageError("--sigma must be nonnegative")
    for K in K_values:
        if not 1 <= K <= n:
            raise UsageError(f"K={K} outside 1..{n}")
        if {"lr", "gjs", "splr"} & set(kinds) and K > min(n, args.m):
            raise UsageError(f"K={K} exceeds min(n, M) for a rank model")


def _check_combine(args):
    if args.combine != "none" and len(args.model) != 2:
        raise UsageError(f"--combine {args.combine} needs exactly two --model values")
    if len(set(args.model)) != len(args.model):
        raise UsageError("--model values must be distinct")
    if args.mu is not None and not 0 <= args.mu <= 1:
        raise UsageError("--mu must lie in [0, 1]")
    if getattr(args, "t", 1) < 1:
        raise UsageError("--t must be >= 1")


def _out(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def cmd_noise(args):
    if args.sigma < 0:
        raise UsageError("--sigma must be nonnegative")
    image = load_pgm(args.image)
    save_pgm(add_noise(image, NoiseSpec(args.sigma, args.seed)), _out(args, "noisy.pgm"))
    return EXIT_OK


def cmd_learn(args):
    _check_sizes(args, [args.k])
    bad = set(args.model) - {"sp", "gs", "js"}
    if bad:
        raise UsageError(f"no dictionary to learn for {', '.join(sorted(bad))}")
    image = add_noise(load_pgm(args.image), NoiseSpec(args.sigma, args.seed))
    refs = sample_references(image.shape, args.patch, args.refs, rng_from_seed(args.seed))
    plan = block_match(image, refs, args.patch, args.window, args.m)
    plan.save(_out(args, "plan.txt"))
    groups = group(image, plan)
    if args.remove_dc:
        groups = [Z - Z.mean(axis=0, keepdims=True) for Z in groups]
    cfg = LearnConfig(args.k, args.iters, args.init, args.seed)
    for kind in args.model:
        if kind == "sp":
            D, trace = learn_sp(np.hstack(groups), cfg)
            text = format_dictionary(D)
        elif kind == "js":
            D, trace = learn_js(groups, cfg)
            text = format_dictionary(D)
        else:
            dicts, traces = learn_gs(groups, cfg)
            text = "".join(format_dictionary(D) for D in dicts)
            trace = np.sum(traces, axis=0)
        with open(_out(args, f"dict_{kind}.txt"), "w") as f:
            f.write(text)
        with open(_out(args, f"trace_{kind}.csv"), "w") as f:
            f.write("iter,objective\n")
            f.writelines(f"{i + 1},{v:.12g}\n" for i, v in enumerate(trace))
    return EXIT_OK


def cmd_denoise(args):
    _check_sizes(args, [args.k], args.model)
    _check_combine(args)
    if args.image is None and args.noisy is None:
        raise UsageError("give a clean image, --noisy, or both")
    if not 1 <= args.stride <= args.patch:
        raise UsageError("--stride must lie in 1..--patch so every pixel is covered")
    clean = None if args.image is None else load_pgm(args.image)
    if clean is None and (args.oracle or (args.combine == "convex" and args.mu is None)):
        raise UsageError("--oracle and line-searched --combine convex need the clean image")
    if args.noisy is not None:
        noisy = load_pgm(args.noisy)
        if clean is not None and clean.shape != noisy.shape:
            raise ValueError(f"image dimensions disagree: {clean.shape} vs {noisy.shape}")
    else:
        noisy = add_noise(clean, NoiseSpec(args.sigma, args.seed))
        save_pgm(noisy, _out(args, "noisy.pgm"))
    refs = patch_grid(noisy.shape, args.patch, args.stride)
    exp = prepare(noisy, refs, args, clean, args.oracle)
    combine = "alt" if args.combine == "alt" else "none"
    results = run_models(exp, args.model, args.k, args, args.oracle, combine)
    images = {label: aggregate(exp.plan, res.estimate, exp.shape) for label, res in results}
    if args.combine == "convex":
        # Aggregation is linear, so mixing images equals mixing groups.
        a, b = (images[k] for k in args.model)
        mu = args.mu
        if mu is None:
            grid = mu_grid(0.1)
            errors = [np.sum((m * a + (1 - m) * b - clean) ** 2) for m in grid]
            mu = float(grid[int(np.argmin(errors))])
        label = "+".join(args.model) + f":convex@{mu:g}"
        res = combine_results([results[0][1], results[1][1]], [mu, 1 - mu])
        results.append((label, res))
        images[label] = mu * a + (1 - mu) * b
    for label, img in images.items():
        save_pgm(img, _out(args, f"denoised_{label.split('@')[0].replace(':', '_')}.pgm"))
    if clean is not None:
        reports = []
        for label, res in results:
            r = make_report(label, args.k, args.sigma, res.record, exp.clean, exp.noise)
            reports.append(replace(r, psnr_db=psnr(clean, images[label])))
        with open(_out(args, "report.csv"), "w") as f:
            write_reports(reports, f)
    return EXIT_OK


def cmd_fuse(args):
    if args.lambda_f < 0:
        raise UsageError("--lambda-f must be nonnegative")
    if not 0 <= args.mu <= 1:
        raise UsageError("--mu must lie in [0, 1]")
    if args.line_search and args.reference is None:
        raise UsageError("--line-search needs --reference")
    if not 0 < args.grid <= 1:
        raise UsageError("--grid must lie in (0, 1]")
    y, xa, xb = (load_pgm(p) for p in (args.noisy, args.estimate_a, args.estimate_b))
    ref = None if args.reference is None else load_pgm(args.reference)
    mode = "line_search" if args.line_search else "fixed_mu"
    spec = FusionSpec(args.mu, args.lambda_f, mode, args.grid)
    if mode == "line_search":
        mu, _ = p1_line_search(y, xa, xb, ref, args.lambda_f, args.grid)
        spec = FusionSpec(mu, args.lambda_f, "fixed_mu")
    fused = fuse_image_p1(y, xa, xb, spec, ref)
    save_pgm(fused, _out(args, "fused.pgm"))
    if ref is not None:
        rows = [("noisy", y), ("estimate_a", xa), ("estimate_b", xb), ("fused", fused)]
        with open(_out(args, "fuse.csv"), "w") as f:
            f.write("image,mu,lambda_f,psnr_db\n")
            for name, img in rows:
                f.write(f"{name},{spec.mu:.12g},{spec.lambda_f:.12g},{psnr(ref, img):.12g}\n")
    return EXIT_OK


def cmd_sweep(args):
    _check_sizes(args, args.k, args.model)
    _check_combine(args)
    if args.refs < 1:
        raise UsageError("--refs must be >= 1")
    seeds = np.random.SeedSequence(args.seed).generate_state(2 * len(args.images), np.uint64)
    exps = []
    for i, path in enumerate(args.images):
        clean = load_pgm(path)
        noisy = add_noise(clean, NoiseSpec(args.sigma, int(seeds[2 * i])))
        refs = sample_references(clean.shape, args.patch, args.refs,
                                 rng_from_seed(int(seeds[2 * i + 1])))
        exps.append(prepare(noisy, refs, args, clean, args.oracle))
    clean = [Z for e in exps for Z in e.clean]
    noise = [Z for e in exps for Z in e.noise]
    counts = [len(e.clean) for e in exps]
    reports = []
    for K in args.k:
        per_image = [run_models(e, args.model, K, args, args.oracle, args.combine, args.mu)
                     for e in exps]
        for j, (label, _) in enumerate(per_image[0]):
            record = _Pooled([runs[j][1].record for runs in per_image], counts)
            if len(exps) > 1 and ":convex@" in label:
                label = label.split("@")[0]
            reports.append(make_report(label, K, args.sigma, record, clean, noise))
    with open(_out(args, "sweep.csv"), "w") as f:
        write_reports(reports, f)
    return EXIT_OK


def cmd_verify(args):
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    summary = verify_theorems(DEFAULT_SIZES, args.samples, args.seed,
                              inject_failure=args.inject_failure)
    print(summary.to_table())
    with open(_out(args, "verify.csv"), "w") as f:
        f.write(summary.to_csv())
    if not summary.passed:
        for c in summary.checks:
            if not c.passed:
                print(f"FAILED {c.statement} (n={c.n}, K={c.K}): {c.name}; {c.detail}",
                      file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {"noise": cmd_noise, "learn": cmd_learn, "denoise": cmd_denoise,
            "fuse": cmd_fuse, "sweep": cmd_sweep, "verify": cmd_verify}


def _threads():
    value = os.environ.get("PATCHMODELS_THREADS")
    if not value:
        return None
    try:
        n = int(value)
    except ValueError:
        n = 0
    if n < 1:
        raise UsageError(f"PATCHMODELS_THREADS must be a positive integer, got {value!r}")
    return n


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        threads = _threads()
        if threads is None:
            return COMMANDS[args.command](args)
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=threads):
            return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"patchmodels: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PGMError, OSError, ValueError) as exc:
        print(f"patchmodels: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
