"""Error decomposition, alpha/beta/SNR metrics, PSNR and the fusion bound.

For a denoiser acting as a linear projector ``P`` on ``z = u + e``::

    f(z) - u = (P u - u) + P e

``modeling_error = ||P u - u||^2`` and ``survived_noise = ||P e||^2``.
``alpha`` and ``beta`` normalise them by the clean and noise energies and
``snr_out = 1 / (alpha + beta / snr_in)``.  SNR values are plain ratios;
only :func:`psnr` and :func:`to_db` work in decibels.
"""

import csv
from dataclasses import asdict, dataclass, fields
import io
import math

import numpy as np

__all__ = [
    "CSV_FIELDS",
    "DecomposedError",
    "Report",
    "ImprovementCheck",
    "energy",
    "decompose",
    "alpha_beta",
    "snr_out",
    "to_db",
    "psnr",
    "make_report",
    "write_reports",
    "improvement_bound",
    "check_improvement_condition",
]


def _flat(arrays):
    if isinstance(arrays, np.ndarray):
        return [arrays]
    return [np.asarray(a, dtype=np.float64) for a in arrays]


def energy(arrays):
    """Sum of squares over an array or a list of arrays."""
    return float(sum(np.sum(a * a) for a in _flat(arrays)))


def _dot(a, b):
    return float(sum(np.sum(x * y) for x, y in zip(_flat(a), _flat(b))))


@dataclass
class DecomposedError:
    """Squared reconstruction error split into its two sources."""

    modeling_error: float
    survived_noise: float
    cross_term: float

    @property
    def total(self):
        """``||P u + P e - u||^2``."""
        return self.modeling_error + self.survived_noise + 2 * self.cross_term


def decompose(record, clean, noise):
    """Replay `record` on the clean signal and on the noise separately.

    Parameters
    ----------
    record : projector record
      Anything with an ``apply(groups)`` method.
    clean, noise : list of ndarray
      Groups ``u_i`` and ``e_i`` with ``u_i + e_i`` the denoised input.

    Returns
    -------
    DecomposedError
      ``cross_term = <P u - u, P e>`` is zero for a single orthogonal
      projector and is reported rather than assumed.
    """
    clean = _flat(clean)
    noise = _flat(noise)
    if [np.shape(u) for u in clean] != [np.shape(e) for e in noise]:
        raise ValueError("clean and noise shapes disagree")
    pu = record.apply(clean)
    pe = record.apply(noise)
    if [np.shape(a) for a in pu] != [np.shape(u) for u in clean]:
        raise ValueError("record does not match the input shapes")
    resid = [a - u for a, u in zip(pu, clean)]
    return DecomposedError(energy(resid), energy(pe), _dot(resid, pe))


def alpha_beta(decomp, clean_energy, noise_energy):
    """Normalised modeling error and survived-noise energy ratio."""
    if not clean_energy > 0:
        raise ValueError("clean energy must be positive")
    if not noise_energy > 0:
        raise ValueError("noise energy must be positive")
    return decomp.modeling_error / clean_energy, decomp.survived_noise / noise_energy


def snr_out(alpha, beta, snr_in):
    """Output SNR ``1 / (alpha + beta / snr_in)``; ``inf`` if both vanish."""
    if not snr_in > 0:
        raise ValueError("snr_in must be positive")
    denom = alpha + beta / snr_in
    return math.inf if denom == 0 else 1.0 / denom


def to_db(ratio):
    return 10.0 * math.log10(ratio) if ratio > 0 else -math.inf


def psnr(reference, estimate, peak=255.0):
    """Peak signal-to-noise ratio in dB; ``inf`` when the images match."""
    reference = np.asarray(reference, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if reference.shape != estimate.shape:
        raise ValueError("image dimensions disagree")
    err = float(np.sum((reference - estimate) ** 2))
    if err == 0:
        return math.inf
    return 10.0 * math.log10(peak ** 2 * reference.size / err)


CSV_FIELDS = ("model", "K", "sigma", "alpha", "beta", "snr_in", "snr_out", "psnr_db")


@dataclass
class Report:
    """One row of metrics for a model at a given ``K`` and noise level."""

    model: str
    K: int
    sigma: float
    alpha: float
    beta: float
    snr_in: float
    snr_out: float
    psnr_db: float

    def row(self):
        return [self.model, self.K, self.sigma] + [
            f"{getattr(self, f.name):.12g}" for f in fields(self)[3:]]


def make_report(model, K, sigma, record, clean, noise, peak=255.0):
    """Decompose `record` and assemble a :class:`Report`.

    ``sigma = 0`` (no noise) gives ``beta = 0`` and ``snr_in = inf``.
    ``psnr_db`` is computed from the actual error ``||P u + P e - u||``
    over all patch entries.
    """
    d = decompose(record, clean, noise)
    ec = energy(clean)
    en = energy(noise)
    alpha = d.modeling_error / ec
    if en > 0:
        beta = d.survived_noise / en
        s_in = ec / en
        s_out = snr_out(alpha, beta, s_in)
    else:
        beta, s_in = 0.0, math.inf
        s_out = math.inf if alpha == 0 else 1.0 / alpha
    size = sum(np.size(u) for u in _flat(clean))
    total = max(d.total, 0.0)
    p = math.inf if total == 0 else 10.0 * math.log10(peak ** 2 * size / total)
    return Report(model, K, sigma, alpha, beta, s_in, s_out, p)


def write_reports(reports, stream=None):
    """Write reports as CSV (with header); returns the text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        w.writerow(r.row())
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def improvement_bound(mu, gamma):
    """Largest ``cos(theta)`` for which fusion beats the better estimate.

    With ``gamma = Delta / Gamma`` the relative gap between the two error
    norms, ``||mu e_A + (1 - mu) e_B|| < ||e_A||`` holds exactly when
    ``cos(theta) < 1 - (2 + (1 - mu) gamma) gamma / (2 mu (1 + gamma))``.
    """
    if not 0 < mu < 1:
        raise ValueError("mu must lie strictly between 0 and 1")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return 1.0 - (2.0 + (1.0 - mu) * gamma) * gamma / (2.0 * mu * (1.0 + gamma))


@dataclass
class ImprovementCheck:
    holds: bool
    bound_holds: bool
    cos_theta: float
    gamma: float
    mu: float
    swapped: bool = False
    degenerate: bool = False

    @property
    def agree(self):
        return self.holds == self.bound_holds

    def as_dict(self):
        return asdict(self)


def check_improvement_condition(e_a, e_b, mu):
    """Evaluate the fusion improvement condition directly and via the bound.

    `e_a` should be the smaller residual.  If it is not, the inputs are
    swapped (with ``mu -> 1 - mu``, leaving the combination unchanged) and
    ``swapped`` is set.  A zero smaller residual is flagged ``degenerate``.
    """
    e_a = np.asarray(e_a, dtype=np.float64).ravel()
    e_b = np.asarray(e_b, dtype=np.float64).ravel()
    if not 0 < mu < 1:
        raise ValueError("mu must lie strictly between 0 and 1")
    swapped = False
    na, nb = np.linalg.norm(e_a), np.linalg.norm(e_b)
    if na > nb:
        e_a, e_b, na, nb, mu, swapped = e_b, e_a, nb, na, 1.0 - mu, True
    combined = mu * e_a + (1 - mu) * e_b
    if na == 0:
        return ImprovementCheck(False, False, math.nan, math.inf, mu, swapped, True)
    holds = bool(combined @ combined < na * na)
    cos = float(e_a @ e_b / (na * nb))
    gamma = float((nb - na) / na)
    return ImprovementCheck(holds, bool(cos < improvement_bound(mu, gamma)), cos, gamma,
                            mu, swapped)
