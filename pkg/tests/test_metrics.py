import io
import math

import numpy as np
import pytest

from patchmodels.denoising import (combine_results, denoise_js, denoise_lr, denoise_sp,
                                   oracle_denoise)
from patchmodels.learning import random_orthonormal
from patchmodels.metrics import (CSV_FIELDS, DecomposedError, alpha_beta,
                                 check_improvement_condition, decompose, energy,
                                 improvement_bound, make_report, psnr, snr_out, to_db,
                                 write_reports)
from patchmodels.projectors import hard_threshold


def _data(seed=0, N=4, n=8, M=10, sigma=0.3):
    rng = np.random.default_rng(seed)
    u = [rng.normal(size=(n, M)) for _ in range(N)]
    e = [sigma * rng.normal(size=(n, M)) for _ in range(N)]
    return u, e


def test_zero_noise_decomposition():
    u, _ = _data()
    rec = denoise_lr(u, 3).record
    d = decompose(rec, u, [np.zeros_like(x) for x in u])
    assert d.survived_noise == 0
    assert np.isclose(d.modeling_error, energy([p - x for p, x in zip(rec.apply(u), u)]))


def test_member_has_no_modeling_error():
    D = random_orthonormal(8, 1)
    rng = np.random.default_rng(2)
    u = [D @ hard_threshold(rng.normal(size=(8, 10)), 2)]
    e = [0.1 * rng.normal(size=(8, 10))]
    rec = oracle_denoise(lambda g: denoise_sp(g, D, 2), u, [a + b for a, b in zip(u, e)]).record
    assert decompose(rec, u, e).modeling_error <= 1e-10


@pytest.mark.parametrize("make", [lambda z: denoise_sp(z, random_orthonormal(8, 3), 2),
                                  lambda z: denoise_js(z, random_orthonormal(8, 3), 2),
                                  lambda z: denoise_lr(z, 2)])
def test_orthogonal_cross_term(make):
    u, e = _data(4)
    z = [a + b for a, b in zip(u, e)]
    rec = make(z).record
    d = decompose(rec, u, e)
    assert abs(d.cross_term) <= 1e-6 * math.sqrt(energy(u) * energy(e))
    total = energy([f - a for f, a in zip(rec.apply(z), u)])
    assert abs(total - d.total) <= 1e-9 * total
    assert abs(total - (d.modeling_error + d.survived_noise)) <= 1e-6 * total


def test_mixture_cross_term_is_reported():
    u, e = _data(5)
    z = [a + b for a, b in zip(u, e)]
    mix = combine_results([denoise_sp(z, random_orthonormal(8, 3), 2), denoise_lr(z, 2)],
                          [0.5, 0.5])
    d = decompose(mix.record, u, e)
    total = energy([f - a for f, a in zip(mix.estimate, u)])
    assert abs(total - d.total) <= 1e-9 * total


def test_decompose_shape_mismatch():
    u, e = _data()
    with pytest.raises(ValueError):
        decompose(denoise_lr(u, 2).record, u, e[:-1] + [np.zeros((8, 3))])


def test_alpha_beta():
    assert alpha_beta(DecomposedError(0, 0, 0), 1.0, 1.0) == (0, 0)
    assert alpha_beta(DecomposedError(2.0, 3.0, 0), 4.0, 6.0) == (0.5, 0.5)
    with pytest.raises(ValueError):
        alpha_beta(DecomposedError(0, 0, 0), 0.0, 1.0)
    with pytest.raises(ValueError):
        alpha_beta(DecomposedError(0, 0, 0), 1.0, 0.0)


def test_snr_out():
    assert snr_out(0, 1, 7.0) == 7.0
    assert np.isclose(snr_out(0.01, 0.25, 4), 1 / 0.0725)
    assert np.isclose(snr_out(0.01, 0.25, 1e15), 100.0)
    assert snr_out(0, 0, 3.0) == math.inf
    with pytest.raises(ValueError):
        snr_out(0.1, 0.1, 0.0)
    assert np.isclose(to_db(100.0), 20.0)


def test_psnr():
    x = np.zeros((4, 4))
    assert psnr(x, x) == math.inf
    assert np.isclose(psnr(x, x + 1), 10 * np.log10(65025))
    assert np.isclose(psnr(x, x + 1) - psnr(x, x + 2), 20 * np.log10(2))
    with pytest.raises(ValueError):
        psnr(x, x[:2])


def test_report_identity_and_csv():
    u, e = _data(6)
    z = [a + b for a, b in zip(u, e)]
    rec = denoise_lr(z, 3).record
    r = make_report("lr", 3, 0.3, rec, u, e)
    assert r.alpha >= 0 and r.beta >= 0
    assert abs(r.snr_out - 1 / (r.alpha + r.beta / r.snr_in)) <= 1e-9 * r.snr_out
    text = write_reports([r], io.StringIO())
    header, row = text.splitlines()
    assert header == ",".join(CSV_FIELDS)
    assert row.startswith("lr,3,0.3,")


def test_report_zero_sigma():
    u, _ = _data(7)
    r = make_report("lr", 2, 0.0, denoise_lr(u, 2).record, u, [np.zeros_like(x) for x in u])
    assert r.beta == 0 and r.snr_in == math.inf


def test_improvement_bound_examples():
    assert improvement_bound(0.3, 0.0) == 1.0
    assert np.isclose(improvement_bound(0.5, 1.0), -0.25)
    g = np.linspace(0, 5, 200)
    for mu in (0.1, 0.5, 0.9):
        b = [improvement_bound(mu, x) for x in g]
        assert np.all(np.diff(b) <= 1e-15)
    with pytest.raises(ValueError):
        improvement_bound(1.0, 0.5)
    with pytest.raises(ValueError):
        improvement_bound(0.5, -0.1)


def test_improvement_condition_cases():
    a = np.array([1.0, 0.0, 0.0])
    b = np.array([0.0, 1.0, 0.0])
    c = check_improvement_condition(a, b, 0.5)
    assert c.holds and c.agree and c.gamma == 0
    c = check_improvement_condition(a, a, 0.5)
    assert not c.holds and c.agree
    c = check_improvement_condition(3 * a, b, 0.2)
    assert c.swapped and np.isclose(c.mu, 0.8) and c.agree
    c = check_improvement_condition(np.zeros(3), b, 0.5)
    assert c.degenerate


def test_improvement_equivalence_sample():
    rng = np.random.default_rng(8)
    for _ in range(2000):
        c = check_improvement_condition(rng.normal(size=3), rng.normal(size=3),
                                        rng.uniform(0.01, 0.99))
        assert c.agree
