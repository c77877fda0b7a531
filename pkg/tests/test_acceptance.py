"""Acceptance gate: one test per primary criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion report.
"""

import json
import time

import numpy as np
import pytest
from scipy import stats as sps

from cvlangevin.cli import main as cli_main, manifest_argv
from cvlangevin.container import load_container, save_container
from cvlangevin.core import MeasurementStack, NoiseParams, RngStream, make_schedule
from cvlangevin.forward import (
    FourierMagnitude,
    Identity,
    Ptychography,
    all_pass_pupil,
    adjoint,
    apply as forward_apply,
    fft2_unitary,
    make_pupil,
)
from cvlangevin.hio import align_ambiguities, correlation, hio_solve
from cvlangevin.likelihood import (
    bessel_ratio,
    complex_score_general,
    complex_score_identity,
    poisson_score,
)
from cvlangevin.metrics import phase_psnr, psnr, ssim
from cvlangevin.noise import poisson_sample, simulate_measurement
from cvlangevin.prior import DiscreteRealPrior
from cvlangevin.sampler import SamplerConfig, ensemble, run_real


def report(name: str, ok: bool, detail: str = ""):
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------- criterion 1


def _poisson_log_density(y, x, sigma0, sigma_t):
    s2 = sigma0**2 - sigma_t**2
    return -0.5 * np.log(2 * np.pi * s2 * x) - (y - x) ** 2 / (2 * s2 * x)


def _rician_log_density(y, o, sigma0, sigma_t):
    from scipy import special

    s2 = sigma0**2 - sigma_t**2
    z = np.abs(o) * np.sqrt(y) / s2
    return -(y + np.abs(o) ** 2) / (2 * s2) + np.log(special.i0e(z)) + z


def test_gradient_density_consistency():
    t0 = time.time()
    rng = np.random.default_rng(100)

    worst_real = 0.0
    for _ in range(100):
        sigma0 = rng.uniform(0.02, 0.3)
        sigma_t = sigma0 * rng.uniform(0.05, 0.95)
        x = rng.uniform(0.05, 1.0)
        y = abs(x + rng.normal(0, sigma0 * np.sqrt(x)))
        got = poisson_score(np.full((1, 1), y), np.full((1, 1), x), sigma0, sigma_t)[0, 0]
        h = 1e-7 * max(x, 0.1)
        fd = (
            _poisson_log_density(y, x + h, sigma0, sigma_t)
            - _poisson_log_density(y, x - h, sigma0, sigma_t)
        ) / (2 * h)
        worst_real = max(worst_real, abs(got - fd) / max(abs(fd), 1e-9))

    worst_cplx = 0.0
    for _ in range(100):
        sigma0 = rng.uniform(0.05, 0.4)
        sigma_t = sigma0 * rng.uniform(0.1, 0.9)
        o = rng.normal(0, 1) + 1j * rng.normal(0, 1)
        y = abs(o) ** 2 * rng.uniform(0.5, 1.5)
        got = complex_score_identity(np.full((1, 1), y), np.full((1, 1), o), sigma0, sigma_t)[
            0, 0
        ]
        h = 1e-6
        d_re = (
            _rician_log_density(y, o + h, sigma0, sigma_t)
            - _rician_log_density(y, o - h, sigma0, sigma_t)
        ) / (2 * h)
        d_im = (
            _rician_log_density(y, o + 1j * h, sigma0, sigma_t)
            - _rician_log_density(y, o - 1j * h, sigma0, sigma_t)
        ) / (2 * h)
        fd = d_re + 1j * d_im
        worst_cplx = max(worst_cplx, abs(2 * got - fd) / max(abs(fd), 1e-9))

    worst_gen = 0.0
    models = [
        FourierMagnitude(pad_factor=2),
        Ptychography(pupils=tuple(make_pupil((6, 6), c, c, 2.0) for c in (0, 2)), rho=0.8),
    ]
    for model in models:
        sigma0, sigma_t = 0.2, 0.1
        o = 0.5 * (rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
        images = tuple(np.abs(u) ** 2 for u in forward_apply(model, o))
        stack = MeasurementStack(images=images, noise=NoiseParams(fwc=25), rho=1.0)
        got = complex_score_general(stack, o, model, sigma0, sigma_t)

        def total(obj):
            return sum(
                _rician_log_density(yim, u, sigma0, sigma_t).sum()
                for yim, u in zip(stack.images, forward_apply(model, obj))
            )

        h = 1e-6
        for iy, ix in [(0, 0), (3, 2), (5, 5)]:
            for direction, part in ((1.0, "real"), (1j, "imag")):
                bump = np.zeros_like(o)
                bump[iy, ix] = direction * h
                fd = (total(o + bump) - total(o - bump)) / (2 * h)
                comp = getattr(got[iy, ix], part)
                worst_gen = max(worst_gen, abs(2 * comp - fd) / max(abs(fd), 1e-9))

    elapsed = time.time() - t0
    report(
        "gradient-density consistency",
        worst_real < 1e-5 and worst_cplx < 1e-4 and worst_gen < 1e-4 and elapsed < 30,
        f"real {worst_real:.2e} (<1e-5), complex {worst_cplx:.2e} (<1e-4), "
        f"general-H {worst_gen:.2e} (<1e-4), {elapsed:.1f}s (<30s)",
    )


# ---------------------------------------------------------------- criterion 2


def test_bessel_ratio_precision_and_range():
    import mpmath as mp

    mp.mp.dps = 40
    z = np.logspace(-6, 8, 200)
    got = bessel_ratio(z)
    worst = 0.0
    for zi, gi in zip(z, got):
        ref = float(mp.besseli(1, mp.mpf(zi)) / mp.besseli(0, mp.mpf(zi)))
        worst = max(worst, abs(gi - ref) / ref)
    no_overflow = all(
        np.isfinite(bessel_ratio(zz)) for zz in (1e3, 1e9, 1e100, 1e300, np.finfo(float).max)
    )
    report(
        "bessel ratio precision",
        worst < 1e-8 and no_overflow,
        f"worst rel err {worst:.2e} (<1e-8), finite at extreme z: {no_overflow}",
    )


# ---------------------------------------------------------------- criterion 3


def test_poisson_generator_moments_and_pmf():
    ok = True
    details = []
    for i, lam in enumerate((0.5, 10.0, 1e4)):
        draws = poisson_sample(np.full((1000, 1000), lam), RngStream(200 + i))
        mean_err = abs(draws.mean() - lam) / lam
        var_err = abs(draws.var() - lam) / lam
        ok &= mean_err < 0.01 and var_err < 0.01
        details.append(f"lam={lam:g}: mean {mean_err:.2%}, var {var_err:.2%}")
    for i, lam in enumerate((0.5, 10.0, 30.0)):
        draws = poisson_sample(np.full((1000, 1000), lam), RngStream(300 + i))
        kmax = int(draws.max())
        emp = np.bincount(draws.astype(int).ravel(), minlength=kmax + 1) / draws.size
        ana = sps.poisson.pmf(np.arange(kmax + 1), lam)
        tv = 0.5 * (np.abs(emp - ana).sum() + (1 - ana.sum()))
        ok &= tv < 0.005
        details.append(f"TV(lam={lam:g}) {tv:.4f}")
    report("poisson generator", ok, "; ".join(details))


# ---------------------------------------------------------------- criterion 4


def test_forward_model_exactness():
    rng = np.random.default_rng(400)
    models = [
        Identity(),
        FourierMagnitude(pad_factor=2),
        Ptychography(
            pupils=tuple(make_pupil((10, 10), cx, cy, 3.0) for cx, cy in [(0, 0), (2, -1)]),
            rho=0.7,
        ),
    ]
    worst_adj = 0.0
    for model in models:
        for _ in range(20):
            o = rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10))
            fields = forward_apply(model, o)
            v = [rng.standard_normal(f.shape) + 1j * rng.standard_normal(f.shape) for f in fields]
            lhs = sum(np.vdot(vi, ui) for vi, ui in zip(v, fields))
            rhs = np.vdot(adjoint(model, v), o)
            worst_adj = max(worst_adj, abs(lhs - rhs) / abs(lhs))

    o = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    allpass = Ptychography(pupils=(all_pass_pupil((12, 12)),), rho=1.0)
    allpass_err = np.abs(forward_apply(allpass, o)[0] - o).max()

    x = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    parseval_err = abs(np.linalg.norm(fft2_unitary(x)) - np.linalg.norm(x)) / np.linalg.norm(x)

    report(
        "forward model exactness",
        worst_adj < 1e-10 and allpass_err < 1e-12 and parseval_err < 1e-12,
        f"adjoint {worst_adj:.2e} (<1e-10), all-pass {allpass_err:.2e} (<1e-12), "
        f"parseval {parseval_err:.2e} (<1e-12)",
    )


# ---------------------------------------------------------------- criterion 5


def test_posterior_frequency():
    t0 = time.time()
    fwc = 25
    a = np.full((2, 2), 0.2)
    b = np.full((2, 2), 0.8)
    provider = DiscreteRealPrior([a, b])
    y = simulate_measurement(a, NoiseParams(fwc=fwc), RngStream(999))
    counts = np.round(y * fwc).astype(int)
    log_a = sps.poisson.logpmf(counts, 0.2 * fwc).sum()
    log_b = sps.poisson.logpmf(counts, 0.8 * fwc).sum()
    exact = 1.0 / (1.0 + np.exp(log_b - log_a))
    sched = make_schedule(0.2, 0.18, 0.01, 300, eps=2e-6)
    cfg = SamplerConfig(schedule=sched)
    hits = 0
    for i in range(200):
        est = run_real(y, provider, cfg, RngStream(7, i))
        hits += np.linalg.norm(est - a) < np.linalg.norm(est - b)
    freq = hits / 200
    elapsed = time.time() - t0
    report(
        "posterior frequency",
        abs(freq - exact) <= 0.10 and elapsed < 300,
        f"empirical {freq:.3f} vs exact {exact:.3f} (+-0.10), {elapsed:.0f}s (<300s)",
    )


# ---------------------------------------------------------------- criterion 6


def test_delta_prior_denoising_gain():
    rng = np.random.default_rng(42)
    truth = rng.uniform(0.15, 0.95, (16, 16))
    params = NoiseParams(fwc=100, quant_bits=8)  # sigma0 = 0.1, 8-bit quantization
    provider = DiscreteRealPrior([truth])
    sched = make_schedule(0.1, 0.09, 0.001, 300, "geometric", eps=1e-7)
    cfg = SamplerConfig(schedule=sched)
    gains = []
    for seed in range(5):
        y = simulate_measurement(truth, params, RngStream(seed, 100))
        est = run_real(y, provider, cfg, RngStream(seed, 0))
        gains.append(psnr(est, truth) - psnr(y, truth))
    report(
        "delta-prior denoising gain",
        all(g >= 10 for g in gains),
        "gains " + " ".join(f"{g:+.1f}" for g in gains) + " dB (each >= +10)",
    )


# ---------------------------------------------------------------- criterion 7


def test_hio_baseline():
    from scipy import ndimage

    t0 = time.time()
    corrs = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        img = ndimage.gaussian_filter(rng.random((32, 32)), 1.5)
        img = (img - img.min()) / (img.max() - img.min())
        canvas = np.zeros((64, 64))
        canvas[:32, :32] = img
        mags = np.abs(fft2_unitary(canvas))
        support = np.zeros((64, 64), bool)
        support[:32, :32] = True
        res = hio_solve(
            mags, support, beta=0.9, iters=600, restarts=50,
            rng=RngStream(seed, 77), real_nonneg=True,
        )
        aligned = align_ambiguities(res.best, canvas.astype(complex))
        corrs.append(correlation(aligned, canvas.astype(complex)))
    elapsed = time.time() - t0
    report(
        "hio baseline",
        all(c >= 0.95 for c in corrs) and elapsed < 120,
        "corr " + " ".join(f"{c:.3f}" for c in corrs) + f" (each >= 0.95), {elapsed:.0f}s (<120s)",
    )


# ---------------------------------------------------------------- criterion 8


def test_ensemble_variance_concentration():
    base = np.full((4, 4), 0.5)
    a = base.copy()
    a[:, :2] = 0.3
    b = base.copy()
    b[:, :2] = 0.7
    provider = DiscreteRealPrior([a, b])
    y = np.full((4, 4), 12 / 25.0)  # counts 12 balance Poisson(7.5) vs Poisson(17.5)
    sched = make_schedule(0.2, 0.18, 0.01, 300, eps=2e-6)
    cfg = SamplerConfig(schedule=sched)
    stats = ensemble(lambda i: run_real(y, provider, cfg, RngStream(5, i)), 50)
    var_diff = stats.variance[:, :2].mean()
    var_same = stats.variance[:, 2:].mean()
    report(
        "ensemble variance concentration",
        var_diff > 10 * var_same,
        f"differing {var_diff:.3g} vs identical {var_same:.3g} (ratio {var_diff / var_same:.0f}x > 10x)",
    )


# ---------------------------------------------------------------- criterion 9


def test_metric_invariances():
    rng = np.random.default_rng(900)
    truth_phase = rng.uniform(-np.pi, np.pi, (12, 12))
    offset_cap = phase_psnr(truth_phase + 0.4, truth_phase)
    wrap_cap = phase_psnr(truth_phase + 2 * np.pi, truth_phase)
    img = rng.uniform(0, 1, (16, 16))
    psnr_cap = psnr(img, img)
    ssim_one = ssim(img, img)
    report(
        "metric invariances",
        offset_cap == 200.0 and wrap_cap == 200.0 and psnr_cap == 200.0
        and ssim_one == pytest.approx(1.0, abs=1e-12),
        f"phase offset {offset_cap}, 2pi {wrap_cap}, psnr id {psnr_cap}, ssim id {ssim_one:.12f}",
    )


# --------------------------------------------------------------- criterion 10


def test_cli_determinism(tmp_path):
    rng = np.random.default_rng(1000)
    img = rng.uniform(0.15, 0.85, (16, 16))
    clean = tmp_path / "clean.cvl"
    save_container(clean, img)
    sim = tmp_path / "sim"
    argv = ["simulate", "--input", str(clean), "--out", str(sim),
            "--fwc", "100", "--bits", "8", "--seed", "5"]
    assert cli_main(argv) == 0
    out1 = tmp_path / "r1"
    assert cli_main(["denoise", "--stack", str(sim), "--prior", "zero",
                     "--out", str(out1), "--seed", "13",
                     "--set", "t_count=50", "--set", "eps=1e-7"]) == 0
    manifest = json.loads((out1 / "manifest.json").read_text())
    out2 = tmp_path / "r2"
    assert cli_main(manifest_argv(manifest, out2)) == 0
    mismatched = [
        name
        for name in manifest["outputs"] + ["manifest.json"]
        if (out1 / name).read_bytes() != (out2 / name).read_bytes()
    ]
    # the simulate stage must also replay bit-exactly from its manifest
    sim_manifest = json.loads((sim / "manifest.json").read_text())
    sim2 = tmp_path / "sim2"
    assert cli_main(manifest_argv(sim_manifest, sim2)) == 0
    mismatched += [
        f"sim/{name}"
        for name in sim_manifest["outputs"] + ["manifest.json"]
        if (sim / name).read_bytes() != (sim2 / name).read_bytes()
    ]
    report(
        "cli determinism",
        not mismatched,
        "all outputs bit-identical" if not mismatched else f"mismatch: {mismatched}",
    )
