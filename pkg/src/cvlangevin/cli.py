"""Command-line surface.

Subcommands: simulate, denoise, phase-retrieval, ptychography, hio, metrics,
protocol-check. Every run writes a JSON manifest recording the seed and the
fully resolved configuration; rebuilding the argv from that manifest and
rerunning reproduces all outputs bit-exactly.

Exit codes: 0 ok, 2 usage/input problem, 3 numerical divergence,
4 external-score transport failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import figures, forward, hio as hio_mod, metrics, noise, prior, sampler
from .container import (
    DTYPE_C64,
    container_dtype,
    load_container,
    save_container,
)
from .core import (
    ConfigError,
    DivergenceError,
    MeasurementStack,
    NoiseParams,
    RngStream,
    TransportError,
    make_schedule,
)
from .protocol import ScoreClient


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CVL_SEED")
    return int(env) if env else 0


def _resolve_config(args) -> dict:
    file_cfg = config_mod.load_config(args.config) if args.config else {}
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = config_mod._coerce(value)
    flag_map = {
        "eps": "eps",
        "t_count": "t_count",
        "runs": "runs",
        "jobs": "jobs",
        "fwc": "fwc",
        "bits": "quant_bits",
        "rho": "rho",
        "pad_factor": "pad_factor",
        "led_count": "led_count",
        "led_spacing": "led_spacing",
        "pupil_radius": "pupil_radius",
        "noise_scale": "noise_scale",
        "hio_beta": "hio_beta",
        "hio_iters": "hio_iters",
        "hio_restarts": "hio_restarts",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return config_mod.resolve(file_cfg, overrides)


def _write_manifest(out_dir: Path, manifest: dict) -> None:
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def manifest_argv(manifest: dict, out_dir) -> list:
    """Reconstruct an argv that reruns the manifest's command into ``out_dir``."""
    argv = [manifest["command"]]
    for key, value in manifest.get("inputs", {}).items():
        argv += [f"--{key}", str(value)]
    argv += ["--seed", str(manifest["seed"])]
    for key, value in sorted(manifest.get("config", {}).items()):
        argv += ["--set", f"{key}={value}"]
    argv += ["--out", str(out_dir)]
    return argv


def _noise_from_cfg(cfg: dict) -> NoiseParams:
    return NoiseParams(fwc=float(cfg["fwc"]), quant_bits=int(cfg["quant_bits"]))


def _schedule_from_cfg(cfg: dict, sigma0: float):
    return make_schedule(
        sigma0,
        cfg["sigma1_ratio"] * sigma0,
        cfg["sigmaT_ratio"] * sigma0,
        int(cfg["t_count"]),
        cfg["schedule_kind"],
        eps=float(cfg["eps"]),
    )


def _build_model(variant: str, cfg: dict, shape):
    if variant == "identity":
        return forward.Identity()
    if variant == "fourier":
        return forward.FourierMagnitude(pad_factor=int(cfg["pad_factor"]))
    if variant == "ptychography":
        return forward.ptychography_model(
            shape,
            int(cfg["led_count"]),
            float(cfg["led_spacing"]),
            float(cfg["pupil_radius"]),
            rho=float(cfg["rho"]),
        )
    raise ValueError(f"unknown model {variant!r} (expected identity|fourier|ptychography)")


def _model_from_manifest(manifest: dict, stack_dir: Path):
    desc = manifest["model"]
    variant = desc["variant"]
    if variant == "identity":
        return forward.Identity()
    if variant == "fourier":
        return forward.FourierMagnitude(pad_factor=desc["pad_factor"])
    if variant == "ptychography":
        masks = load_container(stack_dir / desc["pupils_file"])
        pupils = tuple(
            forward.PupilMask(center_kx=ckx, center_ky=cky, radius=desc["pupil_radius"], mask=m)
            for (ckx, cky), m in zip(desc["pupil_centers"], masks)
        )
        return forward.Ptychography(pupils=pupils, rho=desc["rho"])
    raise ValueError(f"manifest has unknown model variant {variant!r}")


def _load_stack(stack_arg: str):
    """Accept a directory holding stack.cvl + manifest.json, or the .cvl path."""
    p = Path(stack_arg)
    if p.is_dir():
        stack_path, manifest_path = p / "stack.cvl", p / "manifest.json"
    else:
        stack_path, manifest_path = p, p.parent / "manifest.json"
    if not stack_path.exists():
        raise FileNotFoundError(f"no measurement stack at {stack_path}")
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest next to stack: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    images = load_container(stack_path)
    noise_desc = manifest["noise"]
    params = NoiseParams(fwc=noise_desc["fwc"], quant_bits=noise_desc["quant_bits"])
    stack = MeasurementStack(
        images=tuple(np.real(im) for im in images), noise=params, rho=manifest["rho"]
    )
    model = _model_from_manifest(manifest, stack_path.parent)
    return stack, model, manifest


def _build_prior(spec: str, convention: str):
    if spec == "zero":
        return prior.ZeroPrior()
    if spec.startswith("discrete:"):
        path = spec.split(":", 1)[1]
        atoms = load_container(path)
        if np.iscomplexobj(atoms):
            return prior.DiscreteComplexPrior(list(atoms), convention=convention)
        return prior.DiscreteRealPrior(list(atoms))
    if spec.startswith("external:"):
        return prior.ExternalScoreProvider(spec.split(":", 1)[1])
    raise ValueError(f"unknown prior {spec!r} (expected zero|discrete:<path>|external:<endpoint>)")


def _parse_init(init: str, cfg: dict) -> sampler.InitSpec:
    if init == "measurement":
        return sampler.FromMeasurement()
    if init == "adjoint":
        return sampler.Adjoint()
    if init == "hio":
        return sampler.NoisyHio(
            noise_scale=float(cfg["noise_scale"]),
            beta=float(cfg["hio_beta"]),
            iters=int(cfg["hio_iters"]),
            restarts=int(cfg["hio_restarts"]),
        )
    path = Path(init)
    if path.exists():
        return sampler.Provided(load_container(path)[0])
    raise ValueError(f"unknown init {init!r} (expected measurement|hio|adjoint|<container path>)")


def _real_metrics(est: np.ndarray, truth: np.ndarray) -> dict:
    return {
        "psnr": metrics.psnr(est, truth),
        "ssim": metrics.ssim(est, truth),
        "fid": "n/a (out of scope)",
    }


def _complex_metrics(est: np.ndarray, truth: np.ndarray) -> dict:
    return {
        "psnr": metrics.psnr(np.abs(est), np.abs(truth)),
        "ssim": metrics.ssim(np.abs(est), np.abs(truth)),
        "phase_psnr": metrics.phase_psnr(np.angle(est), np.angle(truth)),
        "fid": "n/a (out of scope)",
    }


def cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    seed = _resolve_seed(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = load_container(args.input)
    obj = data[0]
    params = _noise_from_cfg(cfg)
    rng = RngStream(seed, 0)
    model = _build_model(args.model, cfg, obj.shape)

    if args.model == "identity" and not np.iscomplexobj(obj):
        stack_imgs = [noise.simulate_measurement(np.real(obj), params, rng)]
        rho = float(cfg["rho"])
        stack = MeasurementStack(images=tuple(stack_imgs), noise=params, rho=rho)
    else:
        rho_arg = 1.0 if args.model == "ptychography" else float(cfg["rho"])
        stack = noise.simulate_intensity_measurements(
            np.asarray(obj, dtype=np.complex128), model, params, rng, rho=rho_arg
        )
    save_container(out_dir / "stack.cvl", np.stack(stack.images))

    model_desc: dict = {"variant": args.model}
    if args.model == "fourier":
        model_desc["pad_factor"] = int(cfg["pad_factor"])
    if args.model == "ptychography":
        save_container(out_dir / "pupils.cvl", np.stack([p.mask for p in model.pupils]))
        model_desc.update(
            pupils_file="pupils.cvl",
            pupil_centers=[[p.center_kx, p.center_ky] for p in model.pupils],
            pupil_radius=float(cfg["pupil_radius"]),
            rho=float(cfg["rho"]),
        )
    outputs = ["stack.cvl"] + (["pupils.cvl"] if args.model == "ptychography" else [])
    figures.save_image_png(out_dir / "measurement0.png", stack.images[0], "measurement 0")
    manifest = {
        "command": "simulate",
        "seed": seed,
        "config": cfg,
        "inputs": {"input": str(args.input), "model": args.model},
        "noise": {"fwc": params.fwc, "quant_bits": params.quant_bits, "sigma0": params.sigma0},
        "rho": stack.rho,
        "m": stack.m,
        "model": model_desc,
        "outputs": outputs + ["measurement0.png"],
    }
    _write_manifest(out_dir, manifest)
    print(f"wrote {stack.m} measurement(s) to {out_dir}")
    return 0


def _run_reconstruction(args, branch: str) -> int:
    cfg = _resolve_config(args)
    seed = _resolve_seed(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stack, model, stack_manifest = _load_stack(args.stack)
    provider = _build_prior(args.prior, cfg["complex_convention"])
    sigma0 = stack_manifest["noise"]["sigma0"]
    schedule = _schedule_from_cfg(cfg, sigma0)
    init = _parse_init(args.init, cfg)
    cfg_s = sampler.SamplerConfig(
        schedule=schedule,
        steps_per_level=int(cfg["steps_per_level"]),
        clamp_floor=float(cfg["clamp_floor"]),
        init=init,
    )
    record = bool(getattr(args, "record_trajectory", False))
    if record:
        cfg_s = sampler.SamplerConfig(
            schedule=schedule,
            steps_per_level=int(cfg["steps_per_level"]),
            clamp_floor=float(cfg["clamp_floor"]),
            init=init,
            record_trajectory=True,
        )
    runs = int(cfg["runs"])
    manifest = {
        "command": branch,
        "seed": seed,
        "config": cfg,
        "inputs": {"stack": str(args.stack), "prior": args.prior, "init": args.init},
        "noise": stack_manifest["noise"],
        "outputs": ["estimate.cvl"],
    }
    trajectory: list | None = [] if record else None
    if args.truth:
        manifest["inputs"]["truth"] = str(args.truth)

    if branch == "denoise":
        if not isinstance(model, forward.Identity):
            raise ConfigError("denoise expects a stack simulated with the identity model")
        y = stack.images[0]

        def one_run(stream_id: int) -> np.ndarray:
            return sampler.run_real(
                y, provider, cfg_s, RngStream(seed, stream_id),
                trajectory=trajectory if stream_id == 0 else None,
            )

    else:

        def one_run(stream_id: int) -> np.ndarray:
            return sampler.run_complex(
                stack, model, provider, cfg_s, RngStream(seed, stream_id),
                trajectory=trajectory if stream_id == 0 else None,
            )

        if isinstance(init, sampler.NoisyHio):
            mags = np.sqrt(np.maximum(stack.images[0], 0.0))
            ph, pw = mags.shape
            f = model.pad_factor
            support = np.zeros(mags.shape, dtype=bool)
            support[: ph // f, : pw // f] = True
            hio_probe = hio_mod.hio_solve(
                mags,
                support,
                beta=init.beta,
                iters=init.iters,
                restarts=init.restarts,
                rng=RngStream(seed, 0).generator(),
                real_nonneg=True,
            )
            manifest["hio_residual"] = hio_probe.residual

    if runs > 1:
        stats = sampler.ensemble(one_run, runs, jobs=int(cfg["jobs"]))
        estimate = stats.samples[0]
        save_container(out_dir / "ensemble_mean.cvl", stats.mean)
        save_container(out_dir / "ensemble_variance.cvl", stats.variance)
        manifest["outputs"] += ["ensemble_mean.cvl", "ensemble_variance.cvl"]
        figures.save_variance_png(out_dir / "variance.png", stats.variance)
        manifest["outputs"].append("variance.png")
        if stats.phase_variance is not None:
            save_container(out_dir / "phase_variance.cvl", stats.phase_variance)
            manifest["outputs"].append("phase_variance.cvl")
    else:
        estimate = one_run(0)

    if trajectory:
        traj_dir = out_dir / "trajectory"
        traj_dir.mkdir(exist_ok=True)
        for i, iterate in enumerate(trajectory):
            save_container(traj_dir / f"iter_{i:04d}.cvl", iterate)
        manifest["trajectory"] = {"dir": "trajectory", "count": len(trajectory)}

    save_container(out_dir / "estimate.cvl", estimate)
    if np.iscomplexobj(estimate):
        for p in figures.save_complex_png(str(out_dir / "estimate"), estimate):
            manifest["outputs"].append(Path(p).name)
    else:
        figures.save_image_png(out_dir / "estimate.png", estimate, "estimate")
        manifest["outputs"].append("estimate.png")

    if args.truth:
        truth = load_container(args.truth)[0]
        if np.iscomplexobj(estimate):
            manifest["metrics"] = _complex_metrics(estimate, np.asarray(truth, complex))
        else:
            manifest["metrics"] = _real_metrics(estimate, np.real(truth))
        (out_dir / "metrics.json").write_text(json.dumps(manifest["metrics"], indent=2))
        manifest["outputs"].append("metrics.json")

    _write_manifest(out_dir, manifest)
    print(f"wrote estimate to {out_dir}")
    return 0


def cmd_hio(args) -> int:
    cfg = _resolve_config(args)
    seed = _resolve_seed(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stack, model, _ = _load_stack(args.stack)
    if not isinstance(model, forward.FourierMagnitude):
        raise ConfigError("hio expects a stack simulated with the fourier model")
    mags = np.sqrt(np.maximum(stack.images[0], 0.0))
    ph, pw = mags.shape
    f = model.pad_factor
    support = np.zeros(mags.shape, dtype=bool)
    support[: ph // f, : pw // f] = True
    result = hio_mod.hio_solve(
        mags,
        support,
        beta=float(cfg["hio_beta"]),
        iters=int(cfg["hio_iters"]),
        restarts=int(cfg["hio_restarts"]),
        rng=RngStream(seed, 0),
        real_nonneg=True,
    )
    obj = result.best[: ph // f, : pw // f]
    save_container(out_dir / "hio.cvl", obj)
    figures.save_complex_png(str(out_dir / "hio"), obj, tag="hio")
    manifest = {
        "command": "hio",
        "seed": seed,
        "config": cfg,
        "inputs": {"stack": str(args.stack)},
        "residual": result.residual,
        "outputs": ["hio.cvl", "hio_amplitude.png", "hio_phase.png"],
    }
    if args.truth:
        truth = load_container(args.truth)[0]
        aligned = hio_mod.align_ambiguities(obj, np.asarray(truth, complex))
        manifest["metrics"] = {
            "correlation": hio_mod.correlation(aligned, np.asarray(truth, complex))
        }
    _write_manifest(out_dir, manifest)
    print(f"HIO residual {result.residual:.4g}; wrote {out_dir}")
    return 0


def cmd_metrics(args) -> int:
    est = load_container(args.est)[0]
    truth = load_container(args.truth)[0]
    if np.iscomplexobj(est) != np.iscomplexobj(truth):
        raise ValueError("est and truth must both be real or both complex")
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    if np.iscomplexobj(est):
        report = _complex_metrics(est, truth)
    else:
        report = _real_metrics(np.real(est), np.real(truth))
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_protocol_check(args) -> int:
    probe = np.zeros((4, 4))
    with ScoreClient.from_endpoint(args.endpoint) as client:
        score = client.request(probe, sigma=0.5, is_complex=False)
    report = {"ok": True, "height": score.shape[0], "width": score.shape[1]}
    print(json.dumps(report))
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, help="RNG seed (falls back to $CVL_SEED, then 0)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")


def _add_sampler_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=float, help="Langevin step-size scale")
    p.add_argument("--t-count", dest="t_count", type=int, help="number of noise levels")
    p.add_argument("--runs", type=int, help="stochastic reconstructions (ensemble if > 1)")
    p.add_argument("--jobs", type=int, help="parallel ensemble workers")
    p.add_argument(
        "--record-trajectory",
        dest="record_trajectory",
        action="store_true",
        help="dump one container per recorded iterate under <out>/trajectory/",
    )
    p.add_argument("--noise-scale", dest="noise_scale", type=float)
    p.add_argument("--hio-beta", dest="hio_beta", type=float)
    p.add_argument("--hio-iters", dest="hio_iters", type=int)
    p.add_argument("--hio-restarts", dest="hio_restarts", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvl",
        description="Annealed Langevin reconstruction of photon-limited real and complex images",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="synthesize a noisy measurement stack")
    p.add_argument("--input", required=True, help="clean image / object container")
    p.add_argument("--model", default="identity", help="identity|fourier|ptychography")
    p.add_argument("--out", required=True)
    p.add_argument("--fwc", type=float)
    p.add_argument("--bits", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--pad-factor", dest="pad_factor", type=int)
    p.add_argument("--led-count", dest="led_count", type=int)
    p.add_argument("--led-spacing", dest="led_spacing", type=float)
    p.add_argument("--pupil-radius", dest="pupil_radius", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    for name in ("denoise", "phase-retrieval", "ptychography"):
        p = sub.add_parser(name, help=f"{name} reconstruction by annealed Langevin sampling")
        p.add_argument("--stack", required=True, help="stack directory or .cvl file")
        p.add_argument("--prior", default="zero", help="zero|discrete:<path>|external:<endpoint>")
        p.add_argument("--init", default="measurement", help="measurement|hio|adjoint|<path>")
        p.add_argument("--truth", help="ground-truth container for metrics")
        p.add_argument("--out", required=True)
        _add_sampler_flags(p)
        _add_common(p)
        p.set_defaults(func=lambda a, _n=name: _run_reconstruction(a, _n), branch=name)

    p = sub.add_parser("hio", help="Fienup HIO phase-retrieval baseline")
    p.add_argument("--stack", required=True)
    p.add_argument("--truth")
    p.add_argument("--out", required=True)
    p.add_argument("--hio-beta", dest="hio_beta", type=float)
    p.add_argument("--hio-iters", dest="hio_iters", type=int)
    p.add_argument("--hio-restarts", dest="hio_restarts", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_hio)

    p = sub.add_parser("metrics", help="PSNR/SSIM (and phase PSNR for complex pairs)")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("protocol-check", help="handshake with a score endpoint")
    p.add_argument("--endpoint", required=True, help="host:port or command line to spawn")
    _add_common(p)
    p.set_defaults(func=cmd_protocol_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
