"""End-to-end experiments: logarithmic spiral and sparse-view CT."""

from __future__ import annotations

import math
import os
import subprocess
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..analysis import (ErrorReport, frobenius_error, reports_to_csv, spline_interpolate_sinogram,
                        training_only_reconstruction)
from ..errors import NumericalError
from ..extender import ExtenderModel, extend_batch, fit
from ..tomo import Sinogram, add_noise, embed_angles, fbp, radon_forward, shepp_logan
from ..tomo.io import write_mxf, write_pgm16, write_sinogram
from .config import ExperimentConfig, Seeds

LOCK_NAME = ".diffext.lock"


@contextmanager
def output_lock(output_dir: Path):
    """Exclusive lock file so only one experiment writes to ``output_dir``."""
    output_dir.mkdir(parents=True, exist_ok=True)
    lock = output_dir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as exc:
        raise OSError(f"{output_dir} is locked by another run (remove {lock} if stale)") from exc
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def version_string() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"v{__version__}-g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


def write_manifest(path: Path, cfg: ExperimentConfig, seeds: Seeds) -> None:
    lines = [f"version = {version_string()}"]
    lines += [f"{k} = {v}" for k, v in cfg.as_items()]
    lines += [f"seed_{k} = {v}" for k, v in vars(seeds).items()]
    path.write_text("\n".join(lines) + "\n")


def _check_finite(name: str, arr) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} contains non-finite values")


def _runtime(cfg: ExperimentConfig, seconds: float):
    return seconds if cfg.timing else None


# --------------------------------------------------------------------- spiral


def spiral_points(t) -> np.ndarray:
    """Logarithmic spiral ``e^t (cos 2 pi t, sin 2 pi t)``."""
    t = np.asarray(t, dtype=np.float64)
    r = np.exp(t)
    return np.column_stack([r * np.cos(2 * np.pi * t), r * np.sin(2 * np.pi * t)])


def spiral_label(points) -> np.ndarray:
    """Inverse of the parametrization: ``log |x|``."""
    return np.log(np.linalg.norm(np.asarray(points, dtype=np.float64), axis=1))


def sample_spiral_parameters(rng: np.random.Generator, k: int, mode: str = "parameter") -> np.ndarray:
    u = rng.uniform(0.0, 1.0, k)
    if mode == "arclength":
        # arclength from 0 to t is proportional to e^t - 1
        return np.log1p(u * (math.e - 1.0))
    return u


@dataclass
class SpiralResult:
    reports: list
    models: dict = field(default_factory=dict)
    train_params: dict = field(default_factory=dict)
    manifold_predictions: dict = field(default_factory=dict)
    cube_predictions: dict = field(default_factory=dict)
    eval_params: np.ndarray | None = None
    cube_points: np.ndarray | None = None


def _raster(model: ExtenderModel, M: float, size: int) -> np.ndarray:
    c = -M + (np.arange(size) + 0.5) * (2 * M / size)
    X, Y = np.meshgrid(c, c[::-1])
    return extend_batch(np.column_stack([X.ravel(), Y.ravel()]), model)[:, 0].reshape(size, size)


def run_spiral(cfg: ExperimentConfig, write: bool = True) -> SpiralResult:
    """Learn ``f = log|x|`` from spiral samples for each batch size.

    Evaluates on fresh on-manifold points (error against exact values) and
    on uniform points of the cube (the off-manifold extension).
    """
    seeds = Seeds.derive(cfg.seed)
    M = cfg.half_width
    out = Path(cfg.output_dir)
    eval_rng = np.random.default_rng(seeds.eval)
    train_rng = np.random.default_rng(seeds.train)
    t_eval = eval_rng.uniform(0.0, 1.0, cfg.eval_count)
    on_manifold = spiral_points(t_eval)
    cube = eval_rng.uniform(-M, M, size=(cfg.eval_count, 2))

    result = SpiralResult(reports=[], eval_params=t_eval, cube_points=cube)
    for k in cfg.batch_sizes:
        t = sample_spiral_parameters(train_rng, k, cfg.train_sampling)
        X = spiral_points(t)
        start = time.perf_counter()
        model = fit(X, t, cfg.n_bar, cfg.m_reference, M, cfg.delta, seeds.fit)
        pred = extend_batch(on_manifold, model)[:, 0]
        elapsed = time.perf_counter() - start
        cube_pred = extend_batch(cube, model)[:, 0]
        _check_finite("spiral predictions", pred)
        _check_finite("spiral cube predictions", cube_pred)
        err = frobenius_error(pred, t_eval)
        result.reports.append(ErrorReport("learned", k, err, _runtime(cfg, elapsed)))
        result.models[k] = model
        result.train_params[k] = t
        result.manifold_predictions[k] = pred
        result.cube_predictions[k] = cube_pred

    if write:
        with output_lock(out):
            (out / "report.csv").write_text(reports_to_csv(result.reports))
            write_manifest(out / "manifest.txt", cfg, seeds)
            for k, model in result.models.items():
                t = result.train_params[k]
                write_mxf(out / f"spiral_k{k}_train.mxf", np.column_stack([model.train_points, t]))
                write_mxf(out / f"spiral_k{k}_cube.mxf",
                          np.column_stack([cube, result.cube_predictions[k]]))
                write_mxf(out / f"spiral_k{k}_manifold.mxf",
                          np.column_stack([on_manifold, t_eval, result.manifold_predictions[k]]))
                write_pgm16(out / f"spiral_k{k}_extension.pgm", _raster(model, M, cfg.raster_size))
    return result


# ------------------------------------------------------------------------- ct


@dataclass
class CTResult:
    reports: list
    phantom: np.ndarray | None = None
    noisy: np.ndarray | None = None
    eval_angles: np.ndarray | None = None
    models: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    learned: dict = field(default_factory=dict)
    spline: dict = field(default_factory=dict)
    reconstructions: dict = field(default_factory=dict)
    spline_clamped: dict = field(default_factory=dict)


def training_angles(rng: np.random.Generator, k: int, mode: str) -> np.ndarray:
    if mode == "grid":
        return np.arange(k) * (180.0 / k)
    return np.sort(rng.uniform(0.0, 180.0, k))


def run_ct(cfg: ExperimentConfig, write: bool = True) -> CTResult:
    """Sparse-view CT on a noisy Shepp-Logan phantom.

    For each batch size the training sinogram is extended to ``eval_count``
    random angles by the kernel extender and by a cubic spline; training-only,
    learned and spline sinograms are reconstructed by FBP and compared to the
    noiseless phantom (``<method>``) and to the noisy one (``<method>_vs_noisy``).
    """
    seeds = Seeds.derive(cfg.seed)
    out = Path(cfg.output_dir)
    phantom = shepp_logan(cfg.d)
    noisy = add_noise(phantom, cfg.noise_level, seeds.noise)
    eval_rng = np.random.default_rng(seeds.eval)
    train_rng = np.random.default_rng(seeds.train)
    eval_angles = np.sort(eval_rng.uniform(0.0, 180.0, cfg.eval_count))
    eval_coords = embed_angles(eval_angles, cfg.embedding)

    result = CTResult(reports=[], phantom=phantom, noisy=noisy, eval_angles=eval_angles)
    rows = []
    for k in cfg.batch_sizes:
        angles = training_angles(train_rng, k, cfg.train_sampling)
        train = radon_forward(noisy, angles, cfg.nb)

        start = time.perf_counter()
        recon_train = training_only_reconstruction(train, cfg.d)
        t_train = time.perf_counter() - start

        start = time.perf_counter()
        model = fit(embed_angles(angles, cfg.embedding), train.data.T, cfg.n_bar,
                    cfg.m_reference, cfg.half_width, cfg.delta, seeds.fit)
        learned = Sinogram(extend_batch(eval_coords, model).T, eval_angles)
        _check_finite("learned sinogram", learned.data)
        recon_learned = fbp(learned, cfg.d)
        t_learned = time.perf_counter() - start

        start = time.perf_counter()
        spline, n_clamped = spline_interpolate_sinogram(train, eval_angles)
        recon_spline = fbp(spline, cfg.d)
        t_spline = time.perf_counter() - start

        recons = {"training": recon_train, "learned": recon_learned, "spline": recon_spline}
        times = {"training": t_train, "learned": t_learned, "spline": t_spline}
        for name, img in recons.items():
            _check_finite(f"{name} reconstruction", img)
            rows.append(ErrorReport(name, k, frobenius_error(img, phantom), _runtime(cfg, times[name])))
        for name, img in recons.items():
            rows.append(ErrorReport(f"{name}_vs_noisy", k, frobenius_error(img, noisy),
                                    _runtime(cfg, times[name])))
        result.models[k] = model
        result.train[k] = train
        result.learned[k] = learned
        result.spline[k] = spline
        result.reconstructions[k] = recons
        result.spline_clamped[k] = n_clamped
    result.reports = rows

    if write:
        with output_lock(out):
            (out / "report.csv").write_text(reports_to_csv(result.reports))
            write_manifest(out / "manifest.txt", cfg, seeds)
            write_pgm16(out / "phantom.pgm", phantom)
            write_pgm16(out / "phantom_noisy.pgm", noisy)
            for k in cfg.batch_sizes:
                write_sinogram(out / f"ct_k{k}_train_sino.mxf", result.train[k])
                write_pgm16(out / f"ct_k{k}_train_sino.pgm", result.train[k].data)
                write_pgm16(out / f"ct_k{k}_learned_sino.pgm", result.learned[k].data)
                write_pgm16(out / f"ct_k{k}_spline_sino.pgm", result.spline[k].data)
                for name, img in result.reconstructions[k].items():
                    write_pgm16(out / f"ct_k{k}_{name}.pgm", img)
                    write_mxf(out / f"ct_k{k}_{name}.mxf", img)
    return result
