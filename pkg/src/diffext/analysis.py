"""Baselines and error metrics for the experiments."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError
from .tomo.radon import Sinogram, fbp

REPORT_FIELDS = ("method", "batch", "error", "runtime_s")


@dataclass(frozen=True)
class ErrorReport:
    """One row of an experiment report.

    ``error`` is the Frobenius norm of the difference to the reference;
    ``runtime_s`` is None when timing is not recorded.
    """

    method: str
    batch: int
    error: float
    runtime_s: float | None = None

    def __post_init__(self):
        if not self.error >= 0:
            raise ConfigError(f"error must be non-negative, got {self.error}")


def frobenius_error(A, B) -> float:
    """Frobenius norm ``sqrt(sum((A - B)**2))`` of the difference."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ConfigError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.sqrt(np.sum((A - B) ** 2)))


def reports_to_csv(reports: Iterable[ErrorReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for r in reports:
        runtime = "" if r.runtime_s is None else f"{r.runtime_s:.6f}"
        w.writerow([r.method, r.batch, repr(float(r.error)), runtime])
    return buf.getvalue()


def read_reports_csv(text: str) -> list[ErrorReport]:
    rows = csv.DictReader(io.StringIO(text))
    return [
        ErrorReport(r["method"], int(r["batch"]), float(r["error"]),
                    float(r["runtime_s"]) if r["runtime_s"] else None)
        for r in rows
    ]


class SplineResult(NamedTuple):
    sinogram: Sinogram
    n_clamped: int


def spline_interpolate_sinogram(train: Sinogram, query_angles) -> SplineResult:
    """Natural cubic spline over angle, one spline per detector row.

    Queries outside ``[min, max]`` of the training angles are clamped to the
    boundary knots; how many were clamped is returned alongside.
    """
    if train.na < 4:
        raise ConfigError(f"spline interpolation needs at least 4 training angles, got {train.na}")
    knots = train.angles_deg
    if np.any(np.diff(knots) <= 0):
        raise ConfigError("training angles must be strictly increasing")
    q = np.asarray(query_angles, dtype=np.float64).ravel()
    clamped = np.clip(q, knots[0], knots[-1])
    spline = CubicSpline(knots, train.data, axis=1, bc_type="natural")
    return SplineResult(Sinogram(spline(clamped), q), int(np.sum(clamped != q)))


def training_only_reconstruction(train: Sinogram, d: int = 256) -> np.ndarray:
    """FBP of the sparse training sinogram alone."""
    if train.na == 0:
        raise ConfigError("training sinogram has no projections")
    return fbp(train, d)
