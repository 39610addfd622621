"""Parallel-beam forward projection and filtered back projection.

Geometry: a ray at angle theta and detector offset s is the line
``{s * (cos t, sin t) + r * (-sin t, cos t)}``; the image occupies
[-1, 1]^2 and detector offsets span [-sqrt(2), sqrt(2)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ..errors import ConfigError

DETECTOR_HALF_WIDTH = math.sqrt(2.0)
DEFAULT_BINS = 367


@dataclass(frozen=True)
class Sinogram:
    """Detector-by-angle matrix; column ``j`` is the projection at ``angles_deg[j]``."""

    data: np.ndarray  # (nb, na)
    angles_deg: np.ndarray  # (na,)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        angles = np.asarray(self.angles_deg, dtype=np.float64).ravel()
        if data.ndim != 2 or data.shape[1] != angles.size:
            raise ConfigError(f"sinogram data {data.shape} does not match {angles.size} angles")
        if data.shape[0] % 2 != 1:
            raise ConfigError(f"number of detector bins must be odd, got {data.shape[0]}")
        if np.any(np.diff(angles) < 0):
            raise ConfigError("sinogram angles must be in ascending order")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "angles_deg", angles)

    @property
    def nb(self) -> int:
        return self.data.shape[0]

    @property
    def na(self) -> int:
        return self.data.shape[1]

    @property
    def detector_positions(self) -> np.ndarray:
        return detector_positions(self.nb)

    def sorted(self) -> "Sinogram":
        order = np.argsort(self.angles_deg, kind="stable")
        return Sinogram(self.data[:, order], self.angles_deg[order])


def detector_positions(nb: int) -> np.ndarray:
    return np.linspace(-DETECTOR_HALF_WIDTH, DETECTOR_HALF_WIDTH, nb)


def check_angles(angles_deg) -> np.ndarray:
    angles = np.asarray(angles_deg, dtype=np.float64).ravel()
    if np.any(angles < 0) or np.any(angles >= 180) or not np.all(np.isfinite(angles)):
        raise ConfigError("projection angles must lie in [0, 180) degrees")
    return angles


@numba.njit(cache=True)
def _bilinear(img, x, y, d, h):
    # continuous pixel index: column from x, row from y (row 0 at top)
    fj = (x + 1.0) / h - 0.5
    fi = (1.0 - y) / h - 0.5
    j0 = math.floor(fj)
    i0 = math.floor(fi)
    tj = fj - j0
    ti = fi - i0
    acc = 0.0
    for di in range(2):
        i = i0 + di
        if i < 0 or i >= d:
            continue
        wi = ti if di == 1 else 1.0 - ti
        for dj in range(2):
            j = j0 + dj
            if j < 0 or j >= d:
                continue
            wj = tj if dj == 1 else 1.0 - tj
            acc += wi * wj * img[i, j]
    return acc


@numba.njit(cache=True)
def _forward(img, thetas, s, h, n_half):
    d = img.shape[0]
    out = np.zeros((s.size, thetas.size))
    for a in range(thetas.size):
        c = math.cos(thetas[a])
        sn = math.sin(thetas[a])
        for b in range(s.size):
            acc = 0.0
            for k in range(-n_half, n_half + 1):
                r = k * h
                acc += _bilinear(img, s[b] * c - r * sn, s[b] * sn + r * c, d, h)
            out[b, a] = acc * h
    return out


def radon_forward(img, angles_deg, nb: int = DEFAULT_BINS) -> Sinogram:
    """Line integrals of ``img`` at the given angles.

    Each ray is sampled at step ``h = 2/d`` with bilinear interpolation (zero
    outside the grid) and the samples are summed times ``h``. Columns are
    returned in the order of ``angles_deg``, which must be ascending.
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ConfigError(f"image must be square, got shape {img.shape}")
    angles = check_angles(angles_deg)
    d = img.shape[0]
    h = 2.0 / d
    n_half = int(math.ceil(DETECTOR_HALF_WIDTH / h))
    data = _forward(img, np.deg2rad(angles), detector_positions(nb), h, n_half)
    return Sinogram(data, angles)


def ramlak_response(nb: int, ds: float):
    """Frequency response of the discrete Ram-Lak kernel, zero-padded.

    Built from the spatial kernel ``h[0] = 1/(4 ds^2)``, ``h[odd n] =
    -1/(n pi ds)^2``, ``h[even n] = 0``, which avoids the DC error of a
    sampled ``|w|`` ramp. Returns ``(H, n_fft)``.
    """
    n_fft = 1 << int(math.ceil(math.log2(2 * nb)))
    n = np.concatenate([np.arange(0, n_fft // 2 + 1), np.arange(-n_fft // 2 + 1, 0)])
    kern = np.zeros(n_fft)
    kern[0] = 1.0 / (4.0 * ds * ds)
    odd = n % 2 == 1
    kern[odd] = -1.0 / (np.pi * n[odd] * ds) ** 2
    return np.real(np.fft.fft(kern)), n_fft


def ramp_filter(data: np.ndarray, ds: float) -> np.ndarray:
    """Ram-Lak filtering of each column of an (nb, na) array."""
    nb = data.shape[0]
    H, n_fft = ramlak_response(nb, ds)
    spec = np.fft.fft(data, n=n_fft, axis=0)
    return ds * np.real(np.fft.ifft(spec * H[:, None], axis=0))[:nb]


@numba.njit(cache=True)
def _backproject(filtered, thetas, s0, ds, d):
    h = 2.0 / d
    nb = filtered.shape[0]
    cs = np.cos(thetas)
    sn = np.sin(thetas)
    out = np.zeros((d, d))
    for i in range(d):
        y = 1.0 - (i + 0.5) * h
        for j in range(d):
            x = -1.0 + (j + 0.5) * h
            if x * x + y * y > 1.0:
                continue
            acc = 0.0
            for a in range(thetas.size):
                f = (x * cs[a] + y * sn[a] - s0) / ds
                k = math.floor(f)
                if k < 0 or k >= nb - 1:
                    continue
                t = f - k
                acc += (1.0 - t) * filtered[k, a] + t * filtered[k + 1, a]
            out[i, j] = acc
    return out


def fbp(sino: Sinogram, d: int = 256) -> np.ndarray:
    """Filtered back projection onto a d x d grid.

    Ram-Lak filtering per column, linear interpolation in the detector
    direction, scaling by ``pi / na``; pixels outside the unit disk are 0.
    """
    if sino.na < 2:
        raise ConfigError(f"filtered back projection needs at least 2 angles, got {sino.na}")
    s = sino.detector_positions
    ds = s[1] - s[0]
    filtered = np.ascontiguousarray(ramp_filter(sino.data, ds))
    img = _backproject(filtered, np.deg2rad(sino.angles_deg), s[0], ds, d)
    return img * (np.pi / sino.na)
