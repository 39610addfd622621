import numpy as np

from ..errors import ConfigError

# Modified Shepp-Logan (Toft): x0, y0, semi-axis a, semi-axis b, rotation deg, intensity.
MODIFIED_SHEPP_LOGAN = (
    (0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.2),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.2),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
    (0.0, -0.605, 0.023, 0.023, 0.0, 0.1),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
)

MIN_SIDE = 16


def pixel_centers(d: int):
    """Pixel-center coordinates of a d x d grid covering [-1, 1]^2.

    Returns ``(X, Y)`` meshes; row 0 is the top (y close to +1), column 0 the
    left (x close to -1).
    """
    h = 2.0 / d
    c = -1.0 + (np.arange(d) + 0.5) * h
    return c[None, :].repeat(d, axis=0), (-c)[:, None].repeat(d, axis=1)


def ellipse_mask(X, Y, x0, y0, a, b, phi_deg):
    phi = np.deg2rad(phi_deg)
    cp, sp = np.cos(phi), np.sin(phi)
    dx, dy = X - x0, Y - y0
    u = dx * cp + dy * sp
    v = -dx * sp + dy * cp
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def shepp_logan(d: int = 256, ellipses=MODIFIED_SHEPP_LOGAN) -> np.ndarray:
    """Modified Shepp-Logan phantom sampled at pixel centers.

    Each pixel is the summed intensity of the ellipses containing its
    center, clamped at zero.
    """
    if d < MIN_SIDE:
        raise ConfigError(f"image side d must be >= {MIN_SIDE}, got {d}")
    X, Y = pixel_centers(d)
    img = np.zeros((d, d))
    for x0, y0, a, b, phi, val in ellipses:
        img[ellipse_mask(X, Y, x0, y0, a, b, phi)] += val
    return np.clip(img, 0.0, None)


def add_noise(img, level: float, seed: int) -> np.ndarray:
    """Return ``img + level * U`` with U i.i.d. uniform on [0, 1]."""
    if level < 0:
        raise ConfigError(f"noise level must be non-negative, got {level}")
    img = np.asarray(img, dtype=np.float64)
    if level == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    return img + level * rng.uniform(0.0, 1.0, size=img.shape)
