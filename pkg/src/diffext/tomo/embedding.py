import numpy as np

from ..errors import ConfigError
from .radon import check_angles

MODES = ("half-circle", "full-circle", "scalar")


def embed_angles(angles_deg, mode: str = "half-circle") -> np.ndarray:
    """Map projection angles in [0, 180) to ambient coordinates.

    ``half-circle`` sends theta to (cos, sin) of theta in radians, an
    injective map onto the upper unit half-circle. ``full-circle`` doubles
    the angle, closing the loop but identifying 0 with 180 degrees, whose
    projections are mirror images. ``scalar`` returns theta / 180.
    """
    angles = check_angles(angles_deg)
    if mode == "half-circle":
        t = np.deg2rad(angles)
        return np.column_stack([np.cos(t), np.sin(t)])
    if mode == "full-circle":
        t = 2.0 * np.deg2rad(angles)
        return np.column_stack([np.cos(t), np.sin(t)])
    if mode == "scalar":
        return (angles / 180.0)[:, None]
    raise ConfigError(f"unknown angle embedding {mode!r}; choose from {MODES}")
