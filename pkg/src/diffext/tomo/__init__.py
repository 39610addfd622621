from .embedding import embed_angles
from .phantom import MODIFIED_SHEPP_LOGAN, add_noise, pixel_centers, shepp_logan
from .radon import DEFAULT_BINS, Sinogram, detector_positions, fbp, radon_forward, ramp_filter

__all__ = [
    "DEFAULT_BINS",
    "MODIFIED_SHEPP_LOGAN",
    "Sinogram",
    "add_noise",
    "detector_positions",
    "embed_angles",
    "fbp",
    "pixel_centers",
    "radon_forward",
    "ramp_filter",
    "shepp_logan",
]
