"""latres: latent-resolution prediction for upscaled images and videos.

Estimates the native ("latent") resolution of content that was upscaled to
its presented resolution, using small convolutional networks evaluated at
Harris-corner locations.
"""
from .errors import DataError, LatresError, NumericError, ShapeError

__version__ = "0.1.0"

CLASS_HEIGHTS = (144, 240, 360, 480, 720, 1080)

__all__ = [
    "CLASS_HEIGHTS",
    "DataError",
    "LatresError",
    "NumericError",
    "ShapeError",
    "__version__",
]
