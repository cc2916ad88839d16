"""tonemine: mine tone-contour shape types from f0 data via similarity
networks + community detection, then predict them from linguistic features."""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
