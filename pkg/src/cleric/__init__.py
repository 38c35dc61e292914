"""Whole-slide-image compression: learnable lifting wavelet front end,
deformable/recurrent residual transforms, hyperprior-conditioned range
coding, pyramidal tile containers, and an on-demand tile decode service."""

__version__ = "0.1.0"

from .codec import CodecConfig
from .kernels import BACKEND as KERNEL_BACKEND

__all__ = ["CodecConfig", "KERNEL_BACKEND", "__version__"]
