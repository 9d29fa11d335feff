"""Certified spectral-gap bounds for SL(n, R) on elementary generators."""

from ._sosgap import ball_sizes, pipeline, spectral_gap, verify, __version__

__all__ = ["ball_sizes", "pipeline", "spectral_gap", "verify", "__version__"]
