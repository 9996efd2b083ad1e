"""smallgain: vector small-gain machinery and the closed-loop stability
experiments it certifies (delayed bioreactor under delay-free feedback,
an integral-ISS planar interconnection, and a sampled-data loop)."""

__version__ = "0.1.0"

from . import gains, models, sim, verify

__all__ = ["gains", "models", "sim", "verify", "__version__"]
