"""Visual boundaries, volume entropy and equal-entropy conformal families
for a genus-two hyperbolic surface."""

__version__ = "0.1.0"
