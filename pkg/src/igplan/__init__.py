"""Information-gain driven survey planning on Bayesian occupancy grids."""

__version__ = "0.1.0"
