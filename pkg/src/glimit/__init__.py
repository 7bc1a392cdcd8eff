"""Learning G-limits of multiscale elliptic equations with PINNs."""

__version__ = "0.1.0"
