"""entrofact - exact and Monte Carlo checks of entropy factorization for lattice spin systems."""

__version__ = "0.1.0"
