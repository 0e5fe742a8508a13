"""Translation-invariant energy densities of measures and Brody curves."""

__version__ = "0.1.0"
