"""Hard-core point processes on Euclidean regions and on the sphere."""
__version__ = "0.1.0"
