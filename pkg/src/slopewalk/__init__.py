"""Linear foot-trajectory policies for a planar five-link biped on sloped terrain."""

__version__ = "0.1.0"
