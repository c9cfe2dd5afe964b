"""Hybridised Minnaert resonances of bubble dimers and their effective media."""

__version__ = "0.1.0"
