"""Path finite elements for designing quasi-static motions of nonlinear structures."""

__version__ = "0.1.0"
