"""Structure-preserving discretization of first-order wave systems with drift."""

__version__ = "0.1.0"
