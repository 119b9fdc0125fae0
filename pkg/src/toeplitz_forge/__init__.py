"""Exponentially accurate symbol calculus and Berezin-Toeplitz operators.

Model geometries: the Bargmann plane and the round sphere. The package
builds analytic symbols with explicit norm certificates, composes and
inverts them, expands reproducing kernels, quantizes symbols to matrices
on the exact finite-dimensional spaces, and cross-checks every expansion
against exact linear algebra.
"""

__version__ = "0.1.0"

from ._kernels import backend_name

__all__ = ["backend_name", "__version__"]
