"""Closed 2-forms with values in constraint fibres over flat tori.

Submodules: ``lambda2`` (pointwise algebra), ``fibers`` (constraint
families), ``grid`` (spectral calculus), ``solvers``, ``continuation``,
``diagnostics`` and the ``wedge4`` command line tool in ``cli``.
"""
from .grid import Grid
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["Grid", "BACKEND", "__version__"]
