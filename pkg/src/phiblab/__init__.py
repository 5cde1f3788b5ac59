"""Numerical lab for fibred cusp b-operators on model spaces.

Submodules: :mod:`geometry` (groupoid and algebroid), :mod:`operators`
(the operator algebra), :mod:`symbols` (principal symbol and normal
operators), :mod:`spectral` (indicial spectrum and Mellin transform),
:mod:`index_engine` (relative index, staircases, Z/k invariants) and
:mod:`cli`.
"""

__version__ = "0.1.0"
