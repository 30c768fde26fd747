"""Desk-scale verification toolkit for parametric holomorphy of elliptic
ground eigenpairs.

Subpackages cover: exact growth sequences (``sequences``), ellipse/stadium
inclusion geometry (``geometry``), affine coefficient fields (``fields``),
P1 eigensolvers (``fem``), problem bundles (``problems``), parametric
derivative measurement (``derivatives``), derivative-bound certificates
(``certify``), lattice-rule estimators (``qmc``), and the command line
(``cli``).
"""

__version__ = "0.1.0"
