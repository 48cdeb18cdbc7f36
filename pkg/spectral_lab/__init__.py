"""Spectral degeneracy lab: Laplace-Beltrami eigenvalue multiplicity on tori and spheres."""

__version__ = '0.1.0'
