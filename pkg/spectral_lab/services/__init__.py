"""Numerical services: exact algebra, spectra, perturbations and run storage."""
