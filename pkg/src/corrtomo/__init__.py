"""Correlated-readout tomography toolkit."""
