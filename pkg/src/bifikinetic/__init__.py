"""Bi-fidelity surrogates for the uncertain Boltzmann equation.

A penalized spectral kinetic solver supplies the expensive snapshots, a
kinetic-flux Euler solver the cheap ones, and a greedy Gramian projection
links the two.
"""
from __future__ import annotations

__version__ = "0.1.0"
