"""Quantum-symplectic toolkit for Hamiltonian systems.

Kähler realification of Schrödinger dynamics, KvN encoding of integrable
phase-space ensembles, and first-order Lie perturbation stepping.
"""

__version__ = "0.1.0"
