"""Variational time evolution of an infinite MPS circuit ansatz through the
transverse-field Ising dynamical quantum phase transition."""

__version__ = "0.1.0"
