"""Discontinuous Galerkin residuals as a training loss for a convolutional
time-derivative network, with a classical DG reference solver."""

__version__ = "0.1.0"
