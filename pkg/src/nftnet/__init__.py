"""Continuous-spectrum nonlinear Fourier transforms, an NFDM modem, and a
Conv/LSTM autoencoder that learns the forward and inverse transforms.

Submodules: ``core``, ``scattering``, ``synthesis``, ``modem``, ``dataset``,
``neuralnet``, ``evalharness``, ``cli``.
"""

__version__ = "0.1.0"
