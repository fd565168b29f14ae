"""High-dimensional volume potentials by separated Laguerre-Gaussian cubature."""

__version__ = "0.1.0"
