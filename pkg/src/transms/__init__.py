"""Toolkit for accelerated 2D MPI calibration via system-matrix super-resolution."""

__version__ = "0.1.0"
