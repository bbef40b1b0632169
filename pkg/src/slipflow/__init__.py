"""Steady 2D exterior flow with slip boundary conditions: stream-function Galerkin solver and checks."""

__version__ = "0.1.0"
