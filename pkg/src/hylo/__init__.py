"""Hylomorphic solitary waves: Q-balls, planar vortices and electrostatic KGM states on radial grids."""

__version__ = "0.1.0"
