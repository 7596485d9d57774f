"""Spreading speeds of reaction-diffusion free boundary problems in space-time periodic media."""

__version__ = "0.1.0"
