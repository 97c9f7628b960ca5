"""Stability analysis and simulation of a prey-predator reaction-diffusion
model with additive Allee effect on square and fragmented habitats."""

__version__ = "0.1.0"
