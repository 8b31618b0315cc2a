"""Autocompensating QKD: link model, simulation, post-processing and analytics."""
