"""Bloch-vector physics, trap ensembles, constants and errors."""
