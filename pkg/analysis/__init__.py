"""Noise budget, fitting and detection statistics."""
