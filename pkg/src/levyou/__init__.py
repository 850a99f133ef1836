"""Fourier-inversion sampling and pricing for Lévy-driven OU processes."""
