"""Learning dynamics in harmonic games."""
