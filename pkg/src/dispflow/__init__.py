"""Dispersive geometric flows into embedded almost Hermitian targets."""
