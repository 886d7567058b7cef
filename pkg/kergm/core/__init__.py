"""Core numerical library for kernelized graph matching."""
