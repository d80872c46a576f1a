"""Seeded synthetic fixtures with ground truth, and brute-force reference oracles."""

from .rng import ALGORITHM, make_rng

__all__ = ["ALGORITHM", "make_rng"]
