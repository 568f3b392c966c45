"""Seeded random matrices and lattices for property checks."""

from __future__ import annotations

import random
from fractions import Fraction

from .exactnum import PMatrix
from .lattice import Lattice, canonicalize


def small_entries(p: int) -> list:
    """{0, +-1, +-p, +-1/p}"""
    return [Fraction(0)] + [s * Fraction(p) ** k for s in (1, -1) for k in (0, 1, -1)]


def random_invertible(rng: random.Random, n: int, p: int, entries=None) -> PMatrix:
    entries = entries or small_entries(p)
    while True:
        M = PMatrix([[rng.choice(entries) for _ in range(n)] for _ in range(n)], p)
        if M.det() != 0:
            return M


def random_matrix(rng: random.Random, n: int, p: int, spread: int = 2) -> PMatrix:
    """Invertible matrix with entries c * p^k, |c| <= 3 and |k| <= spread."""
    while True:
        rows = [[rng.randint(-3, 3) * Fraction(p) ** rng.randint(-spread, spread) for _ in range(n)]
                for _ in range(n)]
        M = PMatrix(rows, p)
        if M.det() != 0:
            return M


def random_lattice(rng: random.Random, n: int, p: int, spread: int = 2) -> Lattice:
    return canonicalize(random_matrix(rng, n, p, spread))
