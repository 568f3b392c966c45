"""Z_p-lattices in Q_p^n: canonical forms, meet/join, indices, distance, balls.

Distances are integers counting multiples of log p.
"""

from __future__ import annotations

import math
from collections import deque
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import product

from .exactnum import (
    DimensionMismatch,
    PMatrix,
    column_echelon,
    format_entry,
    parse_entry,
    smith_exponents,
    val,
)


class Lattice:
    """Full-rank Z_p-lattice, identified by its canonical upper-triangular basis."""

    def __init__(self, basis: PMatrix):
        # basis must already be canonical; use canonicalize() otherwise
        self.basis = basis

    @classmethod
    def standard(cls, n: int, p: int) -> "Lattice":
        return cls(PMatrix.identity(n, p))

    @property
    def n(self) -> int:
        return self.basis.nrows

    @property
    def p(self) -> int:
        return self.basis.p

    @cached_property
    def inverse_basis(self) -> PMatrix:
        return self.basis.inverse()

    @cached_property
    def sort_key(self):
        return tuple(format_entry(x) for r in self.basis.rows for x in r)

    def diagonal_exponents(self):
        return tuple(val(self.basis[i, i], self.p) for i in range(self.n))

    def __eq__(self, other):
        return isinstance(other, Lattice) and self.basis == other.basis

    def __hash__(self):
        return hash(self.basis)

    def __lt__(self, other):
        return self.sort_key < other.sort_key

    def __repr__(self):
        return f"Lattice({self.basis.to_strings()}, p={self.p})"

    def transform(self, g: PMatrix) -> "Lattice":
        """The image g(L)."""
        if g.nrows != self.n:
            raise DimensionMismatch(f"{g.shape} acting on dimension {self.n}")
        return canonicalize(g @ self.basis)

    def scaled(self, k: int) -> "Lattice":
        """The homothetic lattice p^k L."""
        return canonicalize(self.basis.scale(Fraction(self.p) ** k))

    def to_json(self) -> dict:
        return {"dim": self.n, "p": self.p, "basis": self.basis.to_strings()}

    @classmethod
    def from_json(cls, data: dict) -> "Lattice":
        p = data["p"]
        rows = [[parse_entry(str(x), p) for x in r] for r in data["basis"]]
        if len(rows) != data["dim"]:
            raise DimensionMismatch("basis does not match dim")
        return canonicalize(PMatrix(rows, p))


def canonicalize(basis: PMatrix) -> Lattice:
    """Lattice spanned over Z_p by the columns of ``basis`` (square or wide)."""
    cols = column_echelon(basis.columns(), basis.p)
    return Lattice(PMatrix.from_columns(cols, basis.p))


def _check(L: Lattice, M: Lattice):
    if L.n != M.n or L.p != M.p:
        raise DimensionMismatch(f"lattices in dimension {L.n} (p={L.p}) and {M.n} (p={M.p})")


def rel_exponents(L: Lattice, M: Lattice) -> tuple:
    """Elementary-divisor exponents of M relative to L, sorted descending."""
    _check(L, M)
    if L == M:
        return (0,) * L.n
    return smith_exponents(L.inverse_basis @ M.basis)


def index_exp(L: Lattice, M: Lattice) -> int:
    """Exponent of the index [L : L meet M]."""
    return sum(max(d, 0) for d in rel_exponents(L, M))


def dist(L: Lattice, M: Lattice) -> int:
    """Distance log([L:L^M][M:L^M]) in units of log p."""
    return sum(abs(d) for d in rel_exponents(L, M))


def log_distance(units: int, p: int) -> float:
    return units * math.log(p)


def contains(L: Lattice, M: Lattice) -> bool:
    """True iff M is a sublattice of L."""
    return all(d >= 0 for d in rel_exponents(L, M))


def join(L: Lattice, M: Lattice) -> Lattice:
    _check(L, M)
    return canonicalize(PMatrix(
        [rl + rm for rl, rm in zip(L.basis.rows, M.basis.rows)], L.p))


def dual(L: Lattice) -> Lattice:
    return canonicalize(L.inverse_basis.transpose())


def meet(L: Lattice, M: Lattice) -> Lattice:
    _check(L, M)
    return dual(join(dual(L), dual(M)))


def _lines(n: int, p: int):
    """Projective points of F_p^n, normalized with leading nonzero coordinate 1."""
    for lead in range(n):
        for tail in product(range(p), repeat=n - lead - 1):
            yield lead, (0,) * lead + (1,) + tail


def neighbors(L: Lattice) -> list:
    """All lattices at distance 1: index-p sublattices and superlattices."""
    n, p = L.n, L.p
    out = []
    for lead, vec in _lines(n, p):
        # sublattice: kernel of the functional vec on L/pL
        cols = []
        for i in range(n):
            col = [0] * n
            if i == lead:
                col[i] = p
            else:
                col[i] = 1
                col[lead] = -vec[i]
            cols.append(col)
        out.append(canonicalize(L.basis @ PMatrix.from_columns(cols, p)))
        # superlattice: L + p^{-1} vec
        cols = []
        for i in range(n):
            if i == lead:
                cols.append([Fraction(x, p) for x in vec])
            else:
                cols.append([int(i == j) for j in range(n)])
        out.append(canonicalize(L.basis @ PMatrix.from_columns(cols, p)))
    return out


def ball(center: Lattice, r: int) -> list:
    """Lattices within distance r of center, sorted by (distance, canonical key)."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    return list(_ball(center, r))


@lru_cache(maxsize=64)
def _ball(center: Lattice, r: int) -> tuple:
    depth = {center: 0}
    frontier = deque([center])
    while frontier:
        L = frontier.popleft()
        d = depth[L]
        if d == r:
            continue
        for M in neighbors(L):
            if M not in depth:
                depth[M] = d + 1
                frontier.append(M)
    return tuple(sorted(depth, key=lambda L: (depth[L], L.sort_key)))


def sphere_size(n: int, p: int) -> int:
    """Number of lattices at distance exactly 1."""
    return 2 * (p**n - 1) // (p - 1)
