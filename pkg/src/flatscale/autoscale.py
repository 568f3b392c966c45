"""Scale, displacement and minimizing lattices for single automorphisms of Q_p^n."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from . import _oracle
from .exactnum import PMatrix, charpoly, newton_slopes, parse_matrix, val
from .lattice import Lattice, ball, dist, index_exp, join, meet


@dataclass(frozen=True)
class Automorphism:
    matrix: PMatrix
    inverse: PMatrix = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "inverse", self.matrix.inverse())

    @classmethod
    def parse(cls, text: str, p: int, n: int | None = None) -> "Automorphism":
        return cls(parse_matrix(text, p, n))

    @classmethod
    def identity(cls, n: int, p: int) -> "Automorphism":
        return cls(PMatrix.identity(n, p))

    @property
    def n(self) -> int:
        return self.matrix.nrows

    @property
    def p(self) -> int:
        return self.matrix.p

    def inv(self) -> "Automorphism":
        return Automorphism(self.inverse)

    def __matmul__(self, other: "Automorphism") -> "Automorphism":
        return Automorphism(self.matrix @ other.matrix)

    def __pow__(self, k: int) -> "Automorphism":
        return Automorphism(self.matrix ** k)

    def __call__(self, L: Lattice) -> Lattice:
        return L.transform(self.matrix)

    def is_identity(self) -> bool:
        return self.matrix == PMatrix.identity(self.n, self.p)

    def det_val(self) -> int:
        return val(self.matrix.det(), self.p)


@dataclass(frozen=True)
class ScaleValue:
    exponent: int
    witness: Lattice | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.exponent < 0:
            raise ValueError("scale exponent must be non-negative")


@dataclass(frozen=True)
class TidyCertificate:
    lattice: Lattice
    fwd_index_exp: int
    bwd_index_exp: int
    scale_fwd: ScaleValue
    scale_bwd: ScaleValue
    steps: int

    @property
    def certified(self) -> bool:
        return (self.fwd_index_exp == self.scale_fwd.exponent
                and self.bwd_index_exp == self.scale_bwd.exponent)


def forward_index(g: Automorphism, L: Lattice) -> int:
    """Exponent of [gL : gL meet L]."""
    return index_exp(g(L), L)


def displacement(g: Automorphism, L: Lattice) -> int:
    return dist(L, g(L))


@lru_cache(maxsize=4096)
def _newton_exponent(matrix: PMatrix) -> int:
    total = Fraction(0)
    for v, mult in newton_slopes(charpoly(matrix), matrix.p):
        if v < 0:
            total += -v * mult
    # conjugate roots share a valuation, so the sum must be integral
    assert total.denominator == 1, f"non-integral scale exponent {total}"
    return int(total)


def scale_newton(g: Automorphism) -> ScaleValue:
    """Scale from the Newton polygon: product of |lambda|_p over expanding eigenvalues."""
    return ScaleValue(_newton_exponent(g.matrix))


def scale_bruteforce(g: Automorphism, radius: int, fast: bool = True) -> ScaleValue:
    """min over L in ball(standard, radius) of the exponent of [gL : gL meet L].

    The search stops early once the determinant bound -val(det g) is met.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    floor = max(0, -g.det_val())
    if fast and g.n <= _oracle.MAX_FAST_DIM:
        best, witness = _oracle.min_forward_index(g.matrix, radius, floor)
        return ScaleValue(best, witness)
    best, witness = None, None
    for L in ball(Lattice.standard(g.n, g.p), radius):
        f = forward_index(g, L)
        if best is None or f < best:
            best, witness = f, L
            if best <= floor:
                break
    return ScaleValue(best, witness)


def is_minimizing(g: Automorphism, L: Lattice) -> bool:
    return (forward_index(g, L) == scale_newton(g).exponent
            and forward_index(g.inv(), L) == scale_newton(g.inv()).exponent)


def default_max_steps(g: Automorphism) -> int:
    vals = [val(c, g.p) for c in charpoly(g.matrix)]
    spread = max((abs(v) for v in vals if isinstance(v, int)), default=0)
    return g.n * (1 + spread)


def tidy_for_cyclic(g: Automorphism, max_steps: int | None = None,
                    base: Lattice | None = None) -> TidyCertificate:
    """Join of forward and backward partial intersections of the orbit of ``base``.

    Returns the first certified candidate, or the last one tried (uncertified).
    """
    if max_steps is None:
        max_steps = default_max_steps(g)
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    base = base or Lattice.standard(g.n, g.p)
    ginv = g.inv()
    s_fwd, s_bwd = scale_newton(g), scale_newton(ginv)
    fwd_meet, bwd_meet = base, base
    fwd_img, bwd_img = base, base
    cert = None
    for m in range(1, max_steps + 1):
        fwd_img, bwd_img = g(fwd_img), ginv(bwd_img)
        fwd_meet, bwd_meet = meet(fwd_meet, fwd_img), meet(bwd_meet, bwd_img)
        O = join(fwd_meet, bwd_meet)
        cert = TidyCertificate(O, forward_index(g, O), forward_index(ginv, O), s_fwd, s_bwd, m)
        if cert.certified:
            break
    return cert
