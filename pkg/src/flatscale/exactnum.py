"""Exact arithmetic over Z[1/p] and the localization Z_(p).

Matrix entries are kept as :class:`fractions.Fraction`.  Inputs and every
canonical lattice basis live in Z[1/p]; intermediate transforms over Z_(p)
(for instance dividing by the unit 3 when p = 2) need general rationals, and
the p-adic valuation is defined for all of them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from math import gcd
from typing import Iterable, Sequence


class SingularMatrix(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class ZeroConstantTerm(ValueError):
    pass


class EntryParseError(ValueError):
    pass


@total_ordering
class _Infinity:
    """Valuation of zero.  Compares above every integer; refuses arithmetic."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __eq__(self, other):
        return other is self

    def __lt__(self, other):
        return False

    def __gt__(self, other):
        return other is not self

    def __hash__(self):
        return hash("flatscale.INF")

    def _no_arith(self, *args):
        raise TypeError("arithmetic on the valuation of zero")

    __add__ = __radd__ = __sub__ = __rsub__ = __mul__ = __rmul__ = _no_arith
    __neg__ = _no_arith


INF = _Infinity()


def int_val(n: int, p: int) -> int:
    if n == 0:
        raise ValueError("valuation of 0")
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def val(x, p: int):
    """p-adic valuation of an int, Fraction or PScalar; INF for zero."""
    if isinstance(x, PScalar):
        return x.val()
    x = Fraction(x)
    if x == 0:
        return INF
    return int_val(x.numerator, p) - int_val(x.denominator, p)


def unit_part(x: Fraction, p: int) -> Fraction:
    return Fraction(x) / Fraction(p) ** val(x, p)


@dataclass(frozen=True)
class PScalar:
    """Element num * p**(-pexp) of Z[1/p], normalized so p does not divide num."""

    num: int
    pexp: int
    p: int

    def __post_init__(self):
        num, pexp = self.num, self.pexp
        if num == 0:
            pexp = 0
        else:
            while num % self.p == 0 and pexp > 0:
                num //= self.p
                pexp -= 1
            while num % self.p == 0:
                num //= self.p
                pexp -= 1
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "pexp", pexp)

    @classmethod
    def from_value(cls, x, p: int) -> "PScalar":
        x = Fraction(x)
        den = x.denominator
        k = 0
        while den % p == 0:
            den //= p
            k += 1
        if den != 1:
            raise EntryParseError(f"{x} is not in Z[1/{p}]")
        return cls(x.numerator, k, p)

    @property
    def value(self) -> Fraction:
        return Fraction(self.num) / Fraction(self.p) ** self.pexp

    def val(self):
        if self.num == 0:
            return INF
        return int_val(self.num, self.p) - self.pexp

    def _coerce(self, other) -> "PScalar":
        if isinstance(other, PScalar):
            if other.p != self.p:
                raise ValueError("mixing primes")
            return other
        return PScalar.from_value(other, self.p)

    def __add__(self, other):
        return PScalar.from_value(self.value + self._coerce(other).value, self.p)

    __radd__ = __add__

    def __sub__(self, other):
        return PScalar.from_value(self.value - self._coerce(other).value, self.p)

    def __rsub__(self, other):
        return PScalar.from_value(self._coerce(other).value - self.value, self.p)

    def __mul__(self, other):
        o = self._coerce(other)
        return PScalar(self.num * o.num, self.pexp + o.pexp, self.p)

    __rmul__ = __mul__

    def __neg__(self):
        return PScalar(-self.num, self.pexp, self.p)

    def __str__(self):
        return format_entry(self.value)


def format_entry(x) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


_INT = re.compile(r"^[+-]?\d+$")
_FRAC = re.compile(r"^([+-]?\d+)/(\d+)$")
_POW = re.compile(r"^(?:([+-]?\d+)\*|([+-]))?(p|\d+)(?:\^\(?([+-]?\d+)\)?)?$")
_OVER_P = re.compile(r"^([+-]?\d+)/p(?:\^\(?(\d+)\)?)?$")


def _is_p_power(n: int, p: int) -> bool:
    while n % p == 0:
        n //= p
    return n == 1


def parse_entry(text: str, p: int) -> Fraction:
    """Parse "a", "a/b" (b a power of p), "a/p^k", "a*p^k", "p^k" or "p" into an exact value."""
    s = text.strip().replace(" ", "")
    if _INT.match(s):
        return Fraction(int(s))
    m = _FRAC.match(s)
    if m:
        den = int(m.group(2))
        if den == 0 or not _is_p_power(den, p):
            raise EntryParseError(f"denominator of {text!r} is not a power of {p}")
        return Fraction(int(m.group(1)), den)
    m = _OVER_P.match(s)
    if m:
        return Fraction(int(m.group(1))) / Fraction(p) ** int(m.group(2) or 1)
    m = _POW.match(s)
    if m:
        coeff = 1
        if m.group(1) is not None:
            coeff = int(m.group(1))
        elif m.group(2) == "-":
            coeff = -1
        base, exp = m.group(3), m.group(4)
        if exp is None and base != "p":
            raise EntryParseError(f"cannot parse matrix entry {text!r}")
        if base != "p" and int(base) != p:
            raise EntryParseError(f"power base in {text!r} must be p={p}")
        return coeff * Fraction(p) ** int(exp or 1)
    raise EntryParseError(f"cannot parse matrix entry {text!r}")


class PMatrix:
    """Immutable matrix with Fraction entries, tagged with the prime p."""

    __slots__ = ("rows", "p", "_hash")

    def __init__(self, rows: Iterable[Iterable], p: int):
        rows = tuple(tuple(Fraction(x) for x in r) for r in rows)
        if not rows or not rows[0]:
            raise ValueError("empty matrix")
        if any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("ragged matrix")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, key, value):
        raise AttributeError("PMatrix is immutable")

    @classmethod
    def identity(cls, n: int, p: int) -> "PMatrix":
        return cls([[int(i == j) for j in range(n)] for i in range(n)], p)

    @classmethod
    def diag(cls, entries: Sequence, p: int) -> "PMatrix":
        n = len(entries)
        return cls([[entries[i] if i == j else 0 for j in range(n)] for i in range(n)], p)

    @classmethod
    def from_columns(cls, cols: Sequence[Sequence], p: int) -> "PMatrix":
        return cls(list(zip(*cols)), p)

    @property
    def nrows(self) -> int:
        return len(self.rows)

    @property
    def ncols(self) -> int:
        return len(self.rows[0])

    @property
    def shape(self):
        return self.nrows, self.ncols

    def columns(self):
        return [list(c) for c in zip(*self.rows)]

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def __eq__(self, other):
        return isinstance(other, PMatrix) and self.p == other.p and self.rows == other.rows

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(self, "_hash", hash((self.p, self.rows)))
        return self._hash

    def __repr__(self):
        body = ",".join("[" + ",".join(format_entry(x) for x in r) + "]" for r in self.rows)
        return f"PMatrix([{body}], p={self.p})"

    def to_strings(self):
        return [[format_entry(x) for x in r] for r in self.rows]

    def __matmul__(self, other: "PMatrix") -> "PMatrix":
        if self.ncols != other.nrows:
            raise DimensionMismatch(f"{self.shape} @ {other.shape}")
        cols = list(zip(*other.rows))
        return PMatrix([[sum(a * b for a, b in zip(r, c)) for c in cols] for r in self.rows], self.p)

    def __neg__(self):
        return PMatrix([[-x for x in r] for r in self.rows], self.p)

    def scale(self, c) -> "PMatrix":
        c = Fraction(c)
        return PMatrix([[c * x for x in r] for r in self.rows], self.p)

    def transpose(self) -> "PMatrix":
        return PMatrix(list(zip(*self.rows)), self.p)

    def is_diagonal(self) -> bool:
        return all(x == 0 for i, r in enumerate(self.rows) for j, x in enumerate(r) if i != j)

    def det(self) -> Fraction:
        if self.nrows != self.ncols:
            raise DimensionMismatch("determinant of a non-square matrix")
        a = [list(r) for r in self.rows]
        n = len(a)
        det = Fraction(1)
        for c in range(n):
            piv = next((r for r in range(c, n) if a[r][c] != 0), None)
            if piv is None:
                return Fraction(0)
            if piv != c:
                a[c], a[piv] = a[piv], a[c]
                det = -det
            det *= a[c][c]
            for r in range(c + 1, n):
                if a[r][c]:
                    f = a[r][c] / a[c][c]
                    a[r] = [x - f * y for x, y in zip(a[r], a[c])]
        return det

    def inverse(self) -> "PMatrix":
        n = self.nrows
        if n != self.ncols:
            raise DimensionMismatch("inverse of a non-square matrix")
        a = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(self.rows)]
        for c in range(n):
            piv = next((r for r in range(c, n) if a[r][c] != 0), None)
            if piv is None:
                raise SingularMatrix("matrix is not invertible")
            a[c], a[piv] = a[piv], a[c]
            inv = 1 / a[c][c]
            a[c] = [x * inv for x in a[c]]
            for r in range(n):
                if r != c and a[r][c]:
                    f = a[r][c]
                    a[r] = [x - f * y for x, y in zip(a[r], a[c])]
        return PMatrix([r[n:] for r in a], self.p)

    def __pow__(self, k: int) -> "PMatrix":
        base = self if k >= 0 else self.inverse()
        k = abs(k)
        out = PMatrix.identity(self.nrows, self.p)
        while k:
            if k & 1:
                out = out @ base
            base = base @ base
            k >>= 1
        return out

    def min_val(self):
        return min(val(x, self.p) for r in self.rows for x in r)


def parse_matrix(text: str, p: int, n: int | None = None) -> PMatrix:
    """Parse "[[a,b],[c,d]]", "diag(a,b,...)" or "I" (needs n)."""
    s = text.strip().replace(" ", "")
    if s in ("I", "id", "identity"):
        if n is None:
            raise EntryParseError("identity needs a dimension")
        return PMatrix.identity(n, p)
    m = re.match(r"^diag\((.*)\)$", s)
    if m:
        return PMatrix.diag([parse_entry(e, p) for e in m.group(1).split(",")], p)
    if s.startswith("[[") and s.endswith("]]"):
        rows = [r for r in re.split(r"\],\[", s[2:-2])]
        return PMatrix([[parse_entry(e, p) for e in r.split(",")] for r in rows], p)
    raise EntryParseError(f"cannot parse matrix {text!r}")


def _reduce_mod(t: Fraction, a: int, p: int) -> Fraction:
    """Representative m/p^k of t + p^a Z_(p) with 0 <= m < p^(a+k), p not dividing m unless k = 0."""
    if t == 0:
        return Fraction(0)
    v = val(t, p)
    if v >= a:
        return Fraction(0)
    k = max(0, -v)
    mod = p ** (a + k)
    s = t * Fraction(p) ** k
    m = (s.numerator * pow(s.denominator, -1, mod)) % mod
    return Fraction(m, p**k)


def column_echelon(cols: Sequence[Sequence[Fraction]], p: int, track: bool = False):
    """Canonical upper-triangular basis of the Z_p-span of full-rank columns.

    Returns the list of basis columns, and (if ``track``) the transform U with
    basis = cols * U.  Only valid for n x n input when tracking.
    """
    cols = [[Fraction(x) for x in c] for c in cols]
    n = len(cols[0])
    m = len(cols)
    u = [[Fraction(int(i == j)) for i in range(m)] for j in range(m)] if track else None

    def axpy(j, k, f):
        # col_j -= f * col_k
        cols[j] = [x - f * y for x, y in zip(cols[j], cols[k])]
        if track:
            u[j] = [x - f * y for x, y in zip(u[j], u[k])]

    active = list(range(m))
    pivots = [None] * n
    diag = [0] * n
    for i in range(n - 1, -1, -1):
        best, bv = None, INF
        for j in active:
            if cols[j][i] != 0:
                v = val(cols[j][i], p)
                if v < bv:
                    best, bv = j, v
        if best is None:
            raise SingularMatrix("columns do not span a full-rank lattice")
        unit = cols[best][i] / Fraction(p) ** bv
        cols[best] = [x / unit for x in cols[best]]
        if track:
            u[best] = [x / unit for x in u[best]]
        for j in active:
            if j != best and cols[j][i] != 0:
                axpy(j, best, cols[j][i] / cols[best][i])
        active.remove(best)
        pivots[i] = best
        diag[i] = bv
    for j in range(n):
        for i in range(j - 1, -1, -1):
            t = cols[pivots[j]][i]
            r = _reduce_mod(t, diag[i], p)
            if r != t:
                axpy(pivots[j], pivots[i], (t - r) / Fraction(p) ** diag[i])
    basis = [cols[pivots[j]] for j in range(n)]
    if not track:
        return basis
    umat = [u[pivots[j]] for j in range(n)]
    return basis, umat


def echelon_localized(M: PMatrix):
    """(T, U) with T = M U, U in GL_n(Z_(p)), T the canonical upper-triangular form."""
    if M.nrows != M.ncols:
        raise DimensionMismatch("echelon_localized expects a square matrix")
    if M.det() == 0:
        raise SingularMatrix("matrix is not invertible")
    basis, umat = column_echelon(M.columns(), M.p, track=True)
    return PMatrix.from_columns(basis, M.p), PMatrix.from_columns(umat, M.p)


def smith_exponents(M: PMatrix) -> tuple:
    """Elementary-divisor exponents over Z_(p), sorted descending."""
    if M.nrows != M.ncols:
        raise DimensionMismatch("smith_exponents expects a square matrix")
    p = M.p
    a = [list(r) for r in M.rows]
    n = len(a)
    out = []
    for k in range(n):
        best, bv = None, INF
        for i in range(k, n):
            for j in range(k, n):
                if a[i][j] != 0:
                    v = val(a[i][j], p)
                    if v < bv:
                        best, bv = (i, j), v
        if best is None:
            raise SingularMatrix("matrix is not invertible")
        i, j = best
        a[k], a[i] = a[i], a[k]
        for r in a:
            r[k], r[j] = r[j], r[k]
        piv = a[k][k]
        for i in range(k + 1, n):
            if a[i][k] != 0:
                f = a[i][k] / piv
                a[i] = [x - f * y for x, y in zip(a[i], a[k])]
        for j in range(k + 1, n):
            a[k][j] = Fraction(0)
        out.append(bv)
    return tuple(sorted(out, reverse=True))


def charpoly(M: PMatrix) -> list:
    """Coefficients c_0..c_n (ascending) of det(x I - M), via Faddeev-LeVerrier."""
    n = M.nrows
    coeffs = [Fraction(0)] * (n + 1)
    coeffs[n] = Fraction(1)
    Mk = PMatrix([[0] * n for _ in range(n)], M.p)
    c = Fraction(1)
    for k in range(1, n + 1):
        Mk = M @ PMatrix([[Mk[i, j] + (c if i == j else 0) for j in range(n)] for i in range(n)], M.p)
        c = -sum(Mk[i, i] for i in range(n)) / k
        coeffs[n - k] = c
    return coeffs


def newton_slopes(coeffs: Sequence, p: int) -> list:
    """Root valuations with multiplicities of a monic polynomial (ascending coefficients).

    Root valuation is minus the slope of the lower convex hull; entries are
    listed by increasing hull slope, i.e. decreasing root valuation.
    """
    coeffs = [c.value if isinstance(c, PScalar) else Fraction(c) for c in coeffs]
    if coeffs[0] == 0:
        raise ZeroConstantTerm("constant coefficient is zero")
    if coeffs[-1] != 1:
        raise ValueError("polynomial must be monic")
    pts = [(i, val(c, p)) for i, c in enumerate(coeffs) if c != 0]
    hull: list = []
    for pt in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop hull[-1] if it lies on or above segment hull[-2] -> pt
            if (y2 - y1) * (pt[0] - x1) >= (pt[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(pt)
    out = []
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        out.append((-Fraction(y2 - y1, x2 - x1), x2 - x1))
    return out


def exact_rank(rows: Sequence[Sequence]) -> int:
    a = [[Fraction(x) for x in r] for r in rows]
    if not a:
        return 0
    rank, ncols = 0, len(a[0])
    for c in range(ncols):
        piv = next((r for r in range(rank, len(a)) if a[r][c] != 0), None)
        if piv is None:
            continue
        a[rank], a[piv] = a[piv], a[rank]
        for r in range(len(a)):
            if r != rank and a[r][c] != 0:
                f = a[r][c] / a[rank][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[rank])]
        rank += 1
    return rank


def primitive_part(vec: Sequence[int]):
    """(c, rho) with vec = c * rho, c > 0 and rho primitive; None for the zero vector."""
    g = 0
    for x in vec:
        g = gcd(g, int(x))
    if g == 0:
        return None
    return g, tuple(int(x) // g for x in vec)
