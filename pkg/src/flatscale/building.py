"""Bruhat-Tits tree of SL_2(Q_p) and the apartment model for monomial groups.

Everything here works at the level of the tree (homothety classes of rank-2
lattices) or of the apartment Z^n; no statement is made about indices of
compact open subgroups of SL_2(Q_p) itself.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations, product

from .autoscale import Automorphism
from .exactnum import PMatrix, val
from .flatgeom import FCVerdict, GenSet, conjugacy_growth
from .lattice import Lattice, canonicalize, rel_exponents

PROXY_NOTE = "verified on the Bruhat-Tits tree / apartment model, not in B(SL_2(Q_p))"


@dataclass(frozen=True)
class TreeVertex:
    """Homothety class of a rank-2 lattice; rep is scaled so its first diagonal exponent is 0."""

    rep: Lattice

    @classmethod
    def of(cls, L: Lattice) -> "TreeVertex":
        if L.n != 2:
            raise ValueError("tree vertices are classes of rank-2 lattices")
        k = L.diagonal_exponents()[0]
        return cls(L.scaled(-k) if k else L)

    @classmethod
    def standard(cls, p: int) -> "TreeVertex":
        return cls(Lattice.standard(2, p))

    @classmethod
    def apartment(cls, k: int, p: int) -> "TreeVertex":
        """Class of diag(p^k, 1) Z_p^2."""
        return cls.of(canonicalize(PMatrix.diag([Fraction(p) ** k, 1], p)))

    @property
    def p(self) -> int:
        return self.rep.p

    def on_apartment(self) -> bool:
        return self.rep.basis[0, 1] == 0

    def __lt__(self, other):
        return self.rep.sort_key < other.rep.sort_key

    def transform(self, g: PMatrix) -> "TreeVertex":
        return TreeVertex.of(self.rep.transform(g))

    def neighbors(self) -> list:
        p = self.p
        T = self.rep.basis
        # index-p sublattices pL + Z_p v, one per line v in L/pL
        colsets = [[[1, 0], [0, p]]] + [[[p, 0], [t, 1]] for t in range(p)]
        return [TreeVertex.of(canonicalize(T @ PMatrix.from_columns(c, p))) for c in colsets]


def tree_dist(v: TreeVertex, w: TreeVertex) -> int:
    d = rel_exponents(v.rep, w.rep)
    return max(d) - min(d)


def tree_ball(center: TreeVertex, r: int) -> dict:
    """Vertex -> distance from center, for all vertices within r."""
    depth = {center: 0}
    frontier = deque([center])
    while frontier:
        v = frontier.popleft()
        if depth[v] == r:
            continue
        for w in v.neighbors():
            if w not in depth:
                depth[w] = depth[v] + 1
                frontier.append(w)
    return depth


def _sorted(vs):
    return sorted(vs, key=lambda v: v.rep.sort_key)


@dataclass
class TranslationResult:
    length: int
    attaining: list
    apartment_attains: bool
    note: str = PROXY_NOTE


def tree_translation_length(g: PMatrix, radius: int) -> TranslationResult:
    """min over the radius-ball around the standard class of d(v, g v), with minimizers."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    best, attaining = None, []
    for v in tree_ball(TreeVertex.standard(g.p), radius):
        d = tree_dist(v, v.transform(g))
        if best is None or d < best:
            best, attaining = d, [v]
        elif d == best:
            attaining.append(v)
    attaining = _sorted(attaining)
    return TranslationResult(best, attaining, any(v.on_apartment() for v in attaining))


def tree_edges(verts) -> list:
    vs = set(verts)
    out = []
    for v in _sorted(vs):
        for w in v.neighbors():
            if w in vs and v < w:
                out.append((v, w))
    return out


def edge_displacement(g: PMatrix, v: TreeVertex, w: TreeVertex) -> int:
    gv, gw = v.transform(g), w.transform(g)
    return min(tree_dist(v, gv) + tree_dist(w, gw), tree_dist(v, gw) + tree_dist(w, gv))


@dataclass
class ChamberResult:
    minimum: int
    attaining: list  # edges (v, w)
    apartment_attains: bool
    note: str = PROXY_NOTE


def chamber_min_displacement(g: PMatrix, radius: int) -> ChamberResult:
    if radius < 1:
        raise ValueError("radius must be >= 1")
    best, attaining = None, []
    for v, w in tree_edges(tree_ball(TreeVertex.standard(g.p), radius)):
        d = edge_displacement(g, v, w)
        if best is None or d < best:
            best, attaining = d, [(v, w)]
        elif d == best:
            attaining.append((v, w))
    return ChamberResult(best, attaining,
                         any(v.on_apartment() and w.on_apartment() for v, w in attaining))


def tree_orbit_counts(gens: GenSet, depth: int, base: TreeVertex | None = None) -> list:
    """(radius, number of distinct vertices reached by words of length <= radius)."""
    base = base or TreeVertex.standard(gens.p)
    seen = {base: 0}
    frontier = [base]
    for d in range(1, depth + 1):
        nxt = []
        for v in frontier:
            for g in gens.elements.values():
                w = v.transform(g.matrix)
                if w not in seen:
                    seen[w] = d
                    nxt.append(w)
        frontier = nxt
    return [(r, sum(1 for x in seen.values() if x <= r)) for r in range(depth + 1)]


def tree_fc_membership(phi: Automorphism, gens: GenSet, depth: int,
                       base: TreeVertex | None = None) -> FCVerdict:
    """Conjugacy-class boundedness measured by displacement on the tree."""
    base = base or TreeVertex.standard(gens.p)
    return conjugacy_growth(phi, gens, depth, lambda g: tree_dist(base, base.transform(g.matrix)))


def tree_ball_dot(center: TreeVertex, r: int) -> str:
    depth = tree_ball(center, r)
    verts = _sorted(depth)
    index = {v: i for i, v in enumerate(verts)}
    lines = ["graph tree {"]
    for v in verts:
        label = str(v.rep.basis.to_strings()).replace("'", "")
        style = ', style=filled, fillcolor="lightblue"' if v.on_apartment() else ""
        lines.append(f'  v{index[v]} [label="{label}\\nd={depth[v]}"{style}];')
    for v, w in tree_edges(verts):
        style = ' [penwidth=3]' if v.on_apartment() and w.on_apartment() else ""
        lines.append(f"  v{index[v]} -- v{index[w]}{style};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# apartment model


def _perm_apply(perm: tuple, b) -> tuple:
    """sigma(b) with sigma(b)_{sigma(i)} = b_i."""
    out = [0] * len(b)
    for i, x in enumerate(b):
        out[perm[i]] = x
    return tuple(out)


def _perm_compose(s: tuple, t: tuple) -> tuple:
    return tuple(s[t[i]] for i in range(len(t)))


def _perm_inverse(s: tuple) -> tuple:
    out = [0] * len(s)
    for i, x in enumerate(s):
        out[x] = i
    return tuple(out)


@dataclass(frozen=True)
class MonomialElement:
    """x -> translation + perm(x) on the apartment Z^n."""

    translation: tuple
    perm: tuple

    @classmethod
    def identity(cls, n: int) -> "MonomialElement":
        return cls((0,) * n, tuple(range(n)))

    @classmethod
    def from_matrix(cls, M: PMatrix) -> "MonomialElement":
        """Valuation data of a monomial matrix; unit factors are forgotten."""
        n = M.nrows
        perm = []
        for i in range(n):
            nz = [j for j in range(n) if M[j, i] != 0]
            if len(nz) != 1:
                raise ValueError("matrix is not monomial")
            perm.append(nz[0])
        if sorted(perm) != list(range(n)):
            raise ValueError("matrix is not monomial")
        trans = [0] * n
        for i, j in enumerate(perm):
            trans[j] = val(M[j, i], M.p)
        return cls(tuple(trans), tuple(perm))

    @property
    def n(self) -> int:
        return len(self.translation)

    def __matmul__(self, other: "MonomialElement") -> "MonomialElement":
        moved = _perm_apply(self.perm, other.translation)
        return MonomialElement(tuple(a + b for a, b in zip(self.translation, moved)),
                               _perm_compose(self.perm, other.perm))

    def inv(self) -> "MonomialElement":
        pinv = _perm_inverse(self.perm)
        return MonomialElement(tuple(-x for x in _perm_apply(pinv, self.translation)), pinv)

    def __call__(self, x) -> tuple:
        return tuple(a + b for a, b in zip(self.translation, _perm_apply(self.perm, x)))

    def is_translation(self) -> bool:
        return self.perm == tuple(range(self.n))

    def to_matrix(self, p: int) -> PMatrix:
        n = self.n
        rows = [[0] * n for _ in range(n)]
        for i in range(n):
            j = self.perm[i]
            rows[j][i] = Fraction(p) ** self.translation[j]
        return PMatrix(rows, p)


def l1(x) -> int:
    return sum(abs(v) for v in x)


@dataclass
class MonomialVerdict:
    kind: str  # "bounded" or "escaping"
    displacement: int | None = None
    witnesses: list = field(default_factory=list)  # (k, displacement of origin)
    direction: tuple | None = None
    note: str = PROXY_NOTE


def monomial_bounded_class(m: MonomialElement, conj_depth: int) -> MonomialVerdict:
    if conj_depth < 1:
        raise ValueError("conj_depth must be >= 1")
    n = m.n
    origin = (0,) * n
    if m.is_translation():
        d = l1(m.translation)
        if n <= 3:
            # spot-check uniformity over a box of conjugators
            for b in product(range(-conj_depth, conj_depth + 1), repeat=n):
                for perm in permutations(range(n)):
                    c = MonomialElement(b, perm)
                    conj = c @ m @ c.inv()
                    assert l1(conj(origin)) == d
        return MonomialVerdict("bounded", d)
    i = next(i for i in range(n) if m.perm[i] != i)
    base = [0] * n
    base[i] += 1
    base[m.perm[i]] -= 1
    best = None
    for sign in (1, -1):
        v = tuple(sign * x for x in base)
        seq = []
        for k in range(1, conj_depth + 1):
            t = MonomialElement(tuple(k * x for x in v), tuple(range(n)))
            conj = t @ m @ t.inv()
            seq.append((k, l1(conj(origin))))
        if best is None or seq[-1][1] > best[1][-1][1]:
            best = (v, seq)
    v, seq = best
    return MonomialVerdict("escaping", None, seq, v)
