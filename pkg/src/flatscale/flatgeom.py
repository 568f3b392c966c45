"""Finitely generated groups of automorphisms: orbits, growth, flatness, roots.

Words are tuples of generator labels, applied right to left: the word
("a", "b") is the automorphism a o b.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np

from .autoscale import (
    Automorphism,
    displacement,
    scale_newton,
    tidy_for_cyclic,
)
from .exactnum import exact_rank, primitive_part, val
from .lattice import Lattice, ball, dist, join, meet


class InsufficientData(ValueError):
    pass


class NonDiagonalInput(ValueError):
    pass


class OrbitNotClosed(RuntimeError):
    pass


def inverse_label(label: str) -> str:
    return label[:-3] if label.endswith("^-1") else label + "^-1"


def word_str(word) -> str:
    return " ".join(word) if word else "e"


class GenSet:
    """Labelled generators, closed under inverses."""

    def __init__(self, generators: dict):
        if not generators:
            raise ValueError("empty generating set")
        self.base_labels = list(generators)
        self.elements: dict[str, Automorphism] = {}
        for label, g in generators.items():
            if label.endswith("^-1"):
                raise ValueError(f"label {label!r} is reserved for inverses")
            self.elements[label] = g
        for label, g in generators.items():
            self.elements[inverse_label(label)] = g.inv()
        first = next(iter(self.elements.values()))
        if any(g.n != first.n or g.p != first.p for g in self.elements.values()):
            raise ValueError("generators must share dimension and prime")

    @property
    def labels(self):
        return list(self.elements)

    @property
    def n(self) -> int:
        return next(iter(self.elements.values())).n

    @property
    def p(self) -> int:
        return next(iter(self.elements.values())).p

    def __getitem__(self, label):
        return self.elements[label]

    def evaluate(self, word) -> Automorphism:
        out = Automorphism.identity(self.n, self.p)
        for label in word:
            out = out @ self.elements[label]
        return out


def group_ball(gens: GenSet, depth: int) -> list:
    """Distinct group elements of word length <= depth as (shortest word, element), BFS order."""
    ident = Automorphism.identity(gens.n, gens.p)
    seen = {ident.matrix: ((), ident)}
    frontier = [((), ident)]
    for _ in range(depth):
        nxt = []
        for word, g in frontier:
            for label in gens.labels:
                if word and word[0] == inverse_label(label):
                    continue
                h = gens[label] @ g
                if h.matrix not in seen:
                    seen[h.matrix] = ((label,) + word, h)
                    nxt.append(seen[h.matrix])
        frontier = nxt
    return list(seen.values())


@dataclass
class OrbitGraph:
    base: Lattice
    vertices: dict  # Lattice -> (BFS depth, witness word)
    threshold: int
    depth: int

    @cached_property
    def edges(self) -> list:
        verts = self.sorted_vertices()
        return sorted(close_pairs(verts, self.threshold))

    def sorted_vertices(self) -> list:
        return sorted(self.vertices, key=lambda L: (self.vertices[L][0], L.sort_key))

    def counts_by_radius(self) -> list:
        hist = [0] * (self.depth + 1)
        for d, _ in self.vertices.values():
            hist[d] += 1
        return [(r, sum(hist[:r + 1])) for r in range(self.depth + 1)]

    def degree_fit(self):
        return growth_degree(self.counts_by_radius())

    def to_dot(self) -> str:
        verts = self.sorted_vertices()
        lines = ["graph orbit {"]
        for i, L in enumerate(verts):
            label = json.dumps(L.basis.to_strings()).replace('"', "")
            lines.append(f'  v{i} [label="{label}\\ndepth {self.vertices[L][0]}"];')
        for i, j, d in self.edges:
            lines.append(f'  v{i} -- v{j} [weight={d}, label="{d}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        verts = self.sorted_vertices()
        try:
            degree, residual = self.degree_fit()
            fit = {"degree": degree, "residual": round(residual, 6)}
        except InsufficientData:
            fit = None
        return {
            "vertices": [
                {"lattice": L.to_json(), "depth": self.vertices[L][0],
                 "word": word_str(self.vertices[L][1])} for L in verts],
            "edges": [{"u": i, "v": j, "units": d} for i, j, d in self.edges],
            "counts_by_radius": [[r, c] for r, c in self.counts_by_radius()],
            "threshold": self.threshold,
            "degree_fit": fit,
        }


def orbit_ball(gens: GenSet, base: Lattice, depth: int, threshold: int | None = None) -> OrbitGraph:
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if threshold is None:
        threshold = max(displacement(g, base) for g in gens.elements.values())
    vertices = {base: (0, ())}
    frontier = [base]
    for d in range(1, depth + 1):
        nxt = []
        for L in frontier:
            word = vertices[L][1]
            for label in gens.labels:
                M = gens[label](L)
                if M not in vertices:
                    vertices[M] = (d, (label,) + word)
                    nxt.append(M)
        frontier = nxt
    return OrbitGraph(base, vertices, threshold, depth)


def growth_degree(counts) -> tuple:
    """(degree, rms residual) from a log-log fit over the upper half of the radii."""
    counts = sorted((r, c) for r, c in counts if r > 0)
    if len(counts) < 4:
        raise InsufficientData("need at least 4 positive radii")
    if any(c2 < c1 for (_, c1), (_, c2) in zip(counts, counts[1:])):
        raise ValueError("counts must be nondecreasing")
    upper = counts[len(counts) // 2:]
    x = np.log([r for r, _ in upper])
    y = np.log([c for _, c in upper])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return int(round(slope)), float(np.sqrt(np.mean(resid**2)))


_PAIR_BUDGET = 20_000


def close_pairs(verts: list, radius: int) -> list:
    """(i, j, dist) for i < j with dist(verts[i], verts[j]) <= radius."""
    if len(verts) * (len(verts) - 1) // 2 <= _PAIR_BUDGET:
        out = []
        for (i, a), (j, b) in combinations(enumerate(verts), 2):
            d = dist(a, b)
            if d <= radius:
                out.append((i, j, d))
        return out
    # large sets: look up each vertex's ball instead of scanning all pairs
    index = {L: i for i, L in enumerate(verts)}
    out = []
    for i, L in enumerate(verts):
        for M in ball(L, radius):
            j = index.get(M)
            if j is not None and j > i:
                out.append((i, j, dist(L, M)))
    return out


def coarse_threshold(points) -> int:
    """Least d for which the set is d-connected: the largest edge of a minimum spanning tree."""
    pts = list(points)
    if len(pts) * (len(pts) - 1) // 2 > _PAIR_BUDGET:
        return coarse_threshold_local(pts)
    return coarse_threshold_prim(pts)


def coarse_threshold_local(points) -> int:
    """Same as coarse_threshold, growing d and joining each point to its d-ball."""
    pts = list(points)
    if not pts:
        raise ValueError("empty point set")
    index = {L: i for i, L in enumerate(pts)}
    d = 0
    while True:
        parent = list(range(len(pts)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        comps = len(pts)
        for i, L in enumerate(pts):
            for M in ball(L, d):
                j = index.get(M)
                if j is not None:
                    a, b = find(i), find(j)
                    if a != b:
                        parent[a] = b
                        comps -= 1
        if comps == 1:
            return d
        d += 1


def coarse_threshold_prim(points) -> int:
    pts = list(points)
    if not pts:
        raise ValueError("empty point set")
    best = {i: dist(pts[0], pts[i]) for i in range(1, len(pts))}
    out = 0
    while best:
        i = min(best, key=best.get)
        out = max(out, best.pop(i))
        for j in best:
            d = dist(pts[i], pts[j])
            if d < best[j]:
                best[j] = d
    return out


# flatness


@dataclass
class FlatnessReport:
    candidate: Lattice | None
    depth: int
    verified_words: int
    failures: list = field(default_factory=list)  # (word, displacement, scale sum)
    verdict: str = "inconclusive"
    reason: str = ""
    witness_word: tuple | None = None
    torsion_generators: dict = field(default_factory=dict)  # label -> order
    common_fixed_lattice: Lattice | None = None

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "depth": self.depth,
            "candidate": self.candidate.to_json() if self.candidate else None,
            "verified_words": self.verified_words,
            "failures": [{"word": word_str(w), "displacement": d, "scale_sum": s}
                         for w, d, s in self.failures],
            "reason": self.reason,
            "witness_word": word_str(self.witness_word) if self.witness_word is not None else None,
            "torsion_generators": self.torsion_generators,
            "common_fixed_lattice": (self.common_fixed_lattice.to_json()
                                     if self.common_fixed_lattice else None),
        }


def scale_sum(g: Automorphism) -> int:
    return scale_newton(g).exponent + scale_newton(g.inv()).exponent


def element_order(g: Automorphism, bound: int = 24) -> int | None:
    h = g
    for k in range(1, bound + 1):
        if h.is_identity():
            return k
        h = h @ g
    return None


def _candidates(gens: GenSet):
    tidy = []
    for label in gens.base_labels:
        O = tidy_for_cyclic(gens[label]).lattice
        if O not in tidy:
            tidy.append(O)
    out = list(tidy)
    for a, b in combinations(tidy, 2):
        for c in (meet(a, b), join(a, b)):
            if c not in out:
                out.append(c)
    std = Lattice.standard(gens.n, gens.p)
    if std not in out:
        out.append(std)
    return out


def _passes(O: Lattice, checks) -> int:
    """Number of leading checks passed at O."""
    for i, (_, g, s) in enumerate(checks):
        if displacement(g, O) != s:
            return i
    return len(checks)


def certify_flat(gens: GenSet, depth: int, search_radius: int = 2) -> FlatnessReport:
    """Look for a lattice minimizing every element of word length <= depth."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    elements = group_ball(gens, depth)
    checks = [(w, g, scale_sum(g)) for w, g in elements]
    std = Lattice.standard(gens.n, gens.p)

    best, best_score = None, -1
    candidates = _candidates(gens)
    seen = set(candidates)
    pool = iter(candidates)
    ball_added = False
    while True:
        O = next(pool, None)
        if O is None:
            if ball_added:
                break
            ball_added = True
            extra = [L for L in ball(std, search_radius) if L not in seen]
            pool = iter(extra)
            continue
        score = _passes(O, checks)
        if score == len(checks):
            return FlatnessReport(O, depth, len(checks), [], "certified-to-depth",
                                  f"all {len(checks)} elements of word length <= {depth} attain their scale")
        if score > best_score:
            best, best_score = O, score

    failures = [(w, displacement(g, best), s) for w, g, s in checks if displacement(g, best) != s]
    report = FlatnessReport(best, depth, best_score, failures)

    torsion = {}
    for label in gens.base_labels:
        k = element_order(gens[label])
        if k is not None:
            torsion[label] = k
    report.torsion_generators = torsion
    positive = next(((w, g) for w, g, s in checks if s > 0), None)
    if not torsion or positive is None:
        report.reason = "no candidate minimizes every element; no torsion obstruction found"
        return report

    word, g = positive
    report.witness_word = word
    exps = (scale_newton(g).exponent, scale_newton(g.inv()).exponent)
    common = None
    for L in ball(std, search_radius):
        if all(gens[label](L) == L for label in torsion):
            common = L
            break
    report.common_fixed_lattice = common
    if len(torsion) == len(gens.base_labels):
        report.verdict = "refuted-at-word"
        report.reason = (
            "every generator has finite order, so a minimizing lattice would be fixed by the "
            f"whole group; but {word_str(word)} has scale exponents {exps}")
    elif common is None:
        report.verdict = "refuted-at-word"
        report.reason = (
            f"finite-order generators {sorted(torsion)} fix no common lattice within radius "
            f"{search_radius}, while {word_str(word)} has scale exponents {exps}")
    else:
        report.reason = "no candidate minimizes every element; torsion generators share a fixed lattice"
    return report


# roots and norms of diagonal groups


@dataclass(frozen=True)
class RootData:
    roots: tuple  # ((rho, weight exponent), ...)
    kernel_rank: int
    rank: int

    def norm(self, w) -> int:
        """sum over roots of weight * |rho(w)|, in units of log p."""
        return sum(c * abs(sum(a * b for a, b in zip(rho, w))) for rho, c in self.roots)

    def to_json(self) -> dict:
        return {"roots": [{"functional": list(rho), "weight_exponent": c} for rho, c in self.roots],
                "rank": self.rank, "kernel_rank": self.kernel_rank}


def diagonal_exponent_matrix(gens: GenSet) -> list:
    """n x m matrix of p-adic valuations of the diagonal entries of the base generators."""
    cols = []
    for label in gens.base_labels:
        g = gens[label].matrix
        if not g.is_diagonal():
            raise NonDiagonalInput(f"generator {label} is not diagonal")
        cols.append([val(g[i, i], g.p) for i in range(g.nrows)])
    return [list(r) for r in zip(*cols)]


def diagonal_roots(exponent_matrix) -> RootData:
    rows = [list(map(int, r)) for r in exponent_matrix]
    m = len(rows[0]) if rows else 0
    weights: dict = {}
    for r in rows:
        pp = primitive_part(r)
        if pp is None:
            continue
        c, rho = pp
        weights[rho] = weights.get(rho, 0) + c
    rank = exact_rank(rows)
    roots = tuple(sorted(weights.items(), key=lambda kv: tuple(-x for x in kv[0])))
    return RootData(roots, m - rank, rank)


def scale_one_test(g: Automorphism) -> bool:
    return scale_newton(g).exponent == 0 and scale_newton(g.inv()).exponent == 0


# bounded conjugacy classes


@dataclass
class FCVerdict:
    kind: str  # "bounded-to-depth", "escaping" or "inconclusive"
    max_displacement: int
    witness_word: tuple | None = None
    witness_displacements: list = field(default_factory=list)  # (k, displacement)
    growth_rate: int | None = None

    def to_json(self) -> dict:
        return {"kind": self.kind, "max_displacement": self.max_displacement,
                "witness_word": word_str(self.witness_word) if self.witness_word is not None else None,
                "witness_displacements": [list(x) for x in self.witness_displacements],
                "growth_rate": self.growth_rate}


def fc_membership(phi: Automorphism, gens: GenSet, depth: int, base: Lattice | None = None) -> FCVerdict:
    """Classify the conjugacy class of phi under words of length <= depth at ``base``."""
    base = base or Lattice.standard(gens.n, gens.p)
    return conjugacy_growth(phi, gens, depth, lambda g: displacement(g, base))


def conjugacy_growth(phi: Automorphism, gens: GenSet, depth: int, measure) -> FCVerdict:
    """Shared classifier: ``measure(g)`` is the displacement of g at a fixed base point.

    "escaping" needs a witness psi whose powers conjugate phi with displacement
    growing at least linearly in the power; boundedness is reported only when
    the maximum over words of length <= depth is already reached at half depth.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    elements = group_ball(gens, depth)
    disp = {}
    half_max = 0
    for w, psi in elements:
        c = psi @ phi @ psi.inv()
        if c.matrix not in disp:
            disp[c.matrix] = measure(c)
        if len(w) <= math.ceil(depth / 2):
            half_max = max(half_max, disp[c.matrix])
    full_max = max(disp.values())

    best = None
    for w, psi in elements:
        if not w:
            continue
        K = depth // len(w)
        if K < 2:
            continue
        seq = []
        conj = phi
        for k in range(K + 1):
            seq.append((k, measure(conj)))
            conj = psi @ conj @ psi.inv()
        d0 = seq[0][1]
        rate = min((d - d0) // k for k, d in seq[1:])
        if rate > 0 and all(b[1] > a[1] for a, b in zip(seq, seq[1:])):
            if best is None or rate > best[0]:
                best = (rate, w, seq)
    if best is not None:
        rate, w, seq = best
        return FCVerdict("escaping", full_max, w, seq, rate)
    if full_max == half_max:
        return FCVerdict("bounded-to-depth", full_max)
    return FCVerdict("inconclusive", full_max)


def fixed_lattice_from_bounded_orbit(gens: GenSet, base: Lattice, budget: int) -> Lattice:
    """Meet of the whole orbit of ``base``; raises OrbitNotClosed past ``budget`` vertices."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    seen = {base}
    frontier = deque([base])
    while frontier:
        L = frontier.popleft()
        for g in gens.elements.values():
            M = g(L)
            if M not in seen:
                if len(seen) >= budget:
                    raise OrbitNotClosed(f"orbit exceeds {budget} lattices")
                seen.add(M)
                frontier.append(M)
    out = base
    for L in sorted(seen, key=lambda L: L.sort_key):
        out = meet(out, L)
    return out
