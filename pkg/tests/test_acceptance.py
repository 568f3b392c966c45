"""Acceptance gate: one PASS/FAIL line per criterion."""

import random
import time
from fractions import Fraction
from itertools import product

import pytest

from flatscale.autoscale import Automorphism, displacement, scale_bruteforce, scale_newton
from flatscale.building import (
    MonomialElement,
    TreeVertex,
    chamber_min_displacement,
    monomial_bounded_class,
    tree_orbit_counts,
    tree_translation_length,
)
from flatscale.exactnum import PMatrix
from flatscale.flatgeom import (
    GenSet,
    certify_flat,
    coarse_threshold,
    diagonal_exponent_matrix,
    diagonal_roots,
    fc_membership,
    growth_degree,
    orbit_ball,
)
from flatscale.lattice import Lattice, ball, dist
from flatscale.sampling import random_invertible, random_lattice

from conftest import ACCEPTANCE_LINES


def report(number, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def dihedral(p):
    s1 = Automorphism(PMatrix([[0, -1], [1, 0]], p))
    s2 = Automorphism(PMatrix([[0, -Fraction(1, p)], [p, 0]], p))
    return GenSet({"s1": s1, "s2": s2})


def test_criterion_1_dihedral_example():
    start = time.perf_counter()
    problems = []
    for p in (2, 5):
        G = dihedral(p)
        std = Lattice.standard(2, p)
        # (a) orbit growth and coarse connectivity
        O = orbit_ball(G, std, 8)
        degree, _ = O.degree_fit()
        ct = coarse_threshold(O.sorted_vertices())
        if (degree, ct) != (1, 2):
            problems.append(f"p={p}: degree {degree}, coarse threshold {ct}")
        # (b) refutation of flatness
        rep = certify_flat(G, 8, search_radius=4)
        u = G.evaluate(("s1^-1", "s2"))
        if rep.verdict != "refuted-at-word" or rep.common_fixed_lattice is not None:
            problems.append(f"p={p}: flat verdict {rep.verdict}")
        if set(rep.torsion_generators) != {"s1", "s2"} or scale_newton(u).exponent != 1:
            problems.append(f"p={p}: torsion/scale data wrong")
        # (c) the cyclic subgroup <u>
        U = GenSet({"u": u})
        rep = certify_flat(U, 8, search_radius=4)
        roots = diagonal_roots(diagonal_exponent_matrix(U))
        U_degree, _ = orbit_ball(U, std, 8).degree_fit()
        norms_ok = all(displacement(u ** k, std) == 2 * abs(k) == roots.norm((k,)) for k in range(-8, 9))
        if rep.verdict != "certified-to-depth" or rep.candidate != std or roots.rank != 1 or U_degree != 1 \
                or not norms_ok:
            problems.append(f"p={p}: <u> not certified with rank 1 and norm 2|k|")
        # (d) conjugacy class of s1
        v = fc_membership(G["s1"], G, 6)
        direct = [displacement(u ** k @ G["s1"] @ u ** -k, std) for k in range(-4, 5)]
        if v.kind != "escaping" or direct != [4 * abs(k) for k in range(-4, 5)] \
                or any(d != 4 * k for k, d in v.witness_displacements):
            problems.append(f"p={p}: fc(s1) = {v.kind}, {v.witness_displacements}")
    elapsed = time.perf_counter() - start
    if elapsed >= 30:
        problems.append(f"runtime {elapsed:.1f}s")
    report(1, "dihedral example reproduction, p in {2, 5}", not problems,
           "; ".join(problems) or f"{elapsed:.1f}s")


def test_criterion_2_scale_oracle_agreement():
    start = time.perf_counter()
    rng = random.Random(20240601)
    disagreements, total = [], 0
    for n, p in product((2, 3), (2, 3, 5)):
        for _ in range(50):
            g = Automorphism(random_invertible(rng, n, p))
            a, b = scale_newton(g).exponent, scale_bruteforce(g, 4).exponent
            total += 1
            if a != b:
                disagreements.append((n, p, g.matrix.to_strings(), a, b))
    elapsed = time.perf_counter() - start
    ok = not disagreements and elapsed < 120
    report(2, "scale_newton == scale_bruteforce(radius 4)", ok,
           f"{total} instances, {len(disagreements)} disagreements, {elapsed:.1f}s")


def _words(labels, max_len):
    for k in range(max_len + 1):
        yield from product(labels, repeat=k)


def test_criterion_3_norm_identity_and_rank():
    rng = random.Random(7)
    failures, words_checked = [], 0
    for trial in range(20):
        p = rng.choice([2, 3, 5])
        n = rng.randint(1, 4)
        m = rng.randint(1, 3)
        cols = [[rng.randint(-3, 3) for _ in range(n)] for _ in range(m)]
        G = GenSet({f"g{j}": Automorphism(PMatrix.diag([Fraction(p) ** e for e in c], p), )
                    for j, c in enumerate(cols)})
        roots = diagonal_roots(diagonal_exponent_matrix(G))
        std = Lattice.standard(n, p)
        index = {lab: j for j, lab in enumerate(G.base_labels)}
        for word in _words(G.labels, 4):
            w = [0] * m
            for lab in word:
                base = lab[:-3] if lab.endswith("^-1") else lab
                w[index[base]] += -1 if lab.endswith("^-1") else 1
            words_checked += 1
            if displacement(G.evaluate(word), std) != roots.norm(w):
                failures.append((trial, word))
        # depth 16 so that short relations among rank-deficient generators are visible
        degree, _ = growth_degree(orbit_ball(G, std, 16).counts_by_radius())
        if degree != roots.rank:
            failures.append((trial, f"degree {degree} != rank {roots.rank}"))
    report(3, "norm identity and growth degree == rank on 20 diagonal scenarios", not failures,
           f"{words_checked} words, {len(failures)} failures")


def test_criterion_4_property_suites():
    rng = random.Random(4)
    bad = {"metric": 0, "isometry": 0, "orbit-QI": 0, "subadditivity": 0}

    def dims():
        return rng.choice([2, 2, 3]), rng.choice([2, 3, 5])

    for _ in range(200):
        n, p = dims()
        L, M, N = (random_lattice(rng, n, p) for _ in range(3))
        if not (dist(L, M) == dist(M, L) and (dist(L, M) == 0) == (L == M)
                and dist(L, N) <= dist(L, M) + dist(M, N)):
            bad["metric"] += 1
    for _ in range(200):
        n, p = dims()
        g, L, M = random_invertible(rng, n, p), random_lattice(rng, n, p), random_lattice(rng, n, p)
        if dist(L.transform(g), M.transform(g)) != dist(L, M):
            bad["isometry"] += 1
    for _ in range(200):
        n, p = dims()
        phi, psi = random_invertible(rng, n, p), random_invertible(rng, n, p)
        O, O2 = random_lattice(rng, n, p, 1), random_lattice(rng, n, p, 1)
        lhs = abs(dist(O.transform(phi), O.transform(psi)) - dist(O2.transform(phi), O2.transform(psi)))
        if lhs > 2 * dist(O, O2):
            bad["orbit-QI"] += 1
    for _ in range(200):
        n, p = dims()
        a, b = Automorphism(random_invertible(rng, n, p)), Automorphism(random_invertible(rng, n, p))
        O = random_lattice(rng, n, p, 1)
        if displacement(a @ b, O) > displacement(a, O) + displacement(b, O):
            bad["subadditivity"] += 1
    report(4, "metric / isometry / orbit bound / subadditivity, 200 samples each", not any(bad.values()),
           ", ".join(f"{k} {v}" for k, v in bad.items()))


def test_criterion_5_tree_proxy():
    start = time.perf_counter()
    p, r = 2, 4
    problems = []
    t = PMatrix.diag([p, Fraction(1, p)], p)
    tl = tree_translation_length(t, r)
    if tl.length != 2 or not tl.apartment_attains:
        problems.append(f"translation length {tl.length}")
    ch = chamber_min_displacement(t, r)
    if not ch.apartment_attains:
        problems.append("chamber minimum not attained on the apartment")
    N = GenSet({"a": Automorphism.parse("diag(2,1)", p), "b": Automorphism.parse("diag(1,2)", p),
                "w": Automorphism.parse("[[0,1],[1,0]]", p)})
    degree, _ = growth_degree(tree_orbit_counts(N, 8))
    if degree != 1:
        problems.append(f"N-orbit degree {degree}")
    a, b, w = (MonomialElement.from_matrix(N[x].matrix) for x in "abw")
    samples = [MonomialElement.identity(2), a, b, a @ b.inv(), w, a @ w, b @ w, a @ b.inv() @ w]
    assert len(set(samples)) == 8
    for m in samples:
        v = monomial_bounded_class(m, 6)
        if (v.kind == "bounded") != m.is_translation():
            problems.append(f"{m}: {v.kind}")
        if v.kind == "escaping" and any(d < 4 * k for k, d in v.witnesses):
            problems.append(f"{m}: slow witness {v.witnesses}")
    elapsed = time.perf_counter() - start
    if elapsed >= 30:
        problems.append(f"runtime {elapsed:.1f}s")
    report(5, "tree / apartment proxy at p = 2, radius 4", not problems,
           "; ".join(problems) or f"{elapsed:.1f}s")


def test_criterion_6_ball_sizes():
    sizes = {}
    centers = {}
    ok = True
    for p in (2, 3):
        others = [Lattice.standard(2, p), random_lattice(random.Random(p), 2, p),
                  Lattice.standard(2, p).transform(PMatrix([[p, 1], [0, Fraction(1, p)]], p))]
        for r in range(4):
            counts = {len(ball(c, r)) for c in others}
            centers[(p, r)] = counts
            sizes[(p, r)] = counts.pop() if len(counts) == 1 else None
            ok &= sizes[(p, r)] is not None
    ok &= sizes[(2, 1)] == 7 and sizes[(3, 1)] == 9
    report(6, "finite, center-independent balls for n = 2", ok,
           ", ".join(f"p={p} r={r}: {s}" for (p, r), s in sorted(sizes.items())))
