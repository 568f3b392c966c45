import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from flatscale.autoscale import Automorphism, displacement, scale_newton
from flatscale.exactnum import PMatrix
from flatscale.flatgeom import (
    GenSet,
    InsufficientData,
    NonDiagonalInput,
    OrbitNotClosed,
    certify_flat,
    close_pairs,
    coarse_threshold,
    coarse_threshold_local,
    coarse_threshold_prim,
    diagonal_exponent_matrix,
    diagonal_roots,
    element_order,
    fc_membership,
    fixed_lattice_from_bounded_orbit,
    group_ball,
    growth_degree,
    orbit_ball,
    scale_one_test,
    word_str,
)
from flatscale.lattice import Lattice, ball, canonicalize, dist

from conftest import invertibles, lattices


def dihedral(p):
    s1 = Automorphism.parse("[[0,-1],[1,0]]", p)
    s2 = Automorphism(PMatrix([[0, -Fraction(1, p)], [p, 0]], p))
    return GenSet({"s1": s1, "s2": s2})


def u_of(p):
    return Automorphism.parse(f"diag({p},1/{p})", p)


def test_genset():
    G = dihedral(2)
    assert G.labels == ["s1", "s2", "s1^-1", "s2^-1"]
    assert G.evaluate(("s1^-1", "s2")) == u_of(2)
    assert G.evaluate(()).is_identity()
    with pytest.raises(ValueError):
        GenSet({})
    with pytest.raises(ValueError):
        GenSet({"a^-1": u_of(2)})
    assert word_str(()) == "e"


def test_group_ball_dedups():
    G = dihedral(2)
    elems = group_ball(G, 3)
    assert len({g.matrix for _, g in elems}) == len(elems)
    assert elems[0][0] == ()


def test_orbit_examples():
    p = 2
    std = Lattice.standard(2, p)
    assert len(orbit_ball(GenSet({"u": u_of(p)}), std, 0).vertices) == 1
    O = orbit_ball(GenSet({"u": u_of(p)}), std, 3)
    assert O.threshold == 2
    assert sorted(dist(std, L) for L in O.vertices) == [0, 2, 2, 4, 4, 6, 6]
    H = orbit_ball(dihedral(p), std, 4)
    U = {(u_of(p) ** k)(std) for k in range(-2, 3)}
    assert set(H.vertices) == U


def test_orbit_graph_exports():
    O = orbit_ball(GenSet({"u": u_of(3)}), Lattice.standard(2, 3), 3)
    data = O.to_json()
    assert data["counts_by_radius"] == [[0, 1], [1, 3], [2, 5], [3, 7]]
    assert len(data["edges"]) == 6
    assert O.to_dot().startswith("graph orbit {")


def test_growth_degree_examples():
    assert growth_degree([(r, 2 * r + 1) for r in range(1, 9)])[0] == 1
    assert growth_degree([(r, 2 * r * r + 2 * r + 1) for r in range(1, 9)])[0] == 2
    assert growth_degree([(r, 7) for r in range(1, 9)])[0] == 0
    with pytest.raises(InsufficientData):
        growth_degree([(1, 3), (2, 5), (3, 7)])
    with pytest.raises(ValueError):
        growth_degree([(1, 3), (2, 5), (3, 4), (4, 9)])


def test_torus_orbit_growth_degree_two():
    p = 2
    T = GenSet({"a": Automorphism.parse("diag(2,1)", p), "b": Automorphism.parse("diag(1,2)", p)})
    O = orbit_ball(T, Lattice.standard(2, p), 8)
    assert O.counts_by_radius()[1:] == [(r, 2 * r * r + 2 * r + 1) for r in range(1, 9)]
    assert O.degree_fit()[0] == 2


def test_coarse_threshold_examples():
    p = 2
    std = Lattice.standard(2, p)
    assert coarse_threshold([std]) == 0
    pts = [(u_of(p) ** k)(std) for k in range(-3, 4)]
    assert coarse_threshold(pts) == 2
    assert coarse_threshold([std, canonicalize(PMatrix.diag([16, 1], p))]) == 4


NEAR = ball(Lattice.standard(2, 2), 1)


@settings(max_examples=25)
@given(st.lists(st.sampled_from(NEAR), min_size=1, max_size=6, unique=True))
def test_coarse_threshold_routes_agree(pts):
    assert coarse_threshold_prim(pts) == coarse_threshold_local(pts)


def test_coarse_threshold_routes_agree_on_orbit():
    T = GenSet({"a": Automorphism.parse("diag(2,1,1)", 2), "b": Automorphism.parse("diag(1,1/2,2)", 2)})
    pts = list(orbit_ball(T, Lattice.standard(3, 2), 3).vertices)
    assert coarse_threshold_prim(pts) == coarse_threshold_local(pts) == 2


def test_close_pairs_routes_agree(monkeypatch):
    from flatscale import flatgeom
    O = orbit_ball(GenSet({"a": Automorphism.parse("diag(2,1,1)", 2), "b": Automorphism.parse("diag(1,2,1)", 2)}),
                   Lattice.standard(3, 2), 3)
    verts = O.sorted_vertices()
    direct = sorted(close_pairs(verts, 2))
    monkeypatch.setattr(flatgeom, "_PAIR_BUDGET", 0)
    assert sorted(close_pairs(verts, 2)) == direct


@pytest.mark.parametrize("p", [2, 5])
def test_certify_flat_examples(p):
    std = Lattice.standard(2, p)
    rep = certify_flat(GenSet({"u": u_of(p)}), 5)
    assert rep.verdict == "certified-to-depth" and rep.candidate == std
    rep = certify_flat(dihedral(p), 4, 2)
    assert rep.verdict == "refuted-at-word"
    assert rep.torsion_generators == {"s1": 4, "s2": 4}
    g = dihedral(p).evaluate(rep.witness_word)
    assert scale_newton(g).exponent == 1
    T = GenSet({"a": Automorphism.parse(f"diag({p},1)", p), "b": Automorphism.parse(f"diag(1,{p})", p)})
    rep = certify_flat(T, 3)
    assert rep.verdict == "certified-to-depth" and rep.candidate == std
    assert rep.to_json()["failures"] == []


def test_certify_flat_inconclusive_with_common_fixed_lattice():
    # torsion generator plus an infinite-order one fixing the same lattice: no refutation
    p = 2
    G = GenSet({"w": Automorphism.parse("[[0,1],[1,0]]", p), "u": u_of(p)})
    rep = certify_flat(G, 3, 1)
    assert rep.verdict != "refuted-at-word" or rep.common_fixed_lattice is None


def test_element_order():
    assert element_order(dihedral(3)["s2"]) == 4
    assert element_order(u_of(3)) is None


def test_diagonal_root_examples():
    r = diagonal_roots([[1], [-1]])
    assert r.roots == (((1,), 1), ((-1,), 1)) and r.rank == 1
    assert all(r.norm((k,)) == 2 * abs(k) for k in range(-4, 5))
    r = diagonal_roots([[1], [1], [-2]])
    assert dict(r.roots) == {(1,): 2, (-1,): 2}
    g = Automorphism.parse("diag(3,3,1/9)", 3)
    std = Lattice.standard(3, 3)
    for k in range(1, 4):
        assert r.norm((k,)) == 4 * k == displacement(g ** k, std)
    r = diagonal_roots([[1, 0], [0, 1]])
    assert dict(r.roots) == {(1, 0): 1, (0, 1): 1} and r.rank == 2 and r.kernel_rank == 0
    with pytest.raises(NonDiagonalInput):
        diagonal_exponent_matrix(dihedral(2))


@st.composite
def diagonal_groups(draw):
    p = draw(st.sampled_from([2, 3]))
    n = draw(st.integers(1, 4))
    m = draw(st.integers(1, 3))
    cols = [[draw(st.integers(-3, 3)) for _ in range(n)] for _ in range(m)]
    gens = {f"g{j}": Automorphism(PMatrix.diag([Fraction(p) ** e for e in col], p)) for j, col in enumerate(cols)}
    return p, n, GenSet(gens), [list(r) for r in zip(*cols)]


@given(diagonal_groups(), st.lists(st.integers(-3, 3), min_size=3, max_size=3))
def test_norm_identity(data, w):
    p, n, G, E = data
    w = w[:len(G.base_labels)]
    roots = diagonal_roots(diagonal_exponent_matrix(G))
    assert diagonal_exponent_matrix(G) == E
    g = Automorphism.identity(n, p)
    for label, k in zip(G.base_labels, w):
        g = g @ G[label] ** k
    std = Lattice.standard(n, p)
    assert displacement(g, std) == roots.norm(w)
    assert roots.norm([-x for x in w]) == roots.norm(w)
    # H(1) elements fix the standard lattice
    if scale_one_test(g):
        assert g(std) == std


def test_scale_one_test_examples():
    assert scale_one_test(dihedral(5)["s1"])
    assert not scale_one_test(u_of(5))
    assert scale_one_test(Automorphism.parse("[[1,3],[2,7]]", 5))


@given(st.sampled_from([2, 3]).flatmap(lambda p: st.tuples(
    invertibles(2, p, 1), invertibles(2, p, 1), lattices(2, p, 1), lattices(2, p, 1))))
def test_orbit_quasi_isometry_bound(data):
    phi, psi, O, O2 = data
    a = dist(O.transform(phi), O.transform(psi))
    b = dist(O2.transform(phi), O2.transform(psi))
    assert abs(a - b) <= 2 * dist(O, O2)


@given(st.sampled_from([2, 3]).flatmap(lambda p: st.tuples(
    invertibles(2, p, 1), invertibles(2, p, 1), lattices(2, p, 1))))
def test_bornology_displacement(data):
    a, b, O = Automorphism(data[0]), Automorphism(data[1]), data[2]
    assert displacement(a @ b, O) <= displacement(a, O) + displacement(b, O)
    assert displacement(a.inv(), O) == displacement(a, O)


def test_fc_examples():
    p = 2
    G = dihedral(p)
    assert fc_membership(Automorphism.identity(2, p), G, 4).kind == "bounded-to-depth"
    U = GenSet({"u": u_of(p)})
    v = fc_membership(u_of(p), U, 4)
    assert (v.kind, v.max_displacement) == ("bounded-to-depth", 2)
    v = fc_membership(G["s1"], G, 6)
    assert v.kind == "escaping"
    assert [d for _, d in v.witness_displacements] == [4 * k for k in range(len(v.witness_displacements))]
    with pytest.raises(ValueError):
        fc_membership(G["s1"], G, 0)


def test_bounded_set_closed_under_products_and_inverses():
    # torus: every generator bounded; so are products and inverses within depth
    p = 2
    T = GenSet({"a": Automorphism.parse("diag(2,1)", p), "b": Automorphism.parse("diag(1,2)", p)})
    for word in [("a",), ("b",), ("a", "b"), ("a^-1",), ("a", "b^-1", "b^-1")]:
        assert fc_membership(T.evaluate(word), T, 4).kind == "bounded-to-depth"


def test_certified_flat_generators_are_bounded():
    p = 3
    T = GenSet({"a": Automorphism.parse("diag(3,1,1/3)", p), "b": Automorphism.parse("diag(1,3,1)", p)})
    assert certify_flat(T, 3).verdict == "certified-to-depth"
    for label in T.base_labels:
        assert fc_membership(T[label], T, 4).kind == "bounded-to-depth"


def test_fixed_lattice_examples():
    p = 5
    std = Lattice.standard(2, p)
    G = dihedral(p)
    assert fixed_lattice_from_bounded_orbit(GenSet({"s1": G["s1"]}), std, 10) == std
    L = fixed_lattice_from_bounded_orbit(GenSet({"s2": G["s2"]}), std, 10)
    assert L == canonicalize(PMatrix.diag([1, p], p))
    assert G["s2"](L) == L
    with pytest.raises(OrbitNotClosed):
        fixed_lattice_from_bounded_orbit(GenSet({"u": u_of(p)}), std, 20)
    with pytest.raises(ValueError):
        fixed_lattice_from_bounded_orbit(G, std, 0)


def test_random_finite_group_has_fixed_lattice():
    rng = random.Random(3)
    p = 3
    w = Automorphism(PMatrix([[0, -1], [1, -1]], p))  # order 3
    for _ in range(3):
        h = Automorphism(PMatrix([[rng.choice([1, 3, Fraction(1, 3)]), rng.randint(0, 2)], [0, 1]], p))
        conj = GenSet({"w": h @ w @ h.inv()})
        L = fixed_lattice_from_bounded_orbit(conj, Lattice.standard(2, p), 10)
        assert conj["w"](L) == L
