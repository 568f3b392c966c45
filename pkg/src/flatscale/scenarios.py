"""Scenario configs (TOML), built-in scenarios and the JSON report."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import building
from .autoscale import Automorphism, displacement, scale_newton
from .exactnum import PMatrix, SingularMatrix, parse_entry, parse_matrix
from .flatgeom import (
    GenSet,
    InsufficientData,
    NonDiagonalInput,
    certify_flat,
    coarse_threshold,
    diagonal_exponent_matrix,
    diagonal_roots,
    fc_membership,
    growth_degree,
    inverse_label,
    orbit_ball,
)
from .lattice import Lattice, canonicalize

SCHEMA_VERSION = 1

DEFAULT_DEPTHS = {"orbit_depth": 8, "flat_depth": 6, "search_radius": 2, "fc_depth": 6, "tree_radius": 4}


class ConfigParseError(ValueError):
    pass


class AssertionFailure(Exception):
    def __init__(self, failures):
        super().__init__(f"{len(failures)} expected assertion(s) failed")
        self.failures = failures


@dataclass
class Scenario:
    name: str
    p: int
    n: int
    generators: dict  # label -> matrix text
    elements: dict = field(default_factory=dict)  # label -> word text
    base: list | None = None  # basis grid of entry strings
    depths: dict = field(default_factory=lambda: dict(DEFAULT_DEPTHS))
    subgroups: dict = field(default_factory=dict)  # name -> labels
    fc: list = field(default_factory=list)
    building: dict | None = None
    expected: dict = field(default_factory=dict)

    # resolved on validate()
    _gens: GenSet | None = field(default=None, repr=False)
    _named: dict = field(default_factory=dict, repr=False)

    def validate(self) -> "Scenario":
        if self.p < 2 or any(self.p % q == 0 for q in range(2, int(self.p**0.5) + 1)):
            raise ConfigParseError(f"p = {self.p} is not prime")
        if not self.generators:
            raise ConfigParseError("at least one generator is required")
        for k, v in self.depths.items():
            if k not in DEFAULT_DEPTHS:
                raise ConfigParseError(f"unknown depth key {k!r}")
            if not isinstance(v, int) or v < 1:
                raise ConfigParseError(f"{k} must be a positive integer")
        self.depths = {**DEFAULT_DEPTHS, **self.depths}
        mats = {}
        for label, text in self.generators.items():
            try:
                M = parse_matrix(_matrix_text(text), self.p, self.n)
                if M.shape != (self.n, self.n):
                    raise ConfigParseError(f"generator {label} has shape {M.shape}, expected n = {self.n}")
                mats[label] = Automorphism(M)
            except SingularMatrix:
                raise ConfigParseError(f"generator {label} is singular") from None
            except ValueError as e:
                if isinstance(e, ConfigParseError):
                    raise
                raise ConfigParseError(f"generator {label}: {e}") from None
        try:
            self._gens = GenSet(mats)
        except ValueError as e:
            raise ConfigParseError(str(e)) from None
        self._named = dict(mats)
        for label, text in self.elements.items():
            if label in self._named:
                raise ConfigParseError(f"duplicate label {label!r}")
            self._named[label] = self._gens.evaluate(parse_word(text, self._gens))
        for name, labels in self.subgroups.items():
            for lab in labels:
                if lab not in self._named:
                    raise ConfigParseError(f"subgroup {name}: unknown label {lab!r}")
        for lab in self.fc:
            if lab not in self._named:
                raise ConfigParseError(f"fc: unknown label {lab!r}")
        if self.building is not None:
            if self.n != 2:
                raise ConfigParseError("building analyses need n = 2")
            for key in ("translation", "chamber"):
                for lab in self.building.get(key, []):
                    if lab not in self._named:
                        raise ConfigParseError(f"building.{key}: unknown label {lab!r}")
            for text in self.building.get("monomial_words", []):
                parse_word(text, self._gens)
        return self

    def base_lattice(self) -> Lattice:
        if self.base is None:
            return Lattice.standard(self.n, self.p)
        rows = [[parse_entry(str(x), self.p) for x in row] for row in self.base]
        return canonicalize(PMatrix(rows, self.p))

    def echo(self) -> dict:
        return {
            "name": self.name, "p": self.p, "n": self.n,
            "generators": {k: self._named[k].matrix.to_strings() for k in self.generators},
            "elements": dict(self.elements),
            "base": self.base_lattice().to_json(),
            "depths": dict(self.depths),
            "subgroups": {k: list(v) for k, v in self.subgroups.items()},
            "fc": list(self.fc),
        }


def _matrix_text(obj) -> str:
    if isinstance(obj, str):
        return obj
    # grid of entry strings / ints
    return "[" + ",".join("[" + ",".join(str(x) for x in row) + "]" for row in obj) + "]"


def parse_word(text: str, gens: GenSet) -> tuple:
    """'a b^-1 c^3' -> ('a', 'b^-1', 'c', 'c', 'c'); 'e' or '' is the empty word."""
    out = []
    for tok in text.replace("*", " ").split():
        if tok == "e":
            continue
        label, _, k = tok.partition("^")
        power = int(k) if k else 1
        if label not in gens.elements or label.endswith("^-1"):
            raise ConfigParseError(f"unknown generator {label!r} in word {text!r}")
        lab = label if power > 0 else inverse_label(label)
        out.extend([lab] * abs(power))
    return tuple(out)


def scenario_from_dict(data: dict) -> Scenario:
    try:
        sc = Scenario(
            name=str(data["name"]),
            p=int(data["p"]),
            n=int(data["n"]),
            generators=dict(data["generators"]),
            elements=dict(data.get("elements", {})),
            base=data.get("base"),
            depths=dict(data.get("depths", {})),
            subgroups={k: list(v) for k, v in data.get("subgroups", {}).items()},
            fc=list(data.get("fc", [])),
            building=data.get("building"),
            expected=dict(data.get("expected", {})),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigParseError(f"bad scenario: {e!r}") from None
    return sc.validate()


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigParseError(f"{path}: {e}") from None
    return scenario_from_dict(data)


BUILTINS = {
    "dihedral": {
        "name": "dihedral", "p": 5, "n": 2,
        "generators": {"s1": "[[0,-1],[1,0]]", "s2": "[[0,-1/5],[5,0]]"},
        "elements": {"u": "s1^-1 s2"},
        "depths": {"orbit_depth": 8, "flat_depth": 8, "search_radius": 4, "fc_depth": 6},
        "subgroups": {"H": ["s1", "s2"], "U": ["u"]},
        "fc": ["s1"],
        "expected": {
            "orbit.degree": 1,
            "orbit.coarse_threshold": 2,
            "flat.H.verdict": "refuted-at-word",
            "flat.H.common_fixed_lattice": None,
            "flat.U.verdict": "certified-to-depth",
            "flat.U.rank": 1,
            "flat.U.power_norms.u": [[1, 2], [2, 4], [3, 6], [4, 8]],
            "scale.u.exponent": 1,
            "scale.u.inverse_exponent": 1,
            "fc.s1.kind": "escaping",
            "fc.s1.growth_rate": 4,
        },
    },
    "torus-n": {
        "name": "torus-n", "p": 2, "n": 3,
        "generators": {"t1": "diag(2,1,1)", "t2": "diag(1,2,1)", "t3": "diag(1,1,2)"},
        "depths": {"orbit_depth": 6, "flat_depth": 4, "search_radius": 1, "fc_depth": 4},
        "subgroups": {"T": ["t1", "t2", "t3"]},
        "fc": ["t1"],
        "expected": {
            "orbit.degree": 3,
            "flat.T.verdict": "certified-to-depth",
            "flat.T.rank": 3,
            "roots.rank": 3,
            "roots.roots": [
                {"functional": [1, 0, 0], "weight_exponent": 1},
                {"functional": [0, 1, 0], "weight_exponent": 1},
                {"functional": [0, 0, 1], "weight_exponent": 1},
            ],
            "fc.t1.kind": "bounded-to-depth",
        },
    },
    "sl2-normalizer": {
        "name": "sl2-normalizer", "p": 2, "n": 2,
        "generators": {"a": "diag(2,1)", "b": "diag(1,2)", "w": "[[0,1],[1,0]]"},
        "elements": {"t": "a b^-1"},
        "depths": {"orbit_depth": 8, "fc_depth": 6, "tree_radius": 4},
        "building": {
            "translation": ["t"],
            "chamber": ["t"],
            "tree_orbit": True,
            "tree_fc": True,
            "monomial_words": ["e", "a", "b", "a b^-1", "w", "a w", "b w", "a b^-1 w"],
        },
        "expected": {
            "building.translation.t.length": 2,
            "building.translation.t.apartment_attains": True,
            "building.chamber.t.apartment_attains": True,
            "building.tree_orbit.degree": 1,
            "building.monomial.bounded_exactly_translations": True,
            "building.monomial.witness_growth_ge_4k": True,
            "building.tree_fc.w.kind": "escaping",
        },
    },
}


def builtin(name: str) -> Scenario:
    if name not in BUILTINS:
        raise ConfigParseError(f"unknown built-in scenario {name!r}; known: {sorted(BUILTINS)}")
    return scenario_from_dict(BUILTINS[name])


def _derived(units: int, p: int) -> float:
    return round(units * math.log(p), 12)


def _degree(counts):
    try:
        degree, resid = growth_degree(counts)
    except InsufficientData:
        return None, None
    return degree, round(resid, 6)


def run_scenario(sc: Scenario, dot: dict | None = None) -> dict:
    """Report dict in a fixed key order; ``dot`` collects name -> DOT text when given."""
    p, gens = sc.p, sc._gens
    base = sc.base_lattice()
    d = sc.depths
    report = {"schema_version": SCHEMA_VERSION, "scenario": sc.echo()}

    scale = {}
    for label, g in sc._named.items():
        s, s_inv, disp = scale_newton(g).exponent, scale_newton(g.inv()).exponent, displacement(g, base)
        scale[label] = {
            "exponent": s, "inverse_exponent": s_inv, "displacement_units": disp,
            "derived_log": {"scale": _derived(s, p), "displacement": _derived(disp, p)},
        }
    report["scale"] = scale

    orbit = orbit_ball(gens, base, d["orbit_depth"])
    counts = orbit.counts_by_radius()
    degree, resid = _degree(counts)
    report["orbit"] = {
        "size": len(orbit.vertices),
        "counts_by_radius": [list(x) for x in counts],
        "degree": degree,
        "fit_residual_derived": resid,
        "threshold": orbit.threshold,
        "coarse_threshold": coarse_threshold(orbit.sorted_vertices()),
    }
    if dot is not None:
        dot["orbit"] = orbit.to_dot()

    flat = {}
    for name, labels in sc.subgroups.items():
        sub = GenSet({lab: sc._named[lab] for lab in labels})
        rep = certify_flat(sub, d["flat_depth"], d["search_radius"])
        out = rep.to_json()
        if rep.verdict == "certified-to-depth":
            O = rep.candidate
            sub_orbit = orbit_ball(sub, O, d["orbit_depth"])
            out["rank"] = _degree(sub_orbit.counts_by_radius())[0]
            out["power_norms"] = {
                lab: [[k, displacement(sc._named[lab] ** k, O)] for k in range(1, 5)] for lab in labels}
        flat[name] = out
    report["flat"] = flat

    try:
        report["roots"] = diagonal_roots(diagonal_exponent_matrix(gens)).to_json()
    except NonDiagonalInput:
        report["roots"] = None

    report["fc"] = {lab: fc_membership(sc._named[lab], gens, d["fc_depth"], base).to_json() for lab in sc.fc}

    if sc.building is not None:
        report["building"] = _run_building(sc, dot)

    failures = check_expected(report, sc.expected)
    report["assertions"] = failures["all"]
    report["passed"] = not failures["failed"]
    return report


def _vertex_json(v):
    return v.rep.basis.to_strings()


def _run_building(sc: Scenario, dot) -> dict:
    b, d, gens = sc.building, sc.depths, sc._gens
    r = d["tree_radius"]
    out = {"note": building.PROXY_NOTE}
    out["translation"] = {}
    for lab in b.get("translation", []):
        res = building.tree_translation_length(sc._named[lab].matrix, r)
        out["translation"][lab] = {
            "length": res.length, "apartment_attains": res.apartment_attains,
            "attaining": [_vertex_json(v) for v in res.attaining]}
    out["chamber"] = {}
    for lab in b.get("chamber", []):
        res = building.chamber_min_displacement(sc._named[lab].matrix, r)
        out["chamber"][lab] = {
            "minimum": res.minimum, "apartment_attains": res.apartment_attains,
            "attaining": [[_vertex_json(v), _vertex_json(w)] for v, w in res.attaining]}
    if b.get("tree_orbit"):
        counts = building.tree_orbit_counts(gens, d["orbit_depth"])
        degree, resid = _degree(counts)
        out["tree_orbit"] = {"counts_by_radius": [list(x) for x in counts], "degree": degree,
                             "fit_residual_derived": resid}
    if b.get("tree_fc"):
        out["tree_fc"] = {lab: building.tree_fc_membership(gens[lab], gens, d["fc_depth"]).to_json()
                          for lab in gens.base_labels}
    words = b.get("monomial_words", [])
    if words:
        rows, exact, growth_ok = [], True, True
        for text in words:
            m = building.MonomialElement.from_matrix(gens.evaluate(parse_word(text, gens)).matrix)
            v = building.monomial_bounded_class(m, d["fc_depth"])
            exact &= (v.kind == "bounded") == m.is_translation()
            growth_ok &= all(disp >= 4 * k for k, disp in v.witnesses)
            rows.append({"word": text, "translation": list(m.translation), "perm": list(m.perm),
                         "kind": v.kind, "witnesses": [list(x) for x in v.witnesses]})
        out["monomial"] = {"elements": rows, "bounded_exactly_translations": exact,
                           "witness_growth_ge_4k": growth_ok}
    if dot is not None:
        dot["tree"] = building.tree_ball_dot(building.TreeVertex.standard(sc.p), r)
    return out


_MISSING = object()


def _lookup(report, path: str):
    cur = report
    for part in path.split("."):
        if isinstance(cur, dict) and part in cur:
            cur = cur[part]
        elif isinstance(cur, list) and part.lstrip("-").isdigit():
            try:
                cur = cur[int(part)]
            except IndexError:
                return _MISSING
        else:
            return _MISSING
    return cur


def _matches(actual, expected) -> bool:
    if isinstance(expected, dict) and set(expected) <= {"min", "max"} and expected:
        if not isinstance(actual, (int, float)) or isinstance(actual, bool):
            return False
        return expected.get("min", actual) <= actual <= expected.get("max", actual)
    return actual == expected


def check_expected(report: dict, expected: dict) -> dict:
    """Each key is a dotted path into the report; values compare by equality or {min, max}."""
    rows, failed = [], []
    for path in sorted(expected):
        want = expected[path]
        got = _lookup(report, path)
        ok = got is not _MISSING and _matches(got, want)
        row = {"path": path, "expected": want, "actual": None if got is _MISSING else got, "ok": ok}
        rows.append(row)
        if not ok:
            failed.append(row)
    return {"all": rows, "failed": failed}
