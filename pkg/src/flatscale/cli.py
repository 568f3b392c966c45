"""Command-line interface: ``flatscale <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import math
import os
import random
import sys

from . import building, scenarios
from .autoscale import Automorphism, displacement, scale_bruteforce, scale_newton, tidy_for_cyclic
from .exactnum import PMatrix, parse_matrix
from .flatgeom import GenSet, certify_flat, coarse_threshold, fc_membership, orbit_ball
from .lattice import Lattice, canonicalize, dist
from .sampling import random_invertible, random_lattice


class UsageError(Exception):
    pass


def _dims(texts):
    for t in texts:
        s = t.strip()
        if s.startswith("[["):
            return s.count("[") - 1
        if s.startswith("diag("):
            return s.count(",") + 1
    return None


def _parse(text: str, p: int, n: int | None) -> PMatrix:
    try:
        return parse_matrix(text, p, n)
    except ValueError as e:
        raise UsageError(f"cannot parse matrix {text!r}: {e}") from None


def _gens(specs, p: int, n: int | None) -> GenSet:
    """Generators given as 'label=matrix' or bare matrices (named g1, g2, ...)."""
    n = n or _dims([s.partition("=")[2] if "=" in s else s for s in specs])
    out = {}
    for i, s in enumerate(specs, 1):
        label, sep, text = s.partition("=")
        if not sep or label.strip().startswith("["):
            label, text = f"g{i}", s
        try:
            out[label.strip()] = Automorphism(_parse(text, p, n))
        except ValueError as e:
            raise UsageError(str(e)) from None
    if not out:
        raise UsageError("no generators given")
    return GenSet(out)


def _emit(args, payload: dict, text: str):
    if args.json:
        body = json.dumps({"schema_version": scenarios.SCHEMA_VERSION, **payload}, indent=2) + "\n"
        if args.json == "-":
            sys.stdout.write(body)
            return
        with open(args.json, "w") as fh:
            fh.write(body)
    print(text)


def _write_dot(path, text):
    if path:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_scale(args):
    g = Automorphism(_parse(args.matrix, args.p, args.n))
    s, s_inv = scale_newton(g).exponent, scale_newton(g.inv()).exponent
    payload = {"matrix": g.matrix.to_strings(), "p": args.p, "exponent": s, "inverse_exponent": s_inv,
               "derived_log_scale": round(s * math.log(args.p), 12)}
    lines = [f"scale exponent {s} (scale {args.p}^{s}); inverse {s_inv}"]
    if args.radius is not None:
        bf = scale_bruteforce(g, args.radius)
        payload["bruteforce"] = {"radius": args.radius, "exponent": bf.exponent,
                                 "witness": bf.witness.to_json()}
        lines.append(f"brute force over radius {args.radius}: {bf.exponent}")
        if bf.exponent != s:
            lines.append("MISMATCH (radius may be too small)")
    if args.tidy:
        cert = tidy_for_cyclic(g)
        payload["tidy"] = {"lattice": cert.lattice.to_json(), "certified": cert.certified, "steps": cert.steps}
        lines.append(f"tidy candidate {cert.lattice.basis.to_strings()} certified={cert.certified}")
    _emit(args, payload, "\n".join(lines))
    return 0


def cmd_distance(args):
    n = args.n or _dims([args.a, args.b])
    A, B = canonicalize(_parse(args.a, args.p, n)), canonicalize(_parse(args.b, args.p, n))
    d = dist(A, B)
    _emit(args, {"a": A.to_json(), "b": B.to_json(), "units": d,
                 "derived_log": round(d * math.log(args.p), 12)}, f"{d}")
    return 0


def cmd_orbit(args):
    gens = _gens(args.generators, args.p, args.n)
    O = orbit_ball(gens, Lattice.standard(gens.n, gens.p), args.depth)
    data = O.to_json()
    data["coarse_threshold"] = coarse_threshold(O.sorted_vertices())
    fit = data["degree_fit"]
    _write_dot(args.dot, O.to_dot())
    lines = [f"orbit size {len(O.vertices)} at depth {args.depth}",
             "counts " + " ".join(f"{r}:{c}" for r, c in O.counts_by_radius()),
             f"growth degree {fit['degree'] if fit else 'n/a'}",
             f"coarse threshold {data['coarse_threshold']}"]
    _emit(args, {"orbit": data}, "\n".join(lines))
    return 0


def cmd_flat(args):
    gens = _gens(args.generators, args.p, args.n)
    rep = certify_flat(gens, args.depth, args.radius if args.radius is not None else 2)
    lines = [f"verdict {rep.verdict}", rep.reason]
    if rep.candidate is not None:
        lines.append(f"candidate {rep.candidate.basis.to_strings()}")
    _emit(args, {"flat": rep.to_json()}, "\n".join(lines))
    return 0


def cmd_fc(args):
    gens = _gens(args.generators, args.p, args.n)
    if args.phi in gens.elements:
        phi = gens[args.phi]
    else:
        phi = Automorphism(_parse(args.phi, args.p, gens.n))
    v = fc_membership(phi, gens, args.depth)
    lines = [f"{v.kind} (max displacement {v.max_displacement})"]
    if v.witness_displacements:
        lines.append("witness " + " ".join(f"{k}:{d}" for k, d in v.witness_displacements))
    _emit(args, {"fc": v.to_json()}, "\n".join(lines))
    return 0


def cmd_tree(args):
    g = _parse(args.matrix, args.p, 2)
    if g.shape != (2, 2):
        raise UsageError("tree needs a 2x2 matrix")
    radius = args.radius if args.radius is not None else 4
    tl = building.tree_translation_length(g, radius)
    ch = building.chamber_min_displacement(g, radius)
    _write_dot(args.dot, building.tree_ball_dot(building.TreeVertex.standard(args.p), radius))
    payload = {"note": building.PROXY_NOTE,
               "translation_length": tl.length, "translation_apartment_attains": tl.apartment_attains,
               "chamber_minimum": ch.minimum, "chamber_apartment_attains": ch.apartment_attains}
    lines = [f"translation length {tl.length} (apartment attains: {tl.apartment_attains})",
             f"min chamber displacement {ch.minimum} (apartment edge attains: {ch.apartment_attains})",
             building.PROXY_NOTE]
    _emit(args, payload, "\n".join(lines))
    return 0


def cmd_scenario(args):
    if args.action == "list":
        for name in sorted(scenarios.BUILTINS):
            print(name)
        return 0
    if not args.target:
        raise UsageError("scenario run needs a built-in name or a file")
    if os.path.exists(args.target):
        sc = scenarios.load_scenario(args.target)
    else:
        sc = scenarios.builtin(args.target)
    dots = {} if args.dot else None
    report = scenarios.run_scenario(sc, dots)
    body = json.dumps(report, indent=2) + "\n"
    if args.json and args.json != "-":
        with open(args.json, "w") as fh:
            fh.write(body)
    else:
        sys.stdout.write(body)
    if dots:
        stem, ext = os.path.splitext(args.dot)
        for key, text in dots.items():
            _write_dot(f"{stem}.{key}{ext or '.dot'}", text)
    failed = [a for a in report["assertions"] if not a["ok"]]
    for a in failed:
        print(f"FAILED {a['path']}: expected {a['expected']!r}, got {a['actual']!r}", file=sys.stderr)
    return 1 if failed else 0


def cmd_check(args):
    """Randomized spot checks of metric, isometry and scale agreement."""
    rng = random.Random(args.seed)
    p, n, k = args.p, args.n or 2, args.samples
    bad = {"triangle": 0, "symmetry": 0, "isometry": 0, "scale": 0}
    for _ in range(k):
        L, M, N = (random_lattice(rng, n, p) for _ in range(3))
        if dist(L, N) > dist(L, M) + dist(M, N):
            bad["triangle"] += 1
        if dist(L, M) != dist(M, L):
            bad["symmetry"] += 1
        g = random_lattice(rng, n, p).basis
        if dist(L.transform(g), M.transform(g)) != dist(L, M):
            bad["isometry"] += 1
    radius = args.radius if args.radius is not None else 3
    for _ in range(max(1, k // 5)):
        g = Automorphism(random_invertible(rng, n, p))
        if scale_newton(g).exponent != scale_bruteforce(g, radius).exponent:
            bad["scale"] += 1
    ok = not any(bad.values())
    _emit(args, {"seed": args.seed, "p": p, "n": n, "samples": k, "violations": bad, "ok": ok},
          f"seed {args.seed}: " + ", ".join(f"{key} {v}" for key, v in bad.items()) + (" OK" if ok else " FAIL"))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flatscale", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, p_required=True):
        sp.add_argument("--p", type=int, required=p_required, default=None if p_required else 2)
        sp.add_argument("--n", type=int, default=None, help="dimension (needed for bare I)")
        sp.add_argument("--json", metavar="PATH", help="write the JSON report here ('-' for stdout)")
        return sp

    sp = common(sub.add_parser("scale", help="scale exponent of a matrix"))
    sp.add_argument("matrix")
    sp.add_argument("--radius", type=int, help="also brute-force over this ball radius")
    sp.add_argument("--tidy", action="store_true", help="also run the tidying iteration")
    sp.set_defaults(func=cmd_scale)

    sp = common(sub.add_parser("distance", help="distance between A Z_p^n and B Z_p^n"))
    sp.add_argument("a")
    sp.add_argument("b")
    sp.set_defaults(func=cmd_distance)

    sp = common(sub.add_parser("orbit", help="orbit ball of the standard lattice"))
    sp.add_argument("generators", nargs="+", metavar="LABEL=MATRIX")
    sp.add_argument("--depth", type=int, default=8)
    sp.add_argument("--dot", metavar="PATH")
    sp.set_defaults(func=cmd_orbit)

    sp = common(sub.add_parser("flat", help="flatness certificate or refutation"))
    sp.add_argument("generators", nargs="+", metavar="LABEL=MATRIX")
    sp.add_argument("--depth", type=int, default=6)
    sp.add_argument("--radius", type=int, help="lattice search radius")
    sp.set_defaults(func=cmd_flat)

    sp = common(sub.add_parser("fc", help="bounded conjugacy class test"))
    sp.add_argument("phi", help="generator label or matrix")
    sp.add_argument("generators", nargs="+", metavar="LABEL=MATRIX")
    sp.add_argument("--depth", type=int, default=6)
    sp.set_defaults(func=cmd_fc)

    sp = common(sub.add_parser("tree", help="translation length and chamber displacement on the tree"))
    sp.add_argument("matrix")
    sp.add_argument("--radius", type=int)
    sp.add_argument("--dot", metavar="PATH")
    sp.set_defaults(func=cmd_tree)

    sp = sub.add_parser("scenario", help="run or list scenarios")
    sp.add_argument("action", choices=["run", "list"])
    sp.add_argument("target", nargs="?", help="built-in name or TOML file")
    sp.add_argument("--json", metavar="PATH")
    sp.add_argument("--dot", metavar="PATH", help="DOT stem; writes PATH.orbit.dot etc.")
    sp.set_defaults(func=cmd_scenario)

    sp = common(sub.add_parser("check", help="randomized property spot checks"), p_required=False)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--samples", type=int, default=50)
    sp.add_argument("--radius", type=int)
    sp.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, scenarios.ConfigParseError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
