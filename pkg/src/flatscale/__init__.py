"""Scale, flatness and growth computations for groups acting on p-adic lattices."""

from .autoscale import Automorphism, scale_bruteforce, scale_newton, tidy_for_cyclic
from .exactnum import PMatrix, parse_matrix
from .flatgeom import GenSet, certify_flat, coarse_threshold, fc_membership, orbit_ball
from .lattice import Lattice, ball, canonicalize, dist

__all__ = [
    "Automorphism", "GenSet", "Lattice", "PMatrix", "ball", "canonicalize", "certify_flat",
    "coarse_threshold", "dist", "fc_membership", "orbit_ball", "parse_matrix",
    "scale_bruteforce", "scale_newton", "tidy_for_cyclic",
]
