"""Batched evaluation of the forward index [gL : gL meet L] over a lattice ball.

The index is invariant under L -> p^k L, so it suffices to scan one
representative per homothety class.  Representatives are the integer
canonical bases T with p^r Z^n <= T Z_p^n <= Z_p^n and T Z_p^n not inside
p Z_p^n.  For n <= 3 the homothety class of such a lattice meets
ball(standard, r) exactly when p^r Z^n is contained in it, so the scan
below covers the ball with nothing missing and nothing extra.

All index arithmetic here runs on residues modulo a power of p in int64 arrays and is
independent of the Fraction-based code in ``lattice``.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import product

import numpy as np

from .exactnum import PMatrix, val
from .lattice import Lattice, canonicalize, meet

MAX_FAST_DIM = 3
_CHUNK = 100_000


def _reduce_columns(vecs: np.ndarray, T: np.ndarray, diag: list) -> np.ndarray:
    """Reduce integer vectors (N, j) modulo the upper-triangular lattice T."""
    vecs = vecs.copy()
    for i in range(len(diag) - 1, -1, -1):
        q = vecs[:, i] // (T[i][i])
        vecs -= q[:, None] * np.asarray([T[r][i] for r in range(len(diag))], dtype=np.int64)[None, :]
    return vecs


def _int_basis(L: Lattice):
    return [[int(x) for x in row] for row in L.basis.rows]


@lru_cache(maxsize=None)
def class_representatives(n: int, p: int, r: int):
    """(bases (N, n, n) int64, diag exponent sums (N,), class radius (N,)), sorted by radius."""
    if n > MAX_FAST_DIM:
        raise ValueError("fast class enumeration only for n <= 3")
    blocks = []
    # prefixes: integer canonical bases of the first j columns
    prefixes = [([], [])]  # (T rows as list of lists in j x j, diag exponents)
    for j in range(n):
        last = j == n - 1
        new_prefixes = []
        for T, diag in prefixes:
            for a in range(r + 1):
                w = r - a
                if j == 0:
                    tails = np.zeros((1, 0), dtype=np.int64)
                else:
                    # t must satisfy p^w t in L_{j-1}; enumerate reps of S / L_{j-1}
                    Lprev = Lattice(PMatrix(T, p))
                    S = meet(canonicalize(Lprev.basis.scale(Fraction(p) ** -w)), Lattice.standard(j, p))
                    Sb = _int_basis(S)
                    ranges = [range(p ** (diag[i] - val(Sb[i][i], p))) for i in range(j)]
                    ks = np.array(list(product(*ranges)), dtype=np.int64).reshape(-1, j)
                    Smat = np.array(Sb, dtype=np.int64)
                    tails = ks @ Smat.T
                    tails = _reduce_columns(tails, T, diag)
                if last:
                    N = tails.shape[0]
                    arr = np.zeros((N, n, n), dtype=np.int64)
                    for i in range(j):
                        for c in range(j):
                            arr[:, i, c] = T[i][c]
                    arr[:, :j, j] = tails
                    arr[:, j, j] = p**a
                    blocks.append((arr, sum(diag) + a))
                else:
                    for t in tails:
                        newT = [list(row) + [int(t[i])] for i, row in enumerate(T)]
                        newT.append([0] * j + [p**a])
                        new_prefixes.append((newT, diag + [a]))
        prefixes = new_prefixes
    bases = np.concatenate([b for b, _ in blocks])
    sums = np.concatenate([np.full(b.shape[0], s, dtype=np.int64) for b, s in blocks])
    # drop lattices inside p Z^n (not primitive class representatives)
    primitive = (bases % p != 0).reshape(len(bases), -1).any(axis=1)
    bases, sums = bases[primitive], sums[primitive]
    radius = _containment_radius(bases, sums, p)
    order = np.lexsort((sums, radius))
    return bases[order].astype(np.int32), sums[order], radius[order]


def _containment_radius(bases: np.ndarray, sums: np.ndarray, p: int) -> np.ndarray:
    """Least k with p^k Z^n inside T Z_p^n, i.e. p^k adj(T) / det(T) integral."""
    adj = _adjugate(bases)
    g = np.gcd.reduce(np.abs(adj).reshape(len(adj), -1), axis=1)
    return np.maximum(0, sums - _int_valuation(g, p, int(sums.max()) if len(sums) else 0))


def _adjugate(A: np.ndarray) -> np.ndarray:
    n = A.shape[-1]
    if n == 1:
        return np.ones_like(A)
    if n == 2:
        out = np.empty_like(A)
        out[..., 0, 0] = A[..., 1, 1]
        out[..., 1, 1] = A[..., 0, 0]
        out[..., 0, 1] = -A[..., 0, 1]
        out[..., 1, 0] = -A[..., 1, 0]
        return out
    c0, c1, c2 = A[..., :, 0], A[..., :, 1], A[..., :, 2]
    return np.stack([np.cross(c1, c2), np.cross(c2, c0), np.cross(c0, c1)], axis=-2)


def _int_valuation(x: np.ndarray, p: int, cap: int) -> np.ndarray:
    """p-adic valuation of non-negative integers, capped at cap (zero -> cap)."""
    v = np.zeros(x.shape, dtype=np.int64)
    q = p
    for _ in range(cap):
        v += (x % q == 0)
        q *= p
    return v


def _min_valuation(Y: np.ndarray, p: int, cap: int) -> np.ndarray:
    """Minimum p-adic valuation over the entries of each matrix, capped at cap."""
    g = np.gcd.reduce(Y.reshape(Y.shape[0], -1), axis=1)
    return _int_valuation(g, p, cap)


def _to_residues(M: PMatrix, mod: int) -> np.ndarray:
    return np.array([[(x.numerator * pow(x.denominator, -1, mod)) % mod for x in row] for row in M.rows],
                    dtype=np.int64)


def _minor_kernels(g: PMatrix) -> list:
    """Matrices K with D_k(T^-1 g T) = minval(adj(T) K T) - val det T, for k < n."""
    n = g.nrows
    if n == 1:
        return []
    if n == 2:
        return [g]
    if n == 3:
        return [g, g.inverse().scale(g.det())]
    raise ValueError("minor kernels implemented for n <= 3")


def forward_index_batch(g: PMatrix, bases: np.ndarray, sums: np.ndarray) -> np.ndarray:
    """Exponent of [gL : gL meet L] for each basis (lattices between p^r Z^n and Z^n).

    With M = T^-1 g T and determinantal divisors D_k(M), the index exponent
    is -min(0, D_1, ..., D_n); D_n = val det g does not depend on T.
    """
    p = g.p
    N = bases.shape[0]
    bases = bases.astype(np.int64)
    adj = _adjugate(bases)
    out = np.minimum(0, np.full(N, val(g.det(), p), dtype=np.int64))
    smax = int(sums.max()) if N else 0
    for K in _minor_kernels(g):
        s = max(0, -K.min_val())
        cap = s + smax
        mod = p**cap
        if mod > 1_500_000_000:
            raise OverflowError("modulus too large for int64 evaluation")
        Km = _to_residues(K.scale(Fraction(p) ** s), mod)
        Y = np.matmul(adj % mod, Km) % mod
        Y = np.matmul(Y, bases) % mod
        D = _min_valuation(Y, p, cap) - s - sums
        out = np.minimum(out, D)
    return -out


def min_forward_index(g: PMatrix, r: int, lower_bound: int = 0):
    """(min exponent, witness lattice) over classes meeting ball(standard, r)."""
    n = g.nrows
    bases, sums, radius = class_representatives(n, g.p, r)
    best, best_i = None, None
    for start in range(0, len(bases), _CHUNK):
        f = forward_index_batch(g, bases[start:start + _CHUNK], sums[start:start + _CHUNK])
        i = int(f.argmin())
        if best is None or f[i] < best:
            best, best_i = int(f[i]), start + i
        if best <= lower_bound:
            break
    T = bases[best_i]
    witness = Lattice(PMatrix(T.tolist(), g.p))
    return best, witness
