"""Border apolarity feasibility at desk scale.

Polynomials on ``A (+) B (+) C`` are graded by multidegree ``(i, j, k)``.  A
multidegree component is spanned by monomials ``alpha^P beta^Q gamma^R``;
within one factor the degree-``i`` monomials are listed in descending
lexicographic order of their exponent vectors (so ``(alpha^1)^i`` comes
first), and the tensor-product basis is ordered with the A-monomial most
significant.

A Borel subalgebra is described by torus generators (diagonal triples) and
nilpotent generators.  A triple ``(U, V, W)`` in ``gl(A) + gl(B) + gl(C)``
acts on dual coordinates by ``alpha^p -> -sum_q U[p, q] alpha^q`` and on
monomials as a derivation.  Three choices are provided:

``generic``
    coordinate torus of ``GL(A) x GL(B) x GL(C)`` plus the raising maps
    ``alpha^(s+1) -> alpha^s`` (and likewise for ``beta``, ``gamma``).
``symmetry``
    derived from the symmetry algebra of ``T``: its diagonal part as torus
    and its strictly lower triangular part as nilpotent generators.  This is
    a solvable subalgebra of the stabilizer, so any ideal fixed by a Borel
    subgroup of the stabilizer can be moved to one it fixes.
``matmul``
    the product of lower triangular Borels of ``gl(U) x gl(V) x gl(W)``
    acting on ``M<l,m,n>``.

The ``generic`` choice is not a symmetry of most tensors, so its verdicts
are only meaningful as a combinatorial filter.  :func:`apolarity_feasible`
defaults to ``auto``: ``matmul`` for matrix multiplication tensors and
``symmetry`` otherwise.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import DimensionMismatch, MissingDegree, ResourceBudgetExceeded, UnsupportedDegree, ZeroTensor
from .linalg import Subspace, _reduce_against, fraction_str, nullspace_rows, rank_of_rows
from .symmetry import symmetry_algebra
from .tensor import Tensor3, multilinear_ranks

Degree = tuple[int, int, int]
SparseVec = dict[int, Fraction]

PAIR_DEGREES: tuple[Degree, ...] = ((1, 1, 0), (1, 0, 1), (0, 1, 1))
# for each pair degree, the factor left out
_MISSING_FACTOR = {(1, 1, 0): 2, (1, 0, 1): 1, (0, 1, 1): 0}


def _monomials(nvars: int, deg: int) -> list[tuple[int, ...]]:
    out = []
    for combo in itertools.combinations_with_replacement(range(nvars), deg):
        e = [0] * nvars
        for x in combo:
            e[x] += 1
        out.append(tuple(e))
    return sorted(set(out), reverse=True)


class MultidegreeSpace:
    """Monomial basis of ``S^i A* (x) S^j B* (x) S^k C*``."""

    def __init__(self, dims: Sequence[int], degree: Sequence[int]):
        self.dims = tuple(int(d) for d in dims)
        self.degree = tuple(int(d) for d in degree)
        if len(self.dims) != 3 or len(self.degree) != 3 or min(self.degree) < 0:
            raise DimensionMismatch(f"bad dims/degree {dims}, {degree}")
        self.factor_monomials = [_monomials(n, d) for n, d in zip(self.dims, self.degree)]
        self.monomials = list(itertools.product(*self.factor_monomials))
        self.index = {mono: t for t, mono in enumerate(self.monomials)}

    @property
    def dim(self) -> int:
        return len(self.monomials)

    def expected_dim(self) -> int:
        return math.prod(math.comb(n + d - 1, d) for n, d in zip(self.dims, self.degree))

    def exponent_vector(self, t: int) -> tuple[int, ...]:
        return tuple(itertools.chain.from_iterable(self.monomials[t]))

    def label(self, t: int) -> str:
        parts = []
        for name, exps in zip("abg", self.monomials[t]):
            for p, e in enumerate(exps):
                if e:
                    parts.append(f"{name}{p + 1}" + (f"^{e}" if e > 1 else ""))
        return "*".join(parts) or "1"

    def __repr__(self) -> str:
        return f"MultidegreeSpace(dims={self.dims}, degree={self.degree}, dim={self.dim})"


@lru_cache(maxsize=None)
def multidegree_space(dims: tuple[int, int, int], degree: Degree) -> MultidegreeSpace:
    return MultidegreeSpace(dims, degree)


def _shift(degree: Degree, f: int, by: int = 1) -> Degree:
    d = list(degree)
    d[f] += by
    return tuple(d)


def multiply_by_variables(vectors: Iterable[SparseVec], src: MultidegreeSpace, f: int) -> list[SparseVec]:
    """All products ``v * x`` with ``x`` a coordinate variable of factor ``f``."""
    dst = multidegree_space(src.dims, _shift(src.degree, f))
    out = []
    for v in vectors:
        for var in range(src.dims[f]):
            w: SparseVec = {}
            for t, c in v.items():
                mono = list(src.monomials[t])
                e = list(mono[f])
                e[var] += 1
                mono[f] = tuple(e)
                key = dst.index[tuple(mono)]
                w[key] = w.get(key, 0) + c
            w = {k: x for k, x in w.items() if x}
            if w:
                out.append(w)
    return out


# ---------------------------------------------------------------------------
# Borel subalgebras
# ---------------------------------------------------------------------------

SparseMat = dict[tuple[int, int], Fraction]
Op = tuple[SparseMat, SparseMat, SparseMat]


@dataclass
class Borel:
    dims: tuple[int, int, int]
    mode: str
    torus: list[Op]
    nilpotent: list[Op]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def weight(self, md: MultidegreeSpace, t: int) -> tuple[Fraction, ...]:
        out = []
        for op in self.torus:
            w = Fraction(0)
            for f, exps in enumerate(md.monomials[t]):
                M = op[f]
                for p, e in enumerate(exps):
                    if e:
                        w -= e * M.get((p, p), 0)
            out.append(w)
        return tuple(out)

    def weight_spaces(self, md: MultidegreeSpace) -> dict[tuple, list[int]]:
        return _weight_spaces(self, md)

    def derivation(self, op: Op, md: MultidegreeSpace) -> dict[int, SparseVec]:
        """Matrix of ``op`` on ``md`` as column index -> image vector."""
        cols = {}
        by_row = []
        for M in op:
            rows: dict[int, list[tuple[int, Fraction]]] = {}
            for (p, q), x in M.items():
                if x:
                    rows.setdefault(p, []).append((q, x))
            by_row.append(rows)
        for t, mono in enumerate(md.monomials):
            img: SparseVec = {}
            for f, exps in enumerate(mono):
                for p, e in enumerate(exps):
                    if not e:
                        continue
                    for q, x in by_row[f].get(p, ()):
                        new = list(exps)
                        new[p] -= 1
                        new[q] += 1
                        m2 = list(mono)
                        m2[f] = tuple(new)
                        key = md.index[tuple(m2)]
                        img[key] = img.get(key, 0) - e * x
            img = {k: v for k, v in img.items() if v}
            if img:
                cols[t] = img
        return cols

    def to_json_obj(self) -> dict:
        def enc(op):
            return [[[p + 1, q + 1, fraction_str(Fraction(x))] for (p, q), x in sorted(M.items())] for M in op]

        return {"mode": self.mode, "torus": [enc(o) for o in self.torus], "nilpotent": [enc(o) for o in self.nilpotent]}


def _weight_spaces(borel: Borel, md: MultidegreeSpace) -> dict[tuple, list[int]]:
    key = ("weights", md.dims, md.degree)
    if key not in borel._cache:
        spaces: dict[tuple, list[int]] = {}
        for t in range(md.dim):
            spaces.setdefault(borel.weight(md, t), []).append(t)
        borel._cache[key] = dict(sorted(spaces.items()))
    return borel._cache[key]


def _derivations(borel: Borel, md: MultidegreeSpace) -> list[dict[int, SparseVec]]:
    key = ("derivations", md.dims, md.degree)
    if key not in borel._cache:
        borel._cache[key] = [borel.derivation(op, md) for op in borel.nilpotent]
    return borel._cache[key]


def _apply(D: dict[int, SparseVec], v: SparseVec) -> SparseVec:
    out: SparseVec = {}
    for t, c in v.items():
        col = D.get(t)
        if col:
            for k, x in col.items():
                out[k] = out.get(k, 0) + c * x
    return {k: x for k, x in out.items() if x}


def _elem(n: int, p: int, q: int, x=1) -> SparseMat:
    return {(p, q): Fraction(x)}


def generic_borel(dims: Sequence[int]) -> Borel:
    dims = tuple(dims)
    torus, nil = [], []
    for f, n in enumerate(dims):
        for p in range(n):
            op = [{}, {}, {}]
            op[f] = _elem(n, p, p)
            torus.append(tuple(op))
        for s in range(n - 1):
            op = [{}, {}, {}]
            op[f] = _elem(n, s + 1, s, -1)  # alpha^(s+1) -> alpha^s
            nil.append(tuple(op))
    return Borel(dims, "generic", torus, nil)


def _triple_ops(vec: Sequence[Fraction], dims) -> Op:
    a, b, c = dims
    ops = []
    off = 0
    for n in (a, b, c):
        M = {}
        for p in range(n):
            for q in range(n):
                x = vec[off + p * n + q]
                if x:
                    M[(p, q)] = Fraction(x)
        ops.append(M)
        off += n * n
    return tuple(ops)


def _sub_by_pattern(vectors: list[list[Fraction]], dims, keep) -> list[list[Fraction]]:
    """Span of combinations of ``vectors`` vanishing on coordinates where ``keep`` is false."""
    a, b, c = dims
    coords = []
    off = 0
    for n in (a, b, c):
        for p in range(n):
            for q in range(n):
                if not keep(p, q):
                    coords.append(off + p * n + q)
        off += n * n
    rows = []
    for x in coords:
        row = {t: v[x] for t, v in enumerate(vectors) if v[x]}
        if row:
            rows.append(row)
    combos = nullspace_rows(rows, len(vectors))
    n = len(vectors[0]) if vectors else 0
    out = []
    for cvec in combos:
        w = [Fraction(0)] * n
        for t, s in enumerate(cvec):
            if s:
                for i in range(n):
                    if vectors[t][i]:
                        w[i] += s * vectors[t][i]
        out.append(w)
    return out


def symmetry_borel(T: Tensor3) -> Borel:
    basis = symmetry_algebra(T).vectors()
    torus = _sub_by_pattern(basis, T.dims, lambda p, q: p == q)
    nil = _sub_by_pattern(basis, T.dims, lambda p, q: p > q)
    return Borel(T.dims, "symmetry", [_triple_ops(v, T.dims) for v in torus], [_triple_ops(v, T.dims) for v in nil])


def _kron_ops(X: SparseMat, nx: int, Y: SparseMat, ny: int, left: bool) -> SparseMat:
    """``X (x) I`` (left=True) or ``I (x) X^T`` (left=False) as sparse matrices, row-major pairing."""
    out: SparseMat = {}
    if left:
        for (p, q), x in X.items():
            for s in range(ny):
                out[(p * ny + s, q * ny + s)] = out.get((p * ny + s, q * ny + s), 0) + x
    else:
        for (p, q), x in Y.items():
            for s in range(nx):
                out[(s * ny + q, s * ny + p)] = out.get((s * ny + q, s * ny + p), 0) + x
    return out


def matmul_lie_triple(X: SparseMat, Y: SparseMat, Z: SparseMat, l: int, m: int, n: int) -> Op:
    """Image of ``(X, Y, Z)`` in ``gl(l) + gl(m) + gl(n)`` in the symmetry algebra of ``M<l,m,n>``.

    ``U = X (x) I - I (x) Y^T``, ``V = Y (x) I - I (x) Z^T``, ``W = Z (x) I - I (x) X^T``.
    """
    def combine(P, Q):
        out = dict(P)
        for k, x in Q.items():
            out[k] = out.get(k, 0) - x
        return {k: x for k, x in out.items() if x}

    U = combine(_kron_ops(X, l, {}, m, True), _kron_ops({}, l, Y, m, False))
    V = combine(_kron_ops(Y, m, {}, n, True), _kron_ops({}, m, Z, n, False))
    W = combine(_kron_ops(Z, n, {}, l, True), _kron_ops({}, n, X, l, False))
    return (U, V, W)


def matmul_borel(l: int, m: int, n: int) -> Borel:
    torus, nil = [], []
    sizes = (l, m, n)
    for f, size in enumerate(sizes):
        for p in range(size):
            g = [{}, {}, {}]
            g[f] = {(p, p): Fraction(1)}
            torus.append(matmul_lie_triple(*g, l, m, n))
        for s in range(size - 1):
            g = [{}, {}, {}]
            g[f] = {(s + 1, s): Fraction(1)}
            nil.append(matmul_lie_triple(*g, l, m, n))
    return Borel((l * m, m * n, n * l), "matmul", torus, nil)


def borel_for(T: Tensor3, mode: str = "auto", matmul_dims: Sequence[int] | None = None) -> Borel:
    """``auto`` picks ``matmul`` when ``T`` is a matrix multiplication tensor and ``symmetry`` otherwise."""
    if mode == "auto":
        try:
            return matmul_borel(*(matmul_dims or _guess_matmul_dims(T)))
        except ValueError:
            return symmetry_borel(T)
    if mode == "generic":
        return generic_borel(T.dims)
    if mode == "symmetry":
        return symmetry_borel(T)
    if mode == "matmul":
        if matmul_dims is None:
            matmul_dims = _guess_matmul_dims(T)
        return matmul_borel(*matmul_dims)
    raise ValueError(f"unknown Borel mode {mode!r}")


def _guess_matmul_dims(T: Tensor3) -> tuple[int, int, int]:
    from .tensor import make_matmul

    a, b, c = T.dims
    for l in range(1, a + 1):
        if a % l:
            continue
        m = a // l
        if b % m:
            continue
        n = b // m
        if n * l == c and make_matmul(l, m, n) == T:
            return l, m, n
    raise ValueError("the matmul Borel needs T = make_matmul(l, m, n)")


# ---------------------------------------------------------------------------
# annihilators and Borel-fixed checks
# ---------------------------------------------------------------------------

def annihilator(T: Tensor3, degree: Degree) -> Subspace:
    """``T(C*)^perp`` in degree (1,1,0) (and its permutations), ``T^perp`` in degree (1,1,1)."""
    degree = tuple(degree)
    md = multidegree_space(T.dims, degree)
    a, b, c = T.dims
    if degree == (1, 1, 1):
        if T.is_zero():
            raise ZeroTensor("T^perp is not a hyperplane for the zero tensor")
        row = {md.index[(_unit(a, i), _unit(b, j), _unit(c, k))]: v for i, j, k, v in T.nonzero()}
        return Subspace(md.dim, nullspace_rows([row], md.dim))
    if degree not in _MISSING_FACTOR:
        raise UnsupportedDegree(f"annihilators are implemented for (1,1,0), (1,0,1), (0,1,1), (1,1,1); got {degree}")
    skip = _MISSING_FACTOR[degree]
    rows: dict[int, SparseVec] = {}
    for i, j, k, v in T.nonzero():
        idx = (i, j, k)
        mono = [() for _ in range(3)]
        for f, n in enumerate(T.dims):
            mono[f] = _unit(n, idx[f]) if f != skip else (0,) * n
        rows.setdefault(idx[skip], {})[md.index[tuple(mono)]] = v
    return Subspace(md.dim, nullspace_rows(list(rows.values()), md.dim))


def _unit(n: int, i: int) -> tuple[int, ...]:
    e = [0] * n
    e[i] = 1
    return tuple(e)


def _weight_components(v: SparseVec, wmap: dict[int, tuple]) -> dict[tuple, SparseVec]:
    out: dict[tuple, SparseVec] = {}
    for t, x in v.items():
        out.setdefault(wmap[t], {})[t] = x
    return out


def _weight_map(borel: Borel, md: MultidegreeSpace) -> dict[int, tuple]:
    return {t: w for w, ts in _weight_spaces(borel, md).items() for t in ts}


def borel_fixed_check(S: Subspace, md: MultidegreeSpace, borel: Borel | None = None) -> bool:
    """True iff ``S`` is stable under the torus and every nilpotent generator of ``borel``."""
    if S.ambient != md.dim:
        raise DimensionMismatch(f"subspace of dimension {S.ambient} does not live in {md}")
    borel = borel or generic_borel(md.dims)
    if borel.dims != md.dims:
        raise DimensionMismatch(f"Borel for dims {borel.dims} used on {md}")
    wmap = _weight_map(borel, md)
    basis = S.basis_sparse()
    for v in basis:
        comps = _weight_components(v, wmap)
        if len(comps) > 1 and not all(S.contains(c) for c in comps.values()):
            return False
    for D in _derivations(borel, md):
        for v in basis:
            img = _apply(D, v)
            if img and not S.contains(img):
                return False
    return True


def torus_stable_part(S: Subspace, md: MultidegreeSpace, borel: Borel) -> Subspace:
    """Largest torus-stable subspace: the sum of the intersections with the weight spaces."""
    vecs = []
    for w, coords in _weight_spaces(borel, md).items():
        vecs.extend(S.intersect(Subspace.coordinate(md.dim, coords)).basis_sparse())
    return Subspace(md.dim, vecs)


def _restrict_kernel(vectors: list[SparseVec], maps, S: Subspace) -> list[SparseVec]:
    """Combinations ``v`` of ``vectors`` with ``D v in S`` for every ``D`` in ``maps``."""
    if not vectors:
        return []
    piv = dict(zip(S.pivots, S.basis_sparse()))
    rows: dict[tuple, dict[int, Fraction]] = {}
    for t, v in enumerate(vectors):
        for d, D in enumerate(maps):
            rem = _reduce_against(_apply(D, v), piv)
            for k, x in rem.items():
                rows.setdefault((d, k), {})[t] = x
    combos = nullspace_rows(list(rows.values()), len(vectors))
    out = []
    for cvec in combos:
        w: SparseVec = {}
        for t, s in enumerate(cvec):
            if s:
                for k, x in vectors[t].items():
                    w[k] = w.get(k, 0) + s * x
        w = {k: x for k, x in w.items() if x}
        if w:
            out.append(w)
    return out


def borel_stable_part(S: Subspace, md: MultidegreeSpace, borel: Borel) -> Subspace:
    """Largest Borel-stable subspace of ``S``."""
    cur = torus_stable_part(S, md, borel)
    maps = _derivations(borel, md)
    spaces = _weight_spaces(borel, md)
    while True:
        vecs = []
        for w, coords in spaces.items():
            part = cur.intersect(Subspace.coordinate(md.dim, coords)).basis_sparse()
            vecs.extend(_restrict_kernel(part, maps, cur))
        nxt = Subspace(md.dim, vecs)
        if nxt == cur:
            return cur
        cur = nxt


def complete_stable(S: Subspace, container: Subspace, target: int, md: MultidegreeSpace, borel: Borel) -> Subspace | None:
    """Grow the Borel-stable ``S`` inside ``container`` to dimension ``target``.

    Each step adds a weight vector whose nilpotent images already lie in the
    current space; this is the flag argument for solvable algebras and never
    gets stuck when ``container`` is Borel-stable.  Returns None if it does.
    """
    if S.dim > target:
        return None
    maps = _derivations(borel, md)
    spaces = _weight_spaces(borel, md)
    cur = S
    while cur.dim < target:
        added = False
        for w, coords in spaces.items():
            part = container.intersect(Subspace.coordinate(md.dim, coords)).basis_sparse()
            for v in _restrict_kernel(part, maps, cur):
                if not cur.contains(v):
                    cur = cur + Subspace(md.dim, [v])
                    added = True
                    break
            if added:
                break
        if not added:
            return None
    return cur


# ---------------------------------------------------------------------------
# candidates
# ---------------------------------------------------------------------------

def _ambient_target(md: MultidegreeSpace, r: int) -> int:
    """Dimension of ``I`` in this degree under the Hilbert function ``min(r, dim)``."""
    return md.dim - min(r, md.dim)


@dataclass
class IdealCandidate:
    dims: tuple[int, int, int]
    r: int
    spaces: dict[Degree, Subspace]
    borel_mode: str = "symmetry"

    def hilbert(self) -> dict[Degree, int]:
        return {d: S.codim for d, S in self.spaces.items()}

    def hilbert_cap_holds(self) -> bool:
        return all(S.codim == min(self.r, S.ambient) for S in self.spaces.values())

    def to_json_obj(self) -> dict:
        out = {"dims": list(self.dims), "r": self.r, "borel": self.borel_mode, "degrees": {}}
        for d, S in sorted(self.spaces.items()):
            md = multidegree_space(self.dims, d)
            out["degrees"]["%d%d%d" % d] = {
                "ambient": md.dim,
                "dim": S.dim,
                "basis": [[[md.label(t), fraction_str(x)] for t, x in sorted(v.items())] for v in S.basis_sparse()],
            }
        return out


@dataclass
class StratumRecord:
    dims: tuple[int, int, int]
    degree: Degree
    fixed: Subspace
    free: list[dict]

    def to_json_obj(self) -> dict:
        md = multidegree_space(self.dims, self.degree)
        return {
            "degree": "%d%d%d" % self.degree,
            "fixed_dim": self.fixed.dim,
            "fixed_basis": [[[md.label(t), fraction_str(x)] for t, x in sorted(v.items())] for v in self.fixed.basis_sparse()],
            "free": [
                {
                    "weight": [fraction_str(x) for x in f["weight"]],
                    "weight_space_dim": f["space"].dim,
                    "choose_dim": f["dim"],
                    "space_basis": [[[md.label(t), fraction_str(x)] for t, x in sorted(v.items())] for v in f["space"].basis_sparse()],
                }
                for f in self.free
            ],
        }


@dataclass
class PairEnumeration:
    degree: Degree
    candidates: list[Subspace]
    strata: list[StratumRecord]
    reason: str | None = None
    nodes: int = 0

    @property
    def empty(self) -> bool:
        return not self.candidates and not self.strata


@dataclass
class Feasibility:
    status: str  # feasible | infeasible | inconclusive
    r: int
    reason: str | None = None
    candidates: list[IdealCandidate] = field(default_factory=list)
    strata: list[dict] = field(default_factory=list)
    certificate: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    def to_json_obj(self) -> dict:
        return {
            "status": self.status,
            "r": self.r,
            "reason": self.reason,
            "certificate": self.certificate,
            "candidates": [c.to_json_obj() for c in self.candidates],
            "strata": self.strata,
            "stats": self.stats,
        }


class _Clock:
    def __init__(self, budget: float | None):
        self.start = time.monotonic()
        self.budget = budget

    def check(self, partial=None):
        if self.budget is not None and time.monotonic() - self.start > self.budget:
            raise ResourceBudgetExceeded(f"apolarity budget of {self.budget}s exhausted", partial=partial)


def feasibility_110(T: Tensor3, r: int, degree: Degree = (1, 1, 0), borel: Borel | None = None,
                    budget: float | None = None, max_nodes: int = 200000, _clock: _Clock | None = None) -> PairEnumeration:
    """Borel-fixed subspaces of codimension ``r`` inside the degree's annihilator.

    Subspaces are assembled weight space by weight space.  Where a weight
    space is taken whole or not at all the result is a single exact
    subspace; a proper nonzero part of a weight space of dimension at least
    two is a Grassmannian of choices and is reported as a stratum.
    """
    degree = tuple(degree)
    if degree not in _MISSING_FACTOR:
        raise UnsupportedDegree(f"pair degrees are {PAIR_DEGREES}; got {degree}")
    clock = _clock or _Clock(budget)
    borel = borel or symmetry_borel(T)
    md = multidegree_space(T.dims, degree)
    target = _ambient_target(md, r)
    ml = multilinear_ranks(T)[_MISSING_FACTOR[degree]]
    K = annihilator(T, degree)
    if K.dim < target:
        return PairEnumeration(degree, [], [], reason="codim" if r < ml else "annihilator")
    stable = borel_stable_part(K, md, borel)
    if stable.dim < target:
        return PairEnumeration(degree, [], [], reason="borel")

    weights = []
    for w, coords in _weight_spaces(borel, md).items():
        part = stable.intersect(Subspace.coordinate(md.dim, coords))
        if part.dim:
            weights.append((w, part))
    wmap = _weight_map(borel, md)
    maps = _derivations(borel, md)
    widx = {w: t for t, (w, _) in enumerate(weights)}
    # images[t][u]: projection onto weight space u of the nilpotent images of weight space t
    images: list[dict[int, list[SparseVec]]] = []
    for w, part in weights:
        img: dict[int, list[SparseVec]] = {}
        for D in maps:
            for v in part.basis_sparse():
                for wt, comp in _weight_components(_apply(D, v), wmap).items():
                    img.setdefault(widx[wt], []).append(comp)
        images.append(img)
    dims_w = [p.dim for _, p in weights]
    suffix = [0] * (len(weights) + 1)
    for t in range(len(weights) - 1, -1, -1):
        suffix[t] = suffix[t + 1] + dims_w[t]

    result = PairEnumeration(degree, [], [])
    choice = [0] * len(weights)

    def admissible() -> bool:
        for t, d in enumerate(choice):
            if d == 0:
                continue
            if d == dims_w[t]:
                for u, vecs in images[t].items():
                    du = choice[u]
                    if du == dims_w[u]:
                        continue
                    rk = rank_of_rows(vecs)
                    if rk > du:
                        return False
            else:
                # a proper part must avoid every image direction landing in an empty weight space
                kills = [vec for u, vecs in images[t].items() if choice[u] == 0 for vec in vecs]
                if kills:
                    # D(v) must vanish in the empty targets: solve on coefficients
                    basis = weights[t][1].basis_sparse()
                    empty = {u for u, _ in images[t].items() if choice[u] == 0}
                    rows: dict[tuple, dict[int, Fraction]] = {}
                    for s, v in enumerate(basis):
                        for di, D in enumerate(maps):
                            for wt, comp in _weight_components(_apply(D, v), wmap).items():
                                if widx[wt] in empty:
                                    for k, x in comp.items():
                                        rows.setdefault((di, k), {})[s] = x
                    avail = len(basis) - rank_of_rows(list(rows.values()))
                    if avail < d:
                        return False
        return True

    def emit():
        fixed_vecs = []
        free = []
        for t, d in enumerate(choice):
            w, part = weights[t]
            if d == dims_w[t]:
                fixed_vecs.extend(part.basis_sparse())
            elif d:
                free.append({"weight": w, "space": part, "dim": d})
        fixed = Subspace(md.dim, fixed_vecs)
        if not free:
            if borel_fixed_check(fixed, md, borel):
                result.candidates.append(fixed)
        else:
            rec = StratumRecord(T.dims, degree, fixed, free)
            result.strata.append(rec)

    def dfs(t: int, remaining: int):
        result.nodes += 1
        if result.nodes % 256 == 0:
            clock.check(partial=result)
        if result.nodes > max_nodes:
            raise ResourceBudgetExceeded(f"enumeration in degree {degree} exceeded {max_nodes} nodes", partial=result)
        if remaining == 0:
            for u in range(t, len(weights)):
                choice[u] = 0
            if admissible():
                emit()
            return
        if t == len(weights) or suffix[t] < remaining:
            return
        for d in range(min(dims_w[t], remaining), -1, -1):
            choice[t] = d
            dfs(t + 1, remaining - d)
        choice[t] = 0

    dfs(0, target)
    if result.empty:
        result.reason = "closure"
    return result


def multiplication_condition(candidate: IdealCandidate, target: Degree, source: Degree | None = None) -> bool:
    """Check that products of lower-degree pieces land in ``I_target``.

    With ``source`` given only that one map is checked; otherwise every
    ``I_{target - e_f} (x) (factor f)*`` with a nonnegative source degree.
    """
    target = tuple(target)
    if target not in candidate.spaces:
        raise MissingDegree(target)
    dst = candidate.spaces[target]
    if source is not None:
        diff = [t - s for t, s in zip(target, source)]
        if sorted(diff) != [0, 0, 1]:
            raise ValueError(f"{source} -> {target} is not a single-variable multiplication")
        sources = [(tuple(source), diff.index(1))]
    else:
        sources = [(_shift(target, f, -1), f) for f in range(3) if target[f] > 0]
    for src, f in sources:
        if sum(src) == 0:
            continue
        if src not in candidate.spaces:
            raise MissingDegree(src)
        md = multidegree_space(candidate.dims, src)
        for w in multiply_by_variables(candidate.spaces[src].basis_sparse(), md, f):
            if not dst.contains(w):
                return False
    return True


def _products(spaces: dict[Degree, Subspace], dims, target: Degree) -> Subspace:
    md_t = multidegree_space(dims, target)
    vecs = []
    for f in range(3):
        if target[f] == 0:
            continue
        src = _shift(target, f, -1)
        if src in spaces:
            vecs.extend(multiply_by_variables(spaces[src].basis_sparse(), multidegree_space(dims, src), f))
    return Subspace(md_t.dim, vecs)


_DEGREE3 = {
    (2, 1, 0): (1, 1, 0), (1, 2, 0): (1, 1, 0),
    (2, 0, 1): (1, 0, 1), (1, 0, 2): (1, 0, 1),
    (0, 2, 1): (0, 1, 1), (0, 1, 2): (0, 1, 1),
}


def _degree3_check(T: Tensor3, r: int, pair: dict[Degree, Subspace], borel: Borel, complete: bool):
    """Conditions in total degree three for fixed pair-degree pieces.

    Returns ``(ok, spaces_or_failure)``.  Pure degrees such as (2,0,0) are
    not enumerated; leaving them out only shrinks the product spaces, so
    every rejection here is still valid.
    """
    spaces: dict[Degree, Subspace] = dict(pair)
    md = multidegree_space(T.dims, (1, 1, 1))
    M = _products(pair, T.dims, (1, 1, 1))
    tgt = _ambient_target(md, r)
    if M.dim > tgt:
        return False, {"degree": "111", "product_dim": M.dim, "allowed": tgt}
    if complete:
        container = borel_stable_part(annihilator(T, (1, 1, 1)), md, borel)
        full = complete_stable(M, container, tgt, md, borel)
        if full is None:
            return False, {"degree": "111", "reason": "no Borel-fixed completion", "product_dim": M.dim}
        spaces[(1, 1, 1)] = full
    for deg, src in _DEGREE3.items():
        md3 = multidegree_space(T.dims, deg)
        P = _products({src: pair[src]}, T.dims, deg)
        tgt3 = _ambient_target(md3, r)
        if P.dim > tgt3:
            return False, {"degree": "%d%d%d" % deg, "product_dim": P.dim, "allowed": tgt3}
        if complete:
            full = complete_stable(P, Subspace.full(md3.dim), tgt3, md3, borel)
            if full is None:
                return False, {"degree": "%d%d%d" % deg, "reason": "no Borel-fixed completion"}
            spaces[deg] = full
    return True, spaces


def apolarity_feasible(T: Tensor3, r: int, D: int = 3, budget: float | None = None, borel: str | Borel = "auto",
                       max_nodes: int = 200000, max_combinations: int = 20000) -> Feasibility:
    """Run the degree-(1,1,0)-type enumerations and, for ``D >= 3``, the degree-three conditions.

    ``feasible`` means at least one exact candidate survived every check;
    ``inconclusive`` means only strata (or a budget stop) remain;
    ``infeasible`` comes with the first failing condition as certificate.
    """
    if D not in (2, 3):
        raise UnsupportedDegree(f"the degree cap must be 2 or 3, got {D}")
    clock = _Clock(budget)
    B = borel if isinstance(borel, Borel) else borel_for(T, borel)
    stats: dict = {"borel": B.mode, "torus_rank": len(B.torus), "nilpotent_generators": len(B.nilpotent)}
    enums: dict[Degree, PairEnumeration] = {}
    try:
        for deg in PAIR_DEGREES:
            e = feasibility_110(T, r, deg, B, max_nodes=max_nodes, _clock=clock)
            enums[deg] = e
            stats["%d%d%d" % deg] = {"candidates": len(e.candidates), "strata": len(e.strata), "nodes": e.nodes}
            if e.empty:
                cert = {"degree": "%d%d%d" % deg, "reason": e.reason, "multilinear_ranks": list(multilinear_ranks(T))}
                return Feasibility("infeasible", r, e.reason, certificate=cert, stats=stats)
    except ResourceBudgetExceeded as exc:
        return Feasibility("inconclusive", r, "budget", stats={**stats, "message": str(exc)})

    if D == 2:
        cands = []
        strata = []
        combos = itertools.product(*(enums[d].candidates for d in PAIR_DEGREES))
        for triple in itertools.islice(combos, max_combinations):
            cands.append(IdealCandidate(T.dims, r, dict(zip(PAIR_DEGREES, triple)), B.mode))
        for d in PAIR_DEGREES:
            strata.extend(s.to_json_obj() for s in enums[d].strata)
        if cands:
            return Feasibility("feasible", r, None, cands, strata, stats=stats)
        return Feasibility("inconclusive", r, "strata", [], strata, stats=stats)

    options = {d: [("exact", S) for S in enums[d].candidates] + [("stratum", s) for s in enums[d].strata] for d in PAIR_DEGREES}
    candidates: list[IdealCandidate] = []
    surviving_strata: list[dict] = []
    first_failure = None
    checked = 0
    try:
        for combo in itertools.product(*(options[d] for d in PAIR_DEGREES)):
            checked += 1
            if checked > max_combinations:
                raise ResourceBudgetExceeded(f"more than {max_combinations} degree-three combinations", partial=None)
            if checked % 16 == 0:
                clock.check()
            exact = all(kind == "exact" for kind, _ in combo)
            pieces = {d: (obj if kind == "exact" else obj.fixed) for d, (kind, obj) in zip(PAIR_DEGREES, combo)}
            ok, info = _degree3_check(T, r, pieces, B, complete=exact)
            if not ok:
                first_failure = first_failure or info
                continue
            if exact:
                cand = IdealCandidate(T.dims, r, info, B.mode)
                candidates.append(cand)
            else:
                surviving_strata.append({
                    "%d%d%d" % d: (obj.to_json_obj() if kind == "stratum" else {"exact_dim": obj.dim})
                    for d, (kind, obj) in zip(PAIR_DEGREES, combo)
                })
    except ResourceBudgetExceeded as exc:
        stats["message"] = str(exc)
        stats["combinations_checked"] = checked
        return Feasibility("inconclusive", r, "budget", candidates, surviving_strata, stats=stats)
    stats["combinations_checked"] = checked
    if candidates:
        return Feasibility("feasible", r, None, candidates, surviving_strata, stats=stats)
    if surviving_strata:
        return Feasibility("inconclusive", r, "strata", [], surviving_strata, stats=stats)
    return Feasibility("infeasible", r, "degree3", certificate=first_failure or {}, stats=stats)


def point_ideal(m: int, D: int = 3) -> IdealCandidate:
    """Ideal of the ``m`` coordinate points ``[a_l (x) b_l (x) c_l]``, all degrees ``1 <= i+j+k <= D``.

    A monomial lies in it unless all its variables carry the same index.
    """
    dims = (m, m, m)
    spaces = {}
    for total in range(1, D + 1):
        for deg in itertools.product(range(total + 1), repeat=3):
            if sum(deg) != total:
                continue
            md = multidegree_space(dims, deg)
            keep = []
            for t, mono in enumerate(md.monomials):
                support = {p for exps in mono for p, e in enumerate(exps) if e}
                if len(support) > 1:
                    keep.append(t)
            spaces[deg] = Subspace.coordinate(md.dim, keep)
    return IdealCandidate(dims, m, spaces, "symmetry")
