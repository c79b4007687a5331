"""Border-rank lower-bound certificates.

Every certificate carries enough exact data to be re-checked independently:
:func:`verify_certificate` recomputes the witnessing rank from scratch and
compares the implied bound with the recorded one.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Sequence

from .errors import DimensionMismatch, DimensionTooSmall, NotOneGeneric, TensorBoundsError
from .linalg import RationalMatrix, as_fraction, fraction_str, rank_of_rows
from .tensor import (
    FACTORS,
    FactorMapTriple,
    Tensor3,
    _factor_index,
    apply,
    is_1generic,
    is_concise,
    multilinear_ranks,
)

METHODS = ("flattening", "strassen_commutator", "koszul")

# permutation bringing the named factor to the front (the remaining two keep their order)
_FRONT = {0: (0, 1, 2), 1: (1, 0, 2), 2: (2, 0, 1)}


@dataclass
class BoundCertificate:
    method: str
    bound: int
    tensor_hash: str
    witness: dict
    seed: int | None = None
    verified: bool = False

    def to_json_obj(self) -> dict:
        return {
            "method": self.method,
            "bound": self.bound,
            "tensor_hash": self.tensor_hash,
            "witness": self.witness,
            "seed": self.seed,
            "verified": self.verified,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json_obj(cls, obj: dict) -> BoundCertificate:
        return cls(
            method=obj["method"],
            bound=int(obj["bound"]),
            tensor_hash=obj["tensor_hash"],
            witness=obj["witness"],
            seed=obj.get("seed"),
            verified=bool(obj.get("verified", False)),
        )


def _vec_json(v: Sequence) -> list[str]:
    return [fraction_str(x) for x in v]


def _vec_parse(v: Sequence) -> list[Fraction]:
    return [as_fraction(x) for x in v]


def _front(T: Tensor3, factor) -> tuple[Tensor3, int]:
    f = _factor_index(factor)
    return (T if f == 0 else T.permute(_FRONT[f])), f


# ---------------------------------------------------------------------------
# flattening
# ---------------------------------------------------------------------------

def flattening_bound(T: Tensor3) -> BoundCertificate:
    """Largest multilinear rank."""
    ranks = multilinear_ranks(T)
    f = max(range(3), key=lambda t: (ranks[t], -t))
    return BoundCertificate(
        method="flattening",
        bound=ranks[f],
        tensor_hash=T.digest(),
        witness={"factor": FACTORS[f], "rank": ranks[f]},
        verified=True,
    )


# ---------------------------------------------------------------------------
# Strassen's commutator bound
# ---------------------------------------------------------------------------

def _normalized_slices(T: Tensor3, alpha) -> list[RationalMatrix]:
    inv = T.contract(0, alpha).inverse()
    return [inv @ T.contract(0, [int(t == i) for t in range(T.dims[0])]) for i in range(T.dims[0])]


def _commutator(X: RationalMatrix, Y: RationalMatrix) -> RationalMatrix:
    return X @ Y - Y @ X


def _combine(mats: Sequence[RationalMatrix], coeffs: Sequence[Fraction]) -> RationalMatrix:
    n, m = mats[0].shape
    out = [[Fraction(0)] * m for _ in range(n)]
    for M, c in zip(mats, coeffs):
        if not c:
            continue
        for r, row in enumerate(M.rows):
            o = out[r]
            for s, x in enumerate(row):
                if x:
                    o[s] += c * x
    return RationalMatrix(out, m)


def _eligible_alpha(T: Tensor3) -> tuple[Fraction, ...]:
    a, b, c = T.dims
    if b != c:
        raise DimensionMismatch(f"commutator bound needs b == c on the chosen factor, got dims {T.dims}")
    res = is_1generic(T, 0)
    if not res.generic:
        raise NotOneGeneric(f"no invertible element in T(A*) (generic rank {res.achieved_rank} < {b})")
    return res.witness


def _commutator_rank(T: Tensor3, alpha, beta, gamma) -> int:
    X = _normalized_slices(T, alpha)
    return _commutator(_combine(X, beta), _combine(X, gamma)).rank()


def strassen_commutator_bound(T: Tensor3, trials: int = 20, seed: int = 0, factor="A",
                              height: int = 10) -> BoundCertificate:
    """``m + ceil(rank [X_beta, X_gamma] / 2)`` with ``X_beta = T(alpha)^-1 T(beta)``.

    All coordinate pairs are tried, then ``trials`` seeded random integer
    pairs.  Sampling can only understate the bound: any pair gives a valid
    certificate.  Among pairs of maximal rank the lexicographically smallest
    witness wins, so the result does not depend on evaluation order.
    """
    S, f = _front(T, factor)
    alpha = _eligible_alpha(S)
    a, m, _ = S.dims
    X = _normalized_slices(S, alpha)
    pair_comm = {}
    for i, j in combinations(range(a), 2):
        C = _commutator(X[i], X[j])
        if not C.is_zero():
            pair_comm[(i, j)] = C

    def rank_for(beta, gamma) -> int:
        terms, coeffs = [], []
        for (i, j), C in pair_comm.items():
            w = beta[i] * gamma[j] - beta[j] * gamma[i]
            if w:
                terms.append(C)
                coeffs.append(w)
        if not terms:
            return 0
        return _combine(terms, coeffs).rank()

    candidates = []
    for i, j in combinations(range(a), 2):
        beta = tuple(Fraction(int(t == i)) for t in range(a))
        gamma = tuple(Fraction(int(t == j)) for t in range(a))
        candidates.append((beta, gamma))
    rng = random.Random(seed)
    for _ in range(trials):
        beta = tuple(Fraction(rng.randint(-height, height)) for _ in range(a))
        gamma = tuple(Fraction(rng.randint(-height, height)) for _ in range(a))
        candidates.append((beta, gamma))

    best_rank, best = 0, None
    for beta, gamma in candidates:
        r = rank_for(beta, gamma)
        if r > best_rank or (r == best_rank and best is not None and (beta, gamma) < best):
            best_rank, best = r, (beta, gamma)
    if best is None:
        best = candidates[0] if candidates else ((Fraction(0),) * a, (Fraction(0),) * a)
    bound = m + (best_rank + 1) // 2
    return BoundCertificate(
        method="strassen_commutator",
        bound=bound,
        tensor_hash=T.digest(),
        witness={
            "factor": FACTORS[f],
            "m": m,
            "alpha": _vec_json(alpha),
            "beta": _vec_json(best[0]),
            "gamma": _vec_json(best[1]),
            "commutator_rank": best_rank,
        },
        seed=seed,
        verified=True,
    )


@dataclass(frozen=True)
class MinrankResult:
    passed: bool
    alpha: tuple[Fraction, ...]
    witness: tuple[int, int] | None = None
    commutator: RationalMatrix | None = None

    def __bool__(self) -> bool:
        return self.passed


def strassen_minrank_test(T: Tensor3) -> MinrankResult:
    """Check Strassen's equations for minimal border rank on ``T in C^m (x) C^m (x) C^m``.

    Passes iff the normalized slices ``T(alpha)^-1 T(e_i)`` pairwise commute.
    Passing is necessary for border rank ``m``, not sufficient.
    """
    m = T.dims[0]
    if T.dims != (m, m, m):
        raise DimensionMismatch(f"minimal border rank test needs a cube, got dims {T.dims}")
    if not is_concise(T):
        raise TensorBoundsError("minimal border rank test needs a concise tensor")
    alpha = _eligible_alpha(T)
    X = _normalized_slices(T, alpha)
    for i, j in combinations(range(m), 2):
        C = _commutator(X[i], X[j])
        if not C.is_zero():
            return MinrankResult(False, alpha, (i, j), C)
    return MinrankResult(True, alpha)


# ---------------------------------------------------------------------------
# Koszul flattenings
# ---------------------------------------------------------------------------

def _wedge_sign(i: int, S: Sequence[int]) -> int:
    """Sign of ``e_i ^ e_S`` relative to the sorted basis element."""
    return -1 if sum(1 for s in S if s < i) % 2 else 1


def koszul_rows(T: Tensor3, p: int) -> tuple[list[dict[int, Fraction]], int, int]:
    """Koszul map ``L^p A (x) B* -> L^(p+1) A (x) C``.

    Callers restrict ``A`` to ``2p + 1`` dimensions first.  Returns ``(rows, nrows, ncols)``: sparse rows indexed by
    ``(S, k)`` with ``S`` a ``(p+1)``-subset (lexicographic) and columns by
    ``(S', j)`` with ``S'`` a ``p``-subset.  The column ``e_S' (x) beta^j``
    maps to ``sum_{i,k} T[i,j,k] (e_i ^ e_S') (x) c_k``.
    """
    a, b, c = T.dims
    if p < 0 or p + 1 > a:
        raise DimensionTooSmall(f"exterior power {p + 1} of a {a}-dimensional space is zero")
    src = list(combinations(range(a), p))
    dst = list(combinations(range(a), p + 1))
    dst_index = {S: n for n, S in enumerate(dst)}
    rows: dict[int, dict[int, Fraction]] = {}
    by_i: dict[int, list[tuple[int, int, Fraction]]] = {}
    for i, j, k, v in T.nonzero():
        by_i.setdefault(i, []).append((j, k, v))
    for s_idx, S in enumerate(src):
        for i, entries in by_i.items():
            if i in S:
                continue
            target = tuple(sorted(S + (i,)))
            sign = _wedge_sign(i, S)
            t_idx = dst_index[target]
            for j, k, v in entries:
                row = rows.setdefault(t_idx * c + k, {})
                col = s_idx * b + j
                nv = row.get(col, 0) + sign * v
                if nv:
                    row[col] = nv
                else:
                    row.pop(col, None)
    return list(rows.values()), len(dst) * c, len(src) * b


def koszul_rank(T: Tensor3, p: int) -> int:
    rows, _, _ = koszul_rows(T, p)
    return rank_of_rows(rows)


def restrict_A(T: Tensor3, phi: RationalMatrix) -> Tensor3:
    """Apply ``phi : A -> A'`` on the first factor."""
    return apply(FactorMapTriple(phi, RationalMatrix.identity(T.dims[1]), RationalMatrix.identity(T.dims[2])), T)


def _coordinate_restriction(a: int, coords: Sequence[int]) -> RationalMatrix:
    return RationalMatrix([[int(t == s) for t in range(a)] for s in coords], a)


def koszul_bound(T: Tensor3, p: int, strategy: str = "coordinate", *, seed: int = 0, trials: int = 20,
                 explicit: RationalMatrix | None = None, factor="A", max_subsets: int = 1000,
                 height: int = 3) -> BoundCertificate:
    """``ceil(rank / C(2p, p))`` for the Koszul flattening of ``T`` restricted to ``2p+1`` dims.

    ``strategy`` selects the restriction ``phi : A -> C^(2p+1)``:

    ``coordinate``
        every coordinate projection (lexicographic, at most ``max_subsets``),
        then, if none of them gives a full-rank map, ``trials`` seeded random
        restrictions as for ``random``;
    ``coordinate_only``
        the coordinate projections alone;
    ``random``
        ``trials`` seeded random integer matrices with entries in ``[-height, height]``;
    ``explicit``
        the single matrix ``explicit``.

    The search stops early once the Koszul map has full rank.
    """
    S, f = _front(T, factor)
    a = S.dims[0]
    if p < 1:
        raise ValueError("p must be >= 1")
    if 2 * p + 1 > a:
        raise DimensionTooSmall(f"need 2p+1 = {2 * p + 1} <= dim {FACTORS[f]} = {a}")
    n = 2 * p + 1
    full = min(comb(n, p + 1) * S.dims[2], comb(n, p) * S.dims[1])

    def coordinate():
        for count, coords in enumerate(combinations(range(a), n)):
            if count >= max_subsets:
                break
            yield "coordinate", _coordinate_restriction(a, coords)

    def randomized():
        rng = random.Random(seed)
        for _ in range(trials):
            yield "random", RationalMatrix([[rng.randint(-height, height) for _ in range(a)] for _ in range(n)], a)

    def restrictions():
        if strategy in ("coordinate", "coordinate_only"):
            yield from coordinate()
            if strategy == "coordinate":
                yield from randomized()
        elif strategy == "random":
            yield from randomized()
        elif strategy == "explicit":
            if explicit is None:
                raise ValueError("explicit strategy needs a restriction matrix")
            phi = explicit if isinstance(explicit, RationalMatrix) else RationalMatrix(explicit)
            if phi.shape != (n, a):
                raise DimensionMismatch(f"restriction must be {n} x {a}, got {phi.shape}")
            yield "explicit", phi
        else:
            raise ValueError(f"unknown strategy {strategy!r}")

    best_rank, best_phi, source = -1, None, None
    for origin, phi in restrictions():
        r = koszul_rank(restrict_A(S, phi), p)
        if r > best_rank:
            best_rank, best_phi, source = r, phi, origin
            if r == full:
                break
    divisor = comb(2 * p, p)
    bound = -(-best_rank // divisor)
    return BoundCertificate(
        method="koszul",
        bound=bound,
        tensor_hash=T.digest(),
        witness={
            "factor": FACTORS[f],
            "p": p,
            "strategy": strategy,
            "source": source,
            "restriction": best_phi.to_json(),
            "rank": best_rank,
            "divisor": divisor,
        },
        seed=seed if source == "random" else None,
        verified=True,
    )


# ---------------------------------------------------------------------------
# verification and best-of
# ---------------------------------------------------------------------------

def recompute_bound(cert: BoundCertificate, T: Tensor3) -> int:
    """Re-derive the bound from the witness alone."""
    w = cert.witness
    if cert.method == "flattening":
        f = _factor_index(w["factor"])
        return multilinear_ranks(T)[f]
    if cert.method == "strassen_commutator":
        S, _ = _front(T, w["factor"])
        r = _commutator_rank(S, _vec_parse(w["alpha"]), _vec_parse(w["beta"]), _vec_parse(w["gamma"]))
        if r != w["commutator_rank"]:
            return -1
        return S.dims[1] + (r + 1) // 2
    if cert.method == "koszul":
        S, _ = _front(T, w["factor"])
        phi = RationalMatrix.from_json(w["restriction"])
        p = int(w["p"])
        r = koszul_rank(restrict_A(S, phi), p)
        if r != w["rank"]:
            return -1
        return -(-r // comb(2 * p, p))
    raise ValueError(f"unknown certificate method {cert.method!r}")


def verify_certificate(cert: BoundCertificate, T: Tensor3) -> bool:
    if cert.tensor_hash != T.digest():
        return False
    return recompute_bound(cert, T) == cert.bound


def best_bound(T: Tensor3, budget: float = 60.0, seed: int = 0, max_p: int | None = None) -> BoundCertificate:
    """Run every applicable method and return the largest certificate.

    The budget (seconds) is checked between method invocations, so a started
    computation always finishes.  Ties keep the earlier method in the order
    flattening, commutator, Koszul.
    """
    start = time.monotonic()
    best = flattening_bound(T)
    if T.is_zero():
        return best

    def out_of_time() -> bool:
        return time.monotonic() - start > budget

    for f in range(3):
        if out_of_time():
            break
        S, _ = _front(T, f)
        if S.dims[1] != S.dims[2]:
            continue
        try:
            cert = strassen_commutator_bound(T, trials=10, seed=seed, factor=FACTORS[f])
        except (NotOneGeneric, DimensionMismatch):
            continue
        if cert.bound > best.bound:
            best = cert
    for f in range(3):
        dim = T.dims[f]
        top = (dim - 1) // 2 if max_p is None else min(max_p, (dim - 1) // 2)
        for p in range(1, top + 1):
            for strategy in ("coordinate", "random"):
                if out_of_time():
                    return best
                cert = koszul_bound(T, p, strategy, seed=seed, trials=5, factor=FACTORS[f], max_subsets=200)
                if cert.bound > best.bound:
                    best = cert
    return best
