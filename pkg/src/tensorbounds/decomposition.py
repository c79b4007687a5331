"""Rank decompositions: exact verification, ALS search, border families.

The ALS search is deliberately unregularized by default.  When the target
rank is below the tensor rank but not below the border rank, the fit keeps
improving while the rank-one terms grow without bound; that blow-up is what
:func:`als_search` reports as ``diverged_blowup``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatch, NotConvergent
from .linalg import as_fraction, fraction_str
from .tensor import Tensor3, make_matmul

log = logging.getLogger(__name__)

CONVERGED = "converged"
BLOWUP = "diverged_blowup"
EXHAUSTED = "budget_exhausted"
_OUTCOME_PRIORITY = {CONVERGED: 0, BLOWUP: 1, EXHAUSTED: 2}


@dataclass
class BilinearDecomposition:
    """``sum_j u_j (x) v_j (x) w_j``.

    In ``exact`` mode the vectors hold Fractions; in ``float`` mode they are
    float sequences.
    """

    triples: list[tuple[list, list, list]]
    mode: str = "exact"

    def __post_init__(self):
        if self.mode not in ("exact", "float"):
            raise ValueError(f"mode must be 'exact' or 'float', got {self.mode!r}")
        conv = as_fraction if self.mode == "exact" else float
        self.triples = [tuple([conv(x) for x in vec] for vec in t) for t in self.triples]
        if self.triples:
            shapes = {tuple(len(v) for v in t) for t in self.triples}
            if len(shapes) != 1:
                raise DimensionMismatch(f"inconsistent factor lengths {sorted(shapes)}")

    @property
    def r(self) -> int:
        return len(self.triples)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(len(v) for v in self.triples[0])

    def tensor(self) -> Tensor3:
        """Exact sum (exact mode only)."""
        if self.mode != "exact":
            raise ValueError("tensor() needs an exact decomposition; use reconstruct() for floats")
        a, b, c = self.dims
        data = [Fraction(0)] * (a * b * c)
        for u, v, w in self.triples:
            for i, x in enumerate(u):
                if not x:
                    continue
                for j, y in enumerate(v):
                    if not y:
                        continue
                    xy = x * y
                    base = (i * b + j) * c
                    for k, z in enumerate(w):
                        if z:
                            data[base + k] += xy * z
        return Tensor3((a, b, c), data)

    def reconstruct(self) -> np.ndarray:
        """Float sum, accumulated triple by triple in list order."""
        acc = np.zeros(self.dims)
        for u, v, w in self.triples:
            acc += np.einsum("i,j,k->ijk", np.asarray(u, float), np.asarray(v, float), np.asarray(w, float))
        return acc

    def to_json_obj(self) -> dict:
        if self.mode == "exact":
            enc = fraction_str
        else:
            enc = float
        return {
            "r": self.r,
            "mode": self.mode,
            "triples": [[[enc(x) for x in vec] for vec in t] for t in self.triples],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), separators=(",", ":"))

    @classmethod
    def from_json_obj(cls, obj: dict) -> BilinearDecomposition:
        D = cls([tuple(t) for t in obj["triples"]], obj.get("mode", "exact"))
        if "r" in obj and int(obj["r"]) != D.r:
            raise DimensionMismatch(f"declared r={obj['r']} but {D.r} triples given")
        return D


# ---------------------------------------------------------------------------
# shipped decompositions of 2x2 matrix multiplication
# ---------------------------------------------------------------------------

def _mm_vectors(l: int, m: int, n: int):
    """Helpers mapping matrix entries (1-based) to factor coordinates of ``make_matmul``."""

    def x(u, v):  # entry (u, v) of the left factor
        return (u - 1) * m + (v - 1)

    def y(v, w):  # entry (v, w) of the right factor
        return (v - 1) * n + (w - 1)

    def z(u, w):  # entry (u, w) of the product lives at C-coordinate (w, u)
        return (w - 1) * l + (u - 1)

    return x, y, z


def _vec(n: int, entries: dict) -> list[Fraction]:
    out = [Fraction(0)] * n
    for idx, val in entries.items():
        out[idx] = Fraction(val)
    return out


def strassen_decomposition(c22_variant: str = "standard") -> BilinearDecomposition:
    """Strassen's seven products for 2x2 matrices.

    Products (``a`` entries of the left matrix, ``b`` of the right)::

        I   = (a11 + a22)(b11 + b22)     V   = (a11 + a12) b22
        II  = (a21 + a22) b11            VI  = (-a11 + a21)(b11 + b12)
        III = a11 (b12 - b22)            VII = (a12 - a22)(b21 + b22)
        IV  = a22 (-b11 + b21)

    Recombination: ``c11 = I + IV - V + VII``, ``c21 = II + IV``,
    ``c12 = III + V``, ``c22 = I + III - II + VI``.  ``c22_variant="wrong"``
    uses ``c22 = II + VI`` instead; that variant is not a valid algorithm.
    """
    x, y, z = _mm_vectors(2, 2, 2)
    U = [
        {x(1, 1): 1, x(2, 2): 1},
        {x(2, 1): 1, x(2, 2): 1},
        {x(1, 1): 1},
        {x(2, 2): 1},
        {x(1, 1): 1, x(1, 2): 1},
        {x(1, 1): -1, x(2, 1): 1},
        {x(1, 2): 1, x(2, 2): -1},
    ]
    V = [
        {y(1, 1): 1, y(2, 2): 1},
        {y(1, 1): 1},
        {y(1, 2): 1, y(2, 2): -1},
        {y(1, 1): -1, y(2, 1): 1},
        {y(2, 2): 1},
        {y(1, 1): 1, y(1, 2): 1},
        {y(2, 1): 1, y(2, 2): 1},
    ]
    # recombination: which product contributes to which c_uw with what sign
    recomb = {
        (1, 1): {0: 1, 3: 1, 4: -1, 6: 1},
        (2, 1): {1: 1, 3: 1},
        (1, 2): {2: 1, 4: 1},
        (2, 2): {0: 1, 2: 1, 1: -1, 5: 1},
    }
    if c22_variant == "wrong":
        recomb[(2, 2)] = {1: 1, 5: 1}
    elif c22_variant != "standard":
        raise ValueError(f"unknown variant {c22_variant!r}")
    W = [dict() for _ in range(7)]
    for (u, w), contrib in recomb.items():
        for prod, sign in contrib.items():
            W[prod][z(u, w)] = sign
    return BilinearDecomposition([(_vec(4, U[t]), _vec(4, V[t]), _vec(4, W[t])) for t in range(7)], "exact")


def classical_decomposition(l: int = 2, m: int = 2, n: int = 2) -> BilinearDecomposition:
    """One product ``x_uv y_vw`` per index chain; ``l*m*n`` terms."""
    x, y, z = _mm_vectors(l, m, n)
    triples = []
    for u in range(1, l + 1):
        for v in range(1, m + 1):
            for w in range(1, n + 1):
                triples.append((_vec(l * m, {x(u, v): 1}), _vec(m * n, {y(v, w): 1}), _vec(n * l, {z(u, w): 1})))
    return BilinearDecomposition(triples, "exact")


def unit_decomposition(r: int) -> BilinearDecomposition:
    return BilinearDecomposition(
        [(_vec(r, {l: 1}), _vec(r, {l: 1}), _vec(r, {l: 1})) for l in range(r)], "exact"
    )


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Verification:
    ok: bool
    residual: Fraction | float

    def __bool__(self) -> bool:
        return self.ok


def verify_decomposition(T: Tensor3, D: BilinearDecomposition, tol: float = 0.0) -> Verification:
    """Exact mode: entrywise equality, residual is the exact max-abs error.

    Float mode: max-norm residual; ``ok`` iff it is at most ``tol``.
    """
    if D.r and D.dims != T.dims:
        raise DimensionMismatch(f"decomposition dims {D.dims} do not match tensor dims {T.dims}")
    if D.mode == "exact":
        S = D.tensor() if D.r else Tensor3.zeros(T.dims)
        res = max((abs(x - y) for x, y in zip(S.data, T.data)), default=Fraction(0))
        return Verification(res == 0, res)
    approx = D.reconstruct() if D.r else np.zeros(T.dims)
    res = float(np.max(np.abs(T.to_numpy() - approx)))
    return Verification(res <= tol, res)


# ---------------------------------------------------------------------------
# ALS
# ---------------------------------------------------------------------------

@dataclass
class ALSOptions:
    seed: int = 0
    max_iters: int = 5000
    restarts: int = 8
    residual_tol: float = 1e-8
    blowup_residual_tol: float = 1e-4
    blowup_threshold: float = 1e3
    regularization: float = 0.0
    init_scale: float = 1.0
    check_every: int = 1
    line_search: bool = True


@dataclass
class SearchTrace:
    seed: int
    iterations: int = 0
    residual_history: list[float] = field(default_factory=list)
    coeff_history: list[float] = field(default_factory=list)
    outcome: str = EXHAUSTED
    condition_warnings: int = 0
    restart: int = 0

    def to_json_obj(self) -> dict:
        return {
            "seed": self.seed,
            "restart": self.restart,
            "iterations": self.iterations,
            "outcome": self.outcome,
            "condition_warnings": self.condition_warnings,
            "final_residual": self.residual_history[-1] if self.residual_history else None,
            "final_coeff_norm": self.coeff_history[-1] if self.coeff_history else None,
            "residual_history": self.residual_history,
            "coeff_history": self.coeff_history,
        }

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("inf")

    @property
    def final_coeff(self) -> float:
        return self.coeff_history[-1] if self.coeff_history else 0.0


def classify(residual: float, coeff: float, opts: ALSOptions) -> str:
    """Outcome of one (residual, coefficient max-norm) observation."""
    if residual < opts.blowup_residual_tol and coeff > opts.blowup_threshold:
        return BLOWUP
    if residual < opts.residual_tol:
        return CONVERGED
    return EXHAUSTED


def _reconstruct(F: Sequence[np.ndarray]) -> np.ndarray:
    A, B, C = F
    acc = np.zeros((A.shape[0], B.shape[0], C.shape[0]))
    for j in range(A.shape[1]):
        acc += np.einsum("i,j,k->ijk", A[:, j], B[:, j], C[:, j])
    return acc


def _coeff_norm(F: Sequence[np.ndarray]) -> float:
    """Largest max-norm of a single rank-one term."""
    A, B, C = F
    terms = np.max(np.abs(A), axis=0) * np.max(np.abs(B), axis=0) * np.max(np.abs(C), axis=0)
    return float(np.max(terms)) if terms.size else 0.0


def _cp(A: np.ndarray, B: np.ndarray, C: np.ndarray) -> np.ndarray:
    return np.einsum("ir,jr,kr->ijk", A, B, C)


def _line_step(X: np.ndarray, F: Sequence[np.ndarray], D: Sequence[np.ndarray]) -> float:
    """Exact minimizer over ``s`` of ``||X - [[F + s D]]||_F``.

    The residual along the line is a cubic in ``s``, so its squared norm is a
    sextic; the best real critical point is taken (``s = 1`` is the plain
    ALS step and always a candidate).
    """
    A, B, C = F
    dA, dB, dC = D
    P = [
        X - _cp(A, B, C),
        -(_cp(dA, B, C) + _cp(A, dB, C) + _cp(A, B, dC)),
        -(_cp(dA, dB, C) + _cp(dA, B, dC) + _cp(A, dB, dC)),
        -_cp(dA, dB, dC),
    ]
    P = [p.ravel() for p in P]
    poly = np.zeros(7)
    for i in range(4):
        for j in range(4):
            poly[i + j] += P[i] @ P[j]
    npoly = np.polynomial.polynomial
    crit = npoly.polyroots(npoly.polyder(poly))
    cands = [1.0] + [float(x.real) for x in crit if abs(x.imag) < 1e-9 * max(1.0, abs(x))]
    return min(cands, key=lambda s: (npoly.polyval(s, poly), abs(s - 1.0)))


def _als_run(X: np.ndarray, r: int, seed: int, opts: ALSOptions, restart: int) -> tuple[list[np.ndarray], SearchTrace]:
    rng = np.random.default_rng(seed)
    dims = X.shape
    F = [opts.init_scale * rng.standard_normal((d, r)) for d in dims]
    unfold = [
        X.reshape(dims[0], -1),
        np.moveaxis(X, 1, 0).reshape(dims[1], -1),
        np.moveaxis(X, 2, 0).reshape(dims[2], -1),
    ]
    trace = SearchTrace(seed=seed, restart=restart)
    eye = np.eye(r)
    for it in range(1, opts.max_iters + 1):
        checking = it % opts.check_every == 0 or it == opts.max_iters
        prev = list(F)
        for mode in range(3):
            o1, o2 = [t for t in range(3) if t != mode]
            # Khatri-Rao product matching the C-order unfoldings above
            kr = np.einsum("ir,jr->ijr", F[o1], F[o2]).reshape(-1, r)
            gram = (F[o1].T @ F[o1]) * (F[o2].T @ F[o2])
            if opts.regularization:
                gram = gram + opts.regularization * eye
            rhs = unfold[mode] @ kr
            if checking and np.linalg.cond(gram) > 1e12:
                trace.condition_warnings += 1
            try:
                F[mode] = np.linalg.solve(gram, rhs.T).T
            except np.linalg.LinAlgError:
                F[mode] = np.linalg.lstsq(gram, rhs.T, rcond=None)[0].T
        if opts.line_search:
            step = [f - p for f, p in zip(F, prev)]
            s = _line_step(X, prev, step)
            if s != 1.0:
                F = [p + s * d for p, d in zip(prev, step)]
        if not checking:
            continue
        res = float(np.max(np.abs(X - _reconstruct(F))))
        coeff = _coeff_norm(F)
        trace.iterations = it
        trace.residual_history.append(res)
        trace.coeff_history.append(coeff)
        if not np.isfinite(res):
            trace.outcome = EXHAUSTED
            break
        outcome = classify(res, coeff, opts)
        if outcome != EXHAUSTED:
            trace.outcome = outcome
            break
    else:
        trace.outcome = EXHAUSTED
    if trace.condition_warnings:
        log.debug("restart %d: %d ill-conditioned normal equations", restart, trace.condition_warnings)
    return F, trace


class ALSResult(NamedTuple):
    decomposition: BilinearDecomposition | None
    trace: SearchTrace
    restarts: list[SearchTrace]


def als_search(T: Tensor3, r: int, opts: ALSOptions | None = None, **kw) -> ALSResult:
    """Alternating least squares over the three factor matrices.

    Each restart draws its own seed from ``opts.seed``.  Restarts are
    compared by (outcome, final residual) with ``converged`` ahead of
    ``diverged_blowup`` ahead of ``budget_exhausted``; the selected restart's
    factors are returned as a float decomposition when it converged.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    opts = opts or ALSOptions()
    for k, v in kw.items():
        if not hasattr(opts, k):
            raise TypeError(f"unknown ALS option {k!r}")
        setattr(opts, k, v)
    X = T.to_numpy()
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(opts.seed).spawn(opts.restarts)]
    runs = [_als_run(X, r, s, opts, t) for t, s in enumerate(seeds)]
    best_idx = min(range(len(runs)), key=lambda t: (_OUTCOME_PRIORITY[runs[t][1].outcome], runs[t][1].final_residual, t))
    F, trace = runs[best_idx]
    decomposition = None
    if trace.outcome == CONVERGED:
        decomposition = BilinearDecomposition(
            [(F[0][:, j].tolist(), F[1][:, j].tolist(), F[2][:, j].tolist()) for j in range(r)], "float"
        )
    return ALSResult(decomposition, trace, [t for _, t in runs])


# ---------------------------------------------------------------------------
# border families
# ---------------------------------------------------------------------------

Laurent = dict  # exponent -> Fraction


def _laurent(x) -> Laurent:
    if isinstance(x, dict):
        return {int(e): as_fraction(c) for e, c in x.items() if as_fraction(c) != 0}
    c = as_fraction(x)
    return {0: c} if c else {}


def _lmul(p: Laurent, q: Laurent) -> Laurent:
    out: Laurent = {}
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            out[e1 + e2] = out.get(e1 + e2, 0) + c1 * c2
    return {e: c for e, c in out.items() if c}


@dataclass
class BorderFamily:
    """``t**(-t_power) * sum_j u_j(t) (x) v_j(t) (x) w_j(t)``.

    Vector entries are Laurent polynomials in ``t``: a number (constant) or
    a mapping ``{exponent: coefficient}``.
    """

    triples: list
    t_power: int = 0

    def __post_init__(self):
        self.triples = [tuple([_laurent(x) for x in vec] for vec in t) for t in self.triples]

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(len(v) for v in self.triples[0])


@dataclass
class BorderEvaluation:
    expansion: dict[int, Tensor3]
    limit: Tensor3
    value: Tensor3 | None
    matches_target: bool | None


def border_decomposition_eval(family: BorderFamily, t0=None, target: Tensor3 | None = None) -> BorderEvaluation:
    """Expand the family exactly in powers of ``t`` and take ``t -> 0``.

    Raises NotConvergent if a negative power of ``t`` survives.  ``t0``
    (nonzero rational) additionally evaluates the family at that point.
    """
    a, b, c = family.dims
    coeffs: dict[int, dict[tuple[int, int, int], Fraction]] = {}
    for u, v, w in family.triples:
        for i, pu in enumerate(u):
            if not pu:
                continue
            for j, pv in enumerate(v):
                if not pv:
                    continue
                puv = _lmul(pu, pv)
                for k, pw in enumerate(w):
                    if not pw:
                        continue
                    for e, x in _lmul(puv, pw).items():
                        slot = coeffs.setdefault(e - family.t_power, {})
                        slot[(i, j, k)] = slot.get((i, j, k), 0) + x
    expansion = {}
    for e in sorted(coeffs):
        T = Tensor3.from_sparse((a, b, c), coeffs[e])
        if not T.is_zero():
            expansion[e] = T
    bad = [e for e in expansion if e < 0]
    if bad:
        raise NotConvergent(f"terms of order t^{min(bad)} survive after normalization")
    limit = expansion.get(0, Tensor3.zeros((a, b, c)))
    value = None
    if t0 is not None:
        t0 = as_fraction(t0)
        if t0 == 0:
            raise ValueError("evaluate at a nonzero t0; use the limit for t = 0")
        value = Tensor3.zeros((a, b, c))
        for e, T in expansion.items():
            value = value + T.scale(t0 ** e)
    matches = None if target is None else (limit == target)
    return BorderEvaluation(expansion, limit, value, matches)


def tangent_family() -> BorderFamily:
    """``((a1 + t a2)(b1 + t b2)(c1 + t c2) - a1 b1 c1) / t`` in ``C^2 (x) C^2 (x) C^2``."""
    p = [1, {1: 1}]
    return BorderFamily([(p, p, p), ([-1, 0], [1, 0], [1, 0])], t_power=1)


def matmul_check(D: BilinearDecomposition, l: int, m: int, n: int) -> bool:
    return bool(verify_decomposition(make_matmul(l, m, n), D))
