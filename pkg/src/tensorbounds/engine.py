"""Run a bilinear decomposition of M<l,m,n> as a recursive multiplication.

The recursion is evaluated breadth first: every block product at one level
is stacked along a leading batch axis, so a whole level is three tensordots.
Block ``(u, v)`` of the left operand is coordinate ``u*m + v`` of the
decomposition's ``u`` vectors, block ``(v, w)`` of the right operand is
coordinate ``v*n + w`` of the ``v`` vectors, and block ``(u, w)`` of the
product is read from coordinate ``w*l + u`` of the ``w`` vectors.

Operation counting: forming a linear combination of ``t`` blocks costs
``t - 1`` block additions (subtraction counts as an addition), and every
coefficient other than ``+1``/``-1`` costs one scalar multiplication per
block entry.  Leaves are multiplied classically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .decomposition import BilinearDecomposition, classical_decomposition, strassen_decomposition, verify_decomposition
from .errors import ShapeError
from .tensor import make_matmul

_INT64_SAFE = 2 ** 62


@dataclass
class OpCount:
    scalar_mults: int = 0
    scalar_adds: int = 0
    recursion_depth: int = 0
    base_dims: tuple[int, int, int] = (2, 2, 2)
    leaf_dims: tuple[int, int, int] = (1, 1, 1)
    padded_shape: tuple[int, int, int] = (0, 0, 0)
    effective_shape: tuple[int, int, int] = (0, 0, 0)

    def __add__(self, other: OpCount) -> OpCount:
        return OpCount(
            self.scalar_mults + other.scalar_mults,
            self.scalar_adds + other.scalar_adds,
            max(self.recursion_depth, other.recursion_depth),
            self.base_dims,
            self.leaf_dims,
            self.padded_shape,
            self.effective_shape,
        )

    def to_json_obj(self) -> dict:
        return {
            "mults": str(self.scalar_mults),
            "adds": str(self.scalar_adds),
            "depth": self.recursion_depth,
            "base_dims": list(self.base_dims),
            "leaf_dims": list(self.leaf_dims),
            "padded_shape": list(self.padded_shape),
            "effective_shape": list(self.effective_shape),
        }


@dataclass
class ExponentEstimate:
    samples: list[tuple[int, int]]
    fitted_exponent: float
    reference: float

    def to_json_obj(self) -> dict:
        return {
            "samples": [[n, str(c)] for n, c in self.samples],
            "exponent_fit": self.fitted_exponent,
            "reference": self.reference,
        }


def check_bilinear_algorithm(D: BilinearDecomposition, l: int, m: int, n: int) -> bool:
    if D.mode != "exact" or D.r == 0 or D.dims != (l * m, m * n, n * l):
        return False
    return verify_decomposition(make_matmul(l, m, n), D).ok


def named_algorithm(name: str) -> tuple[BilinearDecomposition, tuple[int, int, int]]:
    if name == "strassen":
        return strassen_decomposition(), (2, 2, 2)
    if name == "classical":
        return classical_decomposition(2, 2, 2), (2, 2, 2)
    raise ValueError(f"unknown algorithm {name!r}")


def infer_base_dims(D: BilinearDecomposition) -> tuple[int, int, int]:
    """Recover (l, m, n) from factor sizes ``lm, mn, nl``."""
    x, y, z = D.dims
    prod = math.isqrt(x * y * z)
    if prod * prod != x * y * z:
        raise ShapeError(f"factor sizes {D.dims} are not of the form (lm, mn, nl)")
    l, m, n = prod // y, prod // z, prod // x
    if (l * m, m * n, n * l) != D.dims:
        raise ShapeError(f"factor sizes {D.dims} are not of the form (lm, mn, nl)")
    return l, m, n


@dataclass
class _Plan:
    base: tuple[int, int, int]
    depth: int
    leaf: tuple[int, int, int]
    U: list[list]
    V: list[list]
    W: list[list]
    # per level operation counts for one block product: (adds, mults) per block entry,
    # separately for the left, right and output combinations
    cost: dict = field(default_factory=dict)

    @property
    def padded(self) -> tuple[int, int, int]:
        l, m, n = self.base
        a, b, c = self.leaf
        return a * l ** self.depth, b * m ** self.depth, c * n ** self.depth


def _combo_cost(rows: Sequence[Sequence]) -> tuple[int, int]:
    adds = mults = 0
    for row in rows:
        nz = [x for x in row if x != 0]
        adds += max(len(nz) - 1, 0)
        mults += sum(1 for x in nz if x not in (1, -1))
    return adds, mults


def _plan(D: BilinearDecomposition, shape: tuple[int, int, int], cutoff: int) -> _Plan:
    l, m, n = infer_base_dims(D)
    P, Q, S = shape
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")

    def done(k):
        return all(
            base == 1 or -(-size // base ** k) <= cutoff for size, base in ((P, l), (Q, m), (S, n))
        )

    k = 0
    if max(l, m, n) > 1:
        while not done(k):
            k += 1
    leaf = (-(-P // l ** k), -(-Q // m ** k), -(-S // n ** k))
    U = [list(t[0]) for t in D.triples]
    V = [list(t[1]) for t in D.triples]
    # output coefficients indexed by product block (u, w) = u*n + w
    W = [[t[2][w * l + u] for u in range(l) for w in range(n)] for t in D.triples]
    Wt = [list(col) for col in zip(*W)]
    plan = _Plan((l, m, n), k, leaf, U, V, W)
    plan.cost = {"left": _combo_cost(U), "right": _combo_cost(V), "out": _combo_cost(Wt)}
    return plan


def _count(plan: _Plan) -> tuple[int, int]:
    """Closed-form operation counts; ``recursive_multiply`` tallies the same sums level by level."""
    l, m, n = plan.base
    r = len(plan.U)
    mults = adds = 0
    batch = 1
    pa, pb, pc = plan.padded
    for _ in range(plan.depth):
        pa, pb, pc = pa // l, pb // m, pc // n
        la, lm_ = plan.cost["left"]
        ra, rm = plan.cost["right"]
        oa, om = plan.cost["out"]
        adds += batch * (la * pa * pb + ra * pb * pc + oa * pa * pc)
        mults += batch * (lm_ * pa * pb + rm * pb * pc + om * pa * pc)
        batch *= r
    a, b, c = plan.leaf
    mults += batch * a * b * c
    adds += batch * a * c * (b - 1)
    return mults, adds


def count_operations(D: BilinearDecomposition, shape: tuple[int, int, int], cutoff: int = 1) -> OpCount:
    """Operation counts of ``recursive_multiply`` on a ``P x Q`` times ``Q x S`` product, without running it."""
    plan = _plan(D, shape, cutoff)
    mults, adds = _count(plan)
    return OpCount(mults, adds, plan.depth, plan.base, plan.leaf, plan.padded, tuple(shape))


def _coeff_array(rows, exact: bool):
    if exact:
        return np.array([[int(x) if Fraction(x).denominator == 1 else Fraction(x) for x in row] for row in rows], dtype=object)
    return np.array([[float(x) for x in row] for row in rows])


def _as_array(M) -> np.ndarray:
    arr = np.asarray(M)
    if arr.ndim != 2:
        raise ShapeError(f"expected a matrix, got array of shape {arr.shape}")
    return arr


def _magnitude_bound(A: np.ndarray, B: np.ndarray, plan: _Plan) -> int:
    def l1(rows):
        return max((sum(abs(Fraction(x)) for x in row) for row in rows), default=0)

    cols = [list(c) for c in zip(*plan.W)]
    grow = l1(plan.U) * l1(plan.V) * max(l1(cols), 1)
    amax = max((abs(int(x)) for x in A.flat), default=0)
    bmax = max((abs(int(x)) for x in B.flat), default=0)
    return int(amax * bmax * plan.leaf[1] * grow ** plan.depth) + 1


def _split(X: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """(N, R, C) -> (N, rows*cols, R/rows, C/cols) with block (i, j) at index i*cols + j."""
    N, R, C = X.shape
    Y = X.reshape(N, rows, R // rows, cols, C // cols).transpose(0, 1, 3, 2, 4)
    return Y.reshape(N, rows * cols, R // rows, C // cols)


def _join(Y: np.ndarray, rows: int, cols: int) -> np.ndarray:
    N, _, p, q = Y.shape
    return Y.reshape(N, rows, cols, p, q).transpose(0, 1, 3, 2, 4).reshape(N, rows * p, cols * q)


def recursive_multiply(A, B, D: BilinearDecomposition, cutoff: int = 1, *, check: bool = True):
    """Multiply ``A @ B`` with the recursive algorithm defined by ``D``.

    Inputs are zero padded to ``leaf * base**depth`` in each dimension and
    the result is cropped back.  Integer inputs are computed in int64 when a
    worst-case magnitude bound allows it and with Python integers otherwise;
    Fraction inputs stay exact; float inputs take a float path.
    """
    A = _as_array(A)
    B = _as_array(B)
    if A.shape[1] != B.shape[0]:
        raise ShapeError(f"cannot multiply {A.shape} by {B.shape}")
    l, m, n = infer_base_dims(D)
    if check and not check_bilinear_algorithm(D, l, m, n):
        raise ValueError("decomposition is not a valid bilinear algorithm for M<%d,%d,%d>" % (l, m, n))
    P, Q = A.shape
    S = B.shape[1]
    plan = _plan(D, (P, Q, S), cutoff)

    is_float = A.dtype.kind == "f" or B.dtype.kind == "f"
    if is_float:
        dtype = np.float64
        exact_coeffs = False
    else:
        has_fraction = any(isinstance(x, Fraction) for x in A.flat) or any(isinstance(x, Fraction) for x in B.flat)
        has_fraction = has_fraction or any(Fraction(x).denominator != 1 for t in D.triples for v in t for x in v)
        exact_coeffs = True
        if not has_fraction and _magnitude_bound(A, B, plan) < _INT64_SAFE:
            dtype = np.int64
            exact_coeffs = False
        else:
            dtype = object
    Pp, Qp, Sp = plan.padded
    X = np.zeros((1, Pp, Qp), dtype=dtype)
    Y = np.zeros((1, Qp, Sp), dtype=dtype)
    if dtype is object:
        X[0, :P, :Q] = np.vectorize(lambda x: x if isinstance(x, Fraction) else int(x), otypes=[object])(A)
        Y[0, :Q, :S] = np.vectorize(lambda x: x if isinstance(x, Fraction) else int(x), otypes=[object])(B)
    else:
        X[0, :P, :Q] = A
        Y[0, :Q, :S] = B

    if dtype is np.int64:
        Uc = np.array(plan.U, dtype=np.int64)
        Vc = np.array(plan.V, dtype=np.int64)
        Wc = np.array(plan.W, dtype=np.int64)
    else:
        Uc = _coeff_array(plan.U, exact_coeffs)
        Vc = _coeff_array(plan.V, exact_coeffs)
        Wc = _coeff_array(plan.W, exact_coeffs)
    r = len(plan.U)

    count = OpCount(0, 0, plan.depth, plan.base, plan.leaf, plan.padded, (P, Q, S))
    for _ in range(plan.depth):
        N = X.shape[0]
        Xb = _split(X, l, m)
        Yb = _split(Y, m, n)
        p, q = Xb.shape[2:]
        s = Yb.shape[3]
        la, lm_ = plan.cost["left"]
        ra, rm = plan.cost["right"]
        count.scalar_adds += N * (la * p * q + ra * q * s)
        count.scalar_mults += N * (lm_ * p * q + rm * q * s)
        # (N, lm, p, q) x (r, lm) -> (N, r, p, q)
        X = np.tensordot(Xb, Uc, axes=([1], [1])).transpose(0, 3, 1, 2).reshape(N * r, p, q)
        Y = np.tensordot(Yb, Vc, axes=([1], [1])).transpose(0, 3, 1, 2).reshape(N * r, q, s)
    if dtype is object:
        Z = np.array([x @ y for x, y in zip(X, Y)], dtype=object).reshape(X.shape[0], X.shape[1], Y.shape[2])
    else:
        Z = np.matmul(X, Y)
    a, b, c = plan.leaf
    count.scalar_mults += X.shape[0] * a * b * c
    count.scalar_adds += X.shape[0] * a * c * (b - 1)
    for _ in range(plan.depth):
        Nr, p, s = Z.shape
        N = Nr // r
        oa, om = plan.cost["out"]
        count.scalar_adds += N * oa * p * s
        count.scalar_mults += N * om * p * s
        Zb = np.tensordot(Z.reshape(N, r, p, s), Wc, axes=([1], [0]))  # (N, p, s, l*n)
        Z = _join(Zb.transpose(0, 3, 1, 2), l, n)
    return Z[0, :P, :S], count


def estimate_exponent(D: BilinearDecomposition, sizes: Sequence[int], *, execute: bool = False, cutoff: int = 1) -> ExponentEstimate:
    """Least-squares slope of log(mult count) against log(size) for square products.

    With ``execute=True`` the products are actually run on random integer
    matrices (seeded) and the counter read back; otherwise the closed-form
    count is used.  Both give identical counts.
    """
    l, m, n = infer_base_dims(D)
    if not (l == m == n):
        raise ShapeError("exponent estimates need a square base case")
    if len(sizes) < 2:
        raise ValueError("need at least two sizes")
    rng = np.random.default_rng(0)
    samples = []
    for N in sizes:
        if execute:
            A = rng.integers(-3, 4, size=(N, N))
            B = rng.integers(-3, 4, size=(N, N))
            _, cnt = recursive_multiply(A, B, D, cutoff)
        else:
            cnt = count_operations(D, (N, N, N), cutoff)
        samples.append((int(N), cnt.scalar_mults))
    xs = np.log([s for s, _ in samples])
    ys = np.log([float(c) for _, c in samples])
    slope = float(np.polyfit(xs, ys, 1)[0])
    reference = math.log(D.r) / math.log(l) if l > 1 else float("nan")
    return ExponentEstimate(samples, slope, reference)
