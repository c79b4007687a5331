"""Order-3 tensors over the rationals, the standard tensor families, and
the basic multilinear operations on them.

Index conventions (0-based internally, 1-based in JSON):

* A tensor of dims ``(a, b, c)`` stores ``T[i, j, k]`` at flat position
  ``(i*b + j)*c + k``.
* ``make_matmul(l, m, n)``: the A index enumerates pairs ``(u, v)`` of
  ``[l] x [m]`` row-major (``u*m + v``), B enumerates ``(v, w)`` of
  ``[m] x [n]`` (``v*n + w``), C enumerates ``(w, u)`` of ``[n] x [l]``
  (``w*l + u``).  ``T`` is the coordinate tensor of ``trace(XYZ)``.  Read as a
  bilinear map, the C coordinate ``(w, u)`` carries entry ``(u, w)`` of the
  product ``XY``.
* Kronecker products pair indices row-major: ``(i, i')`` becomes
  ``i*a' + i'``.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence

from . import config
from .errors import DegenerateForm, DimensionMismatch, ResourceBudgetExceeded
from .linalg import RationalMatrix, as_fraction, fraction_str, rank_of_rows

FACTORS = ("A", "B", "C")


def _factor_index(factor) -> int:
    if isinstance(factor, int):
        if factor not in (0, 1, 2):
            raise ValueError(f"factor index must be 0, 1 or 2, got {factor}")
        return factor
    try:
        return FACTORS.index(str(factor).upper())
    except ValueError:
        raise ValueError(f"unknown factor {factor!r}; expected A, B or C") from None


class Tensor3:
    """Dense order-3 tensor with exact rational entries.

    Instances are immutable; every operation returns a new tensor.
    """

    __slots__ = ("dims", "_data", "_hash")

    def __init__(self, dims: Sequence[int], entries: Iterable):
        a, b, c = (int(d) for d in dims)
        if min(a, b, c) < 1:
            raise ValueError(f"dims must be positive, got {tuple(dims)}")
        data = tuple(as_fraction(x) for x in entries)
        if len(data) != a * b * c:
            raise DimensionMismatch(f"expected {a*b*c} entries for dims {(a, b, c)}, got {len(data)}")
        self.dims = (a, b, c)
        self._data = data
        self._hash = None

    # -- construction helpers ---------------------------------------------
    @classmethod
    def zeros(cls, dims: Sequence[int]) -> Tensor3:
        a, b, c = dims
        _check_budget(a * b * c)
        return cls(dims, [Fraction(0)] * (a * b * c))

    @classmethod
    def from_sparse(cls, dims: Sequence[int], entries: dict) -> Tensor3:
        """Build from ``{(i, j, k): value}`` with 0-based indices."""
        a, b, c = dims
        _check_budget(a * b * c)
        data = [Fraction(0)] * (a * b * c)
        for (i, j, k), v in entries.items():
            if not (0 <= i < a and 0 <= j < b and 0 <= k < c):
                raise DimensionMismatch(f"index {(i, j, k)} out of range for dims {tuple(dims)}")
            data[(i * b + j) * c + k] += as_fraction(v)
        return cls(dims, data)

    # -- access -----------------------------------------------------------
    def __getitem__(self, idx) -> Fraction:
        i, j, k = idx
        a, b, c = self.dims
        return self._data[(i * b + j) * c + k]

    @property
    def data(self) -> tuple[Fraction, ...]:
        return self._data

    def nonzero(self) -> list[tuple[int, int, int, Fraction]]:
        a, b, c = self.dims
        out = []
        for pos, v in enumerate(self._data):
            if v:
                ij, k = divmod(pos, c)
                i, j = divmod(ij, b)
                out.append((i, j, k, v))
        return out

    def sparse(self) -> dict[tuple[int, int, int], Fraction]:
        return {(i, j, k): v for i, j, k, v in self.nonzero()}

    def is_zero(self) -> bool:
        return not any(self._data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor3):
            return NotImplemented
        return self.dims == other.dims and self._data == other._data

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.dims, self._data))
        return self._hash

    def __repr__(self) -> str:
        return f"Tensor3(dims={self.dims}, nnz={len(self.nonzero())})"

    def __add__(self, other: Tensor3) -> Tensor3:
        if self.dims != other.dims:
            raise DimensionMismatch(f"cannot add tensors of dims {self.dims} and {other.dims}")
        return Tensor3(self.dims, [x + y for x, y in zip(self._data, other._data)])

    def __sub__(self, other: Tensor3) -> Tensor3:
        if self.dims != other.dims:
            raise DimensionMismatch(f"cannot subtract tensors of dims {self.dims} and {other.dims}")
        return Tensor3(self.dims, [x - y for x, y in zip(self._data, other._data)])

    def __neg__(self) -> Tensor3:
        return Tensor3(self.dims, [-x for x in self._data])

    def scale(self, s) -> Tensor3:
        s = as_fraction(s)
        return Tensor3(self.dims, [s * x for x in self._data])

    def permute(self, order: Sequence[int]) -> Tensor3:
        """Reorder the factors: the new factor ``t`` is the old factor ``order[t]``."""
        if sorted(order) != [0, 1, 2]:
            raise ValueError(f"not a permutation of (0, 1, 2): {order}")
        dims = tuple(self.dims[o] for o in order)
        new = {}
        for i, j, k, v in self.nonzero():
            old = (i, j, k)
            new[tuple(old[o] for o in order)] = v
        return Tensor3.from_sparse(dims, new)

    def to_numpy(self):
        import numpy as np

        return np.array([float(x) for x in self._data], dtype=float).reshape(self.dims)

    # -- contraction with covectors ----------------------------------------
    def contract(self, factor, covector: Sequence) -> RationalMatrix:
        """``T(alpha)`` for ``alpha`` in the dual of one factor.

        For factor A the result is the ``b x c`` matrix ``sum_i alpha_i T[i,:,:]``;
        for B it is ``a x c``; for C it is ``a x b``.
        """
        f = _factor_index(factor)
        a, b, c = self.dims
        alpha = [as_fraction(x) for x in covector]
        if len(alpha) != self.dims[f]:
            raise DimensionMismatch(f"covector has length {len(alpha)}, factor {FACTORS[f]} has dim {self.dims[f]}")
        rows, cols = [(b, c), (a, c), (a, b)][f]
        out = [[Fraction(0)] * cols for _ in range(rows)]
        for i, j, k, v in self.nonzero():
            idx = (i, j, k)
            w = alpha[idx[f]]
            if w:
                r, s = [idx[t] for t in range(3) if t != f]
                out[r][s] += w * v
        return RationalMatrix(out, cols)

    # -- JSON interchange -------------------------------------------------
    def to_json_obj(self) -> dict:
        return {
            "dims": list(self.dims),
            "entries": [[i + 1, j + 1, k + 1, fraction_str(v)] for i, j, k, v in self.nonzero()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), separators=(",", ":"))

    @classmethod
    def from_json_obj(cls, obj: dict) -> Tensor3:
        dims = obj["dims"]
        if len(dims) != 3:
            raise DimensionMismatch("tensor JSON must have exactly three dims")
        entries = {}
        for rec in obj.get("entries", []):
            i, j, k, v = rec
            key = (int(i) - 1, int(j) - 1, int(k) - 1)
            if key in entries:
                raise ValueError(f"duplicate entry {rec[:3]}")
            entries[key] = as_fraction(v) if not isinstance(v, float) else _reject_float(v)
        return cls.from_sparse(dims, entries)

    @classmethod
    def from_json(cls, text: str) -> Tensor3:
        return cls.from_json_obj(json.loads(text))

    def digest(self) -> str:
        """SHA-256 of the canonical JSON encoding."""
        return "sha256:" + hashlib.sha256(self.to_json().encode()).hexdigest()


def _reject_float(v):
    raise TypeError(f"tensor JSON entries must be integers or 'p/q' strings, got float {v!r}")


def _check_budget(n: int, budget: int | None = None):
    limit = config.ENTRY_BUDGET if budget is None else budget
    if n > limit:
        raise ResourceBudgetExceeded(f"object with {n} entries exceeds the entry budget {limit}")


def tensor_hash(T: Tensor3) -> str:
    return T.digest()


# ---------------------------------------------------------------------------
# Tensor families
# ---------------------------------------------------------------------------

def make_unit(r: int) -> Tensor3:
    """Unit tensor: ``sum_l a_l (x) b_l (x) c_l``."""
    if r < 1:
        raise ValueError("r must be >= 1")
    return Tensor3.from_sparse((r, r, r), {(l, l, l): 1 for l in range(r)})


def make_matmul(l: int, m: int, n: int) -> Tensor3:
    """Structure tensor of ``l x m`` times ``m x n`` matrix multiplication."""
    if min(l, m, n) < 1:
        raise ValueError("matrix dimensions must be >= 1")
    entries = {}
    for u, v, w in product(range(l), range(m), range(n)):
        entries[(u * m + v, v * n + w, w * l + u)] = 1
    return Tensor3.from_sparse((l * m, m * n, n * l), entries)


def bilinear_form(kind: str, q: int) -> RationalMatrix:
    """The ``q x q`` forms used by the Coppersmith-Winograd-type families.

    ``symmetric``
        the identity.
    ``skew``
        the standard symplectic form ``e_x (x) e_{x+p} - e_{x+p} (x) e_x``,
        ``q = 2p``.
    ``mixed``
        for odd ``q``: a skew block on the first ``q-1`` coordinates plus a 1
        in the last diagonal slot (a direct sum); for even ``q``: the full
        symplectic form plus a 1 in the last diagonal slot, which overlaps
        the skew block.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    M = [[0] * q for _ in range(q)]
    if kind == "symmetric":
        for i in range(q):
            M[i][i] = 1
    elif kind == "skew":
        if q % 2:
            raise DegenerateForm(f"no nondegenerate skew form in odd dimension {q}")
        p = q // 2
        for x in range(p):
            M[x][x + p] = 1
            M[x + p][x] = -1
    elif kind == "mixed":
        if q % 2:
            p = (q - 1) // 2
            for x in range(p):
                M[x][x + p] = 1
                M[x + p][x] = -1
        else:
            p = q // 2
            for x in range(p):
                M[x][x + p] = 1
                M[x + p][x] = -1
        M[q - 1][q - 1] += 1
    else:
        raise ValueError(f"unknown form kind {kind!r}")
    return RationalMatrix(M, q)


def _cw_entries(B: RationalMatrix, offset: int) -> dict:
    """Shared part ``sum a_1 b_p c_p + sum a_p b_1 c_p + B (x) c_1``.

    Coordinates 1..q of the form sit at tensor indices offset..offset+q-1.
    """
    q = B.nrows
    entries = {}
    for rho in range(q):
        x = rho + offset
        entries[(0, x, x)] = entries.get((0, x, x), 0) + 1
        entries[(x, 0, x)] = entries.get((x, 0, x), 0) + 1
    for s in range(q):
        for t in range(q):
            v = B[s, t]
            if v:
                key = (s + offset, t + offset, 0)
                entries[key] = entries.get(key, 0) + v
    return entries


def make_cw_variant(q: int, form_kind: str = "symmetric") -> Tensor3:
    """Little Coppersmith-Winograd tensor built on a form of the given kind; dims ``(q+1,)*3``."""
    if q < 1:
        raise ValueError("q must be >= 1")
    B = bilinear_form(form_kind, q)
    return Tensor3.from_sparse((q + 1,) * 3, _cw_entries(B, 1))


def make_cw_little(q: int) -> Tensor3:
    """``cw_q``."""
    return make_cw_variant(q, "symmetric")


def make_skeletal(B: RationalMatrix) -> Tensor3:
    """Skeletal tensor ``S_B`` of dims ``(m, m, m)`` for an ``(m-2) x (m-2)`` form ``B``."""
    if not isinstance(B, RationalMatrix):
        B = RationalMatrix(B)
    if not B.is_square():
        raise DimensionMismatch(f"form must be square, got {B.shape}")
    q = B.nrows
    if B.rank() < q:
        raise DegenerateForm(f"form of size {q} has rank {B.rank()} < {q}")
    m = q + 2
    entries = _cw_entries(B, 1)
    last = m - 1
    for key in ((0, 0, last), (0, last, 0), (last, 0, 0)):
        entries[key] = entries.get(key, 0) + 1
    return Tensor3.from_sparse((m, m, m), entries)


def make_skeletal_family(kind: str, m: int) -> Tensor3:
    """``S_B`` with ``B = bilinear_form(kind, m - 2)``; ``cw`` and ``skewcw`` alias the two named families."""
    kind = {"cw": "symmetric", "skewcw": "skew"}.get(kind, kind)
    return make_skeletal(bilinear_form(kind, m - 2))


def make_bini() -> Tensor3:
    """``2x2`` by ``2x2`` matrix multiplication with the ``(2,2)`` entry of the first matrix forced to zero.

    The A factor keeps the coordinates of entries (1,1), (1,2), (2,1); dims ``(3, 4, 4)``.
    """
    M = make_matmul(2, 2, 2)
    keep = [0, 1, 2]
    entries = {(keep.index(i), j, k): v for i, j, k, v in M.nonzero() if i in keep}
    return Tensor3.from_sparse((3, 4, 4), entries)


def random_tensor(dims: Sequence[int], seed: int = 0, height: int = 5, density: float = 1.0) -> Tensor3:
    """Tensor with independent uniform integer entries in ``[-height, height]``."""
    rng = random.Random(seed)
    a, b, c = dims
    data = []
    for _ in range(a * b * c):
        data.append(rng.randint(-height, height) if rng.random() < density else 0)
    return Tensor3(dims, data)


FAMILIES = {
    "unit": (make_unit, 1),
    "matmul": (make_matmul, 3),
    "cw": (make_cw_little, 1),
    "bini": (make_bini, 0),
}


def build_family(name: str, params: Sequence) -> Tensor3:
    """Construct a named family member (used by the CLI)."""
    if name == "cw_variant":
        return make_cw_variant(int(params[0]), str(params[1]))
    if name == "skeletal":
        return make_skeletal_family(str(params[0]), int(params[1]))
    if name == "random":
        if len(params) != 4:
            raise ValueError("family 'random' takes a,b,c,seed")
        return random_tensor(tuple(int(p) for p in params[:3]), seed=int(params[3]))
    if name not in FAMILIES:
        raise ValueError(f"unknown family {name!r}")
    fn, nargs = FAMILIES[name]
    if len(params) != nargs:
        raise ValueError(f"family {name!r} takes {nargs} parameters, got {len(params)}")
    return fn(*(int(p) for p in params))


# ---------------------------------------------------------------------------
# Flattenings and ranks
# ---------------------------------------------------------------------------

def flatten(T: Tensor3, factor) -> RationalMatrix:
    """Matrix of ``T_X : X* -> (other two factors)``.

    Rows are indexed by the remaining two factors (row-major), columns by the
    chosen factor.
    """
    f = _factor_index(factor)
    a, b, c = T.dims
    others = [t for t in range(3) if t != f]
    nrows = T.dims[others[0]] * T.dims[others[1]]
    out = {}
    for i, j, k, v in T.nonzero():
        idx = (i, j, k)
        row = idx[others[0]] * T.dims[others[1]] + idx[others[1]]
        out[(row, idx[f])] = v
    return RationalMatrix.from_sparse(nrows, T.dims[f], out)


def _flatten_rank(T: Tensor3, f: int) -> int:
    rows: dict[int, dict[int, Fraction]] = {}
    others = [t for t in range(3) if t != f]
    for i, j, k, v in T.nonzero():
        idx = (i, j, k)
        rows.setdefault(idx[f], {})[idx[others[0]] * T.dims[others[1]] + idx[others[1]]] = v
    # rank of the transpose is the same and has fewer rows
    return rank_of_rows(rows.values())


def multilinear_ranks(T: Tensor3) -> tuple[int, int, int]:
    return tuple(_flatten_rank(T, f) for f in range(3))


def is_concise(T: Tensor3) -> bool:
    return multilinear_ranks(T) == T.dims


@dataclass(frozen=True)
class GenericityResult:
    generic: bool
    factor: str
    target_rank: int
    witness: tuple[Fraction, ...] | None
    achieved_rank: int
    method: str

    def __bool__(self) -> bool:
        return self.generic


def _structured_covectors(n: int):
    for i in range(n):
        yield tuple(Fraction(int(t == i)) for t in range(n))
    for i in range(1, n):
        yield tuple(Fraction(int(t in (0, i))) for t in range(n))
    yield tuple(Fraction(1) for _ in range(n))


def _symbolic_pencil_rank(T: Tensor3, f: int) -> int:
    """Rank of ``sum_i x_i T_i`` over the rational function field ``Q(x)``."""
    from sympy import QQ, symbols
    from sympy.polys.matrices import DomainMatrix

    n = T.dims[f]
    xs = symbols(f"x0:{n}")
    K = QQ.frac_field(*xs)
    slices = [T.contract(f, [int(t == i) for t in range(n)]) for i in range(n)]
    rows, cols = slices[0].shape
    data = []
    for r in range(rows):
        row = []
        for s in range(cols):
            expr = sum((K.convert(xs[i]) * K.convert(slices[i][r, s]) for i in range(n) if slices[i][r, s]), K.zero)
            row.append(expr)
        data.append(row)
    return DomainMatrix(data, (rows, cols), K).rank()


def is_1generic(T: Tensor3, factor="A", trials: int = 20, height: int = 10, seed: int = 0) -> GenericityResult:
    """Decide whether ``T(X*)`` contains an element of maximal possible rank.

    The target rank is the smaller of the two complementary dims.  Structured
    covectors (coordinate vectors, ``e_1 + e_i``, all-ones) are tried first,
    then ``trials`` seeded random integer covectors with entries in
    ``[-height, height]``.  If all of those fail, the rank of the generic
    element is computed symbolically over ``Q(x)``; ``False`` is returned only
    when that rank is below the target, and otherwise random search continues
    with growing height until a witness turns up.
    """
    f = _factor_index(factor)
    n = T.dims[f]
    rows, cols = [(T.dims[1], T.dims[2]), (T.dims[0], T.dims[2]), (T.dims[0], T.dims[1])][f]
    target = min(rows, cols)
    best = (-1, None)

    def attempt(alpha):
        nonlocal best
        r = T.contract(f, alpha).rank()
        if r > best[0]:
            best = (r, alpha)
        return r == target

    for alpha in _structured_covectors(n):
        if attempt(alpha):
            return GenericityResult(True, FACTORS[f], target, alpha, target, "structured")
    rng = random.Random(seed)
    for _ in range(trials):
        alpha = tuple(Fraction(rng.randint(-height, height)) for _ in range(n))
        if attempt(alpha):
            return GenericityResult(True, FACTORS[f], target, alpha, target, "random")
    generic_rank = _symbolic_pencil_rank(T, f)
    if generic_rank < target:
        return GenericityResult(False, FACTORS[f], target, None, generic_rank, "symbolic")
    h = height
    while True:
        h *= 2
        for _ in range(trials):
            alpha = tuple(Fraction(rng.randint(-h, h)) for _ in range(n))
            if attempt(alpha):
                return GenericityResult(True, FACTORS[f], target, alpha, target, "random")


def is_fully_1generic(T: Tensor3, **kw) -> bool:
    return all(is_1generic(T, f, **kw).generic for f in FACTORS)


# ---------------------------------------------------------------------------
# Combinators
# ---------------------------------------------------------------------------

def kronecker(T: Tensor3, S: Tensor3, budget: int | None = None) -> Tensor3:
    """Kronecker product regrouped as an order-3 tensor (row-major pairing)."""
    a, b, c = T.dims
    a2, b2, c2 = S.dims
    dims = (a * a2, b * b2, c * c2)
    _check_budget(dims[0] * dims[1] * dims[2], budget)
    entries = {}
    snz = S.nonzero()
    for i, j, k, v in T.nonzero():
        for i2, j2, k2, w in snz:
            entries[(i * a2 + i2, j * b2 + j2, k * c2 + k2)] = v * w
    return Tensor3.from_sparse(dims, entries)


def kronecker_power(T: Tensor3, k: int, budget: int | None = None) -> Tensor3:
    if k < 1:
        raise ValueError("power must be >= 1")
    out = T
    for _ in range(k - 1):
        out = kronecker(out, T, budget)
    return out


@dataclass(frozen=True)
class FactorMapTriple:
    """Linear maps ``(gA, gB, gC)`` acting factorwise; ``gA`` is ``a' x a``."""

    gA: RationalMatrix
    gB: RationalMatrix
    gC: RationalMatrix

    @classmethod
    def identity(cls, dims: Sequence[int]) -> FactorMapTriple:
        return cls(*(RationalMatrix.identity(d) for d in dims))

    def maps(self) -> tuple[RationalMatrix, RationalMatrix, RationalMatrix]:
        return (self.gA, self.gB, self.gC)

    def compose(self, other: FactorMapTriple) -> FactorMapTriple:
        """``self`` after ``other``."""
        return FactorMapTriple(self.gA @ other.gA, self.gB @ other.gB, self.gC @ other.gC)


def _mode_apply(entries: dict, g: RationalMatrix, f: int) -> dict:
    out: dict = {}
    cols = {}
    for r in range(g.nrows):
        for s in range(g.ncols):
            x = g[r, s]
            if x:
                cols.setdefault(s, []).append((r, x))
    for idx, v in entries.items():
        for r, x in cols.get(idx[f], ()):
            new = list(idx)
            new[f] = r
            key = tuple(new)
            nv = out.get(key, 0) + x * v
            if nv:
                out[key] = nv
            else:
                out.pop(key, None)
    return out


def apply(g: FactorMapTriple, T: Tensor3) -> Tensor3:
    """``(gA (x) gB (x) gC) T``."""
    maps = g.maps()
    for f, M in enumerate(maps):
        if M.ncols != T.dims[f]:
            raise DimensionMismatch(
                f"map for factor {FACTORS[f]} has {M.ncols} columns, tensor factor has dim {T.dims[f]}"
            )
    entries = T.sparse()
    for f, M in enumerate(maps):
        entries = _mode_apply(entries, M, f)
    return Tensor3.from_sparse(tuple(M.nrows for M in maps), entries)


def direct_sum(T: Tensor3, S: Tensor3) -> Tensor3:
    a, b, c = T.dims
    dims = (a + S.dims[0], b + S.dims[1], c + S.dims[2])
    entries = T.sparse()
    for i, j, k, v in S.nonzero():
        entries[(i + a, j + b, k + c)] = v
    return Tensor3.from_sparse(dims, entries)


def rank_one(u: Sequence, v: Sequence, w: Sequence) -> Tensor3:
    u = [as_fraction(x) for x in u]
    v = [as_fraction(x) for x in v]
    w = [as_fraction(x) for x in w]
    return Tensor3((len(u), len(v), len(w)), [x * y * z for x in u for y in v for z in w])
