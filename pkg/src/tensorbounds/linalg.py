"""Exact linear algebra over the rationals.

Everything here works on Python ``Fraction``/``int`` values.  Rows are kept
sparse (``dict`` column -> value) during elimination because the systems that
show up (symmetry equations, Koszul maps, multiplication maps) are mostly
zeros.  Rank computations clear denominators and run a fraction-free
elimination on integers, which is noticeably faster than ``Fraction``
arithmetic; reduced row echelon forms use ``Fraction``.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

from .errors import DimensionMismatch

__all__ = [
    "as_fraction",
    "fraction_str",
    "RationalMatrix",
    "Subspace",
    "rank_of_rows",
    "rref_rows",
    "nullspace_rows",
]


def as_fraction(x) -> Fraction:
    """Coerce ints, Fractions and ``"p/q"`` strings to ``Fraction``.

    Floats are rejected: silently turning 0.1 into 3602879701896397/2**55 is
    never what a caller of an exact routine wants.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        return Fraction(int(x))
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if hasattr(x, "numerator") and hasattr(x, "denominator") and not isinstance(x, float):
        return Fraction(int(x.numerator), int(x.denominator))
    if hasattr(x, "item") and not isinstance(x, float):
        # numpy integer scalars
        v = x.item()
        if isinstance(v, int):
            return Fraction(v)
    raise TypeError(f"cannot convert {x!r} ({type(x).__name__}) to an exact rational")


def fraction_str(x: Fraction) -> str:
    """Canonical string form: ``"3"``, ``"-1/2"``."""
    x = as_fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def _sparse(row, ncols: int | None = None) -> dict:
    if isinstance(row, dict):
        return {c: v for c, v in row.items() if v != 0}
    return {c: v for c, v in enumerate(row) if v != 0}


def _integer_row(row: dict) -> dict[int, int]:
    den = 1
    for v in row.values():
        if isinstance(v, Fraction):
            d = v.denominator
            den = den * d // gcd(den, d)
    out = {}
    g = 0
    for c, v in row.items():
        iv = int(v * den) if den != 1 or isinstance(v, Fraction) else int(v)
        out[c] = iv
        g = gcd(g, iv)
    if g > 1:
        out = {c: v // g for c, v in out.items()}
    return out


def rank_of_rows(rows: Iterable, ncols: int | None = None) -> int:
    """Exact rank of the matrix whose rows are given (lists or sparse dicts).

    Fraction-free: each incoming row is reduced against the current pivot
    rows with integer cross-multiplication followed by content removal.
    """
    pivots: dict[int, dict[int, int]] = {}
    for raw in rows:
        r = _integer_row(_sparse(raw))
        while r:
            c = min(r)
            p = pivots.get(c)
            if p is None:
                pivots[c] = r
                break
            a, b = p[c], r[c]
            g = gcd(a, b)
            fa, fb = a // g, b // g
            new = {k: fa * v for k, v in r.items()}
            for k, v in p.items():
                nv = new.get(k, 0) - fb * v
                if nv:
                    new[k] = nv
                else:
                    new.pop(k, None)
            cont = 0
            for v in new.values():
                cont = gcd(cont, v)
                if cont == 1:
                    break
            if cont > 1:
                new = {k: v // cont for k, v in new.items()}
            r = new
    return len(pivots)


def _reduce_against(r: dict, pivots: dict[int, dict]) -> dict:
    """Eliminate every pivot column of ``pivots`` from ``r`` (Fractions)."""
    r = dict(r)
    for c in sorted(set(r) & set(pivots)):
        f = r.get(c)
        if not f:
            continue
        for k, v in pivots[c].items():
            nv = r.get(k, 0) - f * v
            if nv:
                r[k] = nv
            else:
                r.pop(k, None)
    return r


def rref_rows(rows: Iterable, ncols: int | None = None) -> tuple[list[dict[int, Fraction]], list[int]]:
    """Reduced row echelon form.

    Returns ``(basis_rows, pivot_columns)`` with basis rows sparse, each with
    a leading 1 in its pivot column and zeros in every other pivot column.
    """
    pivots: dict[int, dict[int, Fraction]] = {}
    for raw in rows:
        r = {c: Fraction(v) for c, v in _sparse(raw).items()}
        while r:
            c = min(r)
            p = pivots.get(c)
            if p is None:
                lead = r[c]
                pivots[c] = {k: v / lead for k, v in r.items()}
                break
            f = r[c]
            for k, v in p.items():
                nv = r.get(k, 0) - f * v
                if nv:
                    r[k] = nv
                else:
                    r.pop(k, None)
    # back substitution, last pivot first
    cols = sorted(pivots)
    for c in reversed(cols):
        row = pivots[c]
        for c2 in cols:
            if c2 >= c:
                break
            other = pivots[c2]
            f = other.get(c)
            if f:
                for k, v in row.items():
                    nv = other.get(k, 0) - f * v
                    if nv:
                        other[k] = nv
                    else:
                        other.pop(k, None)
    return [pivots[c] for c in cols], cols


def nullspace_rows(rows: Iterable, ncols: int) -> list[list[Fraction]]:
    """Basis of ``{x : M x = 0}``; one vector per free column, free entry 1."""
    basis, pivcols = rref_rows(rows, ncols)
    pivset = set(pivcols)
    out = []
    for f in range(ncols):
        if f in pivset:
            continue
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, pc in zip(basis, pivcols):
            x = row.get(f)
            if x:
                v[pc] = -x
        out.append(v)
    return out


class RationalMatrix:
    """Immutable dense matrix of Fractions."""

    __slots__ = ("_rows", "nrows", "ncols")

    def __init__(self, rows: Sequence[Sequence], ncols: int | None = None):
        data = tuple(tuple(as_fraction(x) for x in row) for row in rows)
        if ncols is None:
            if not data:
                raise ValueError("empty matrix needs an explicit ncols")
            ncols = len(data[0])
        for row in data:
            if len(row) != ncols:
                raise DimensionMismatch("ragged matrix rows")
        self._rows = data
        self.nrows = len(data)
        self.ncols = ncols

    # -- constructors -----------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> RationalMatrix:
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)], n)

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> RationalMatrix:
        return cls([[0] * ncols for _ in range(nrows)], ncols)

    @classmethod
    def from_sparse(cls, nrows: int, ncols: int, entries: dict) -> RationalMatrix:
        data = [[0] * ncols for _ in range(nrows)]
        for (i, j), v in entries.items():
            data[i][j] = v
        return cls(data, ncols)

    # -- basic protocol ---------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def rows(self) -> tuple[tuple[Fraction, ...], ...]:
        return self._rows

    def __getitem__(self, idx):
        i, j = idx
        return self._rows[i][j]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        return self.shape == other.shape and self._rows == other._rows

    def __hash__(self) -> int:
        return hash((self.shape, self._rows))

    def __repr__(self) -> str:
        body = "; ".join(" ".join(fraction_str(x) for x in row) for row in self._rows)
        return f"RationalMatrix({self.nrows}x{self.ncols}: [{body}])"

    def column(self, j: int) -> list[Fraction]:
        return [row[j] for row in self._rows]

    def transpose(self) -> RationalMatrix:
        return RationalMatrix([[r[j] for r in self._rows] for j in range(self.ncols)], self.nrows)

    T = property(transpose)

    def is_zero(self) -> bool:
        return all(x == 0 for row in self._rows for x in row)

    def is_square(self) -> bool:
        return self.nrows == self.ncols

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other: RationalMatrix) -> RationalMatrix:
        if self.shape != other.shape:
            raise DimensionMismatch(f"cannot add {self.shape} and {other.shape}")
        return RationalMatrix(
            [[x + y for x, y in zip(r, s)] for r, s in zip(self._rows, other._rows)], self.ncols
        )

    def __sub__(self, other: RationalMatrix) -> RationalMatrix:
        if self.shape != other.shape:
            raise DimensionMismatch(f"cannot subtract {self.shape} and {other.shape}")
        return RationalMatrix(
            [[x - y for x, y in zip(r, s)] for r, s in zip(self._rows, other._rows)], self.ncols
        )

    def __neg__(self) -> RationalMatrix:
        return RationalMatrix([[-x for x in r] for r in self._rows], self.ncols)

    def scale(self, c) -> RationalMatrix:
        c = as_fraction(c)
        return RationalMatrix([[c * x for x in r] for r in self._rows], self.ncols)

    def __matmul__(self, other: RationalMatrix) -> RationalMatrix:
        if self.ncols != other.nrows:
            raise DimensionMismatch(f"cannot multiply {self.shape} by {other.shape}")
        cols = [other.column(j) for j in range(other.ncols)]
        out = []
        for r in self._rows:
            nz = [(k, x) for k, x in enumerate(r) if x]
            out.append([sum((x * col[k] for k, x in nz), Fraction(0)) for col in cols])
        return RationalMatrix(out, other.ncols)

    def apply(self, v: Sequence) -> list[Fraction]:
        """Matrix-vector product."""
        if len(v) != self.ncols:
            raise DimensionMismatch("vector length does not match matrix")
        return [sum((x * as_fraction(y) for x, y in zip(r, v) if x), Fraction(0)) for r in self._rows]

    def kron(self, other: RationalMatrix) -> RationalMatrix:
        out = []
        for r in self._rows:
            for s in other._rows:
                out.append([x * y for x in r for y in s])
        return RationalMatrix(out, self.ncols * other.ncols)

    # -- elimination ------------------------------------------------------
    def rank(self) -> int:
        return rank_of_rows(self._rows, self.ncols)

    def rref(self) -> tuple[RationalMatrix, list[int]]:
        basis, piv = rref_rows(self._rows, self.ncols)
        dense = [[row.get(j, Fraction(0)) for j in range(self.ncols)] for row in basis]
        return RationalMatrix(dense, self.ncols), piv

    def nullspace(self) -> list[list[Fraction]]:
        """Right kernel basis."""
        return nullspace_rows(self._rows, self.ncols)

    def inverse(self) -> RationalMatrix:
        if not self.is_square():
            raise DimensionMismatch("only square matrices are invertible")
        n = self.nrows
        aug = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(self._rows)]
        basis, piv = rref_rows(aug, 2 * n)
        if piv[:n] != list(range(n)):
            raise ZeroDivisionError("matrix is singular")
        return RationalMatrix([[row.get(n + j, Fraction(0)) for j in range(n)] for row in basis[:n]], n)

    def to_lists(self) -> list[list[Fraction]]:
        return [list(r) for r in self._rows]

    def to_json(self) -> list[list[str]]:
        return [[fraction_str(x) for x in r] for r in self._rows]

    @classmethod
    def from_json(cls, data: list[list]) -> RationalMatrix:
        if not data:
            raise ValueError("empty matrix")
        return cls(data)


class Subspace:
    """A subspace of Q^n stored by its reduced row echelon basis.

    The RREF basis is canonical, so two subspaces are equal iff their bases
    are equal.
    """

    __slots__ = ("ambient", "_basis", "_pivots")

    def __init__(self, ambient: int, vectors: Iterable = ()):
        self.ambient = ambient
        basis, piv = rref_rows(vectors, ambient)
        self._basis = basis
        self._pivots = piv

    @classmethod
    def full(cls, n: int) -> Subspace:
        return cls(n, ({i: 1} for i in range(n)))

    @classmethod
    def coordinate(cls, n: int, coords: Iterable[int]) -> Subspace:
        return cls(n, ({i: 1} for i in coords))

    @property
    def dim(self) -> int:
        return len(self._basis)

    @property
    def codim(self) -> int:
        return self.ambient - self.dim

    @property
    def pivots(self) -> list[int]:
        return list(self._pivots)

    def basis_sparse(self) -> list[dict[int, Fraction]]:
        return [dict(r) for r in self._basis]

    def basis(self) -> list[list[Fraction]]:
        return [[r.get(j, Fraction(0)) for j in range(self.ambient)] for r in self._basis]

    def contains(self, v) -> bool:
        r = {c: Fraction(x) for c, x in _sparse(v).items()}
        return not _reduce_against(r, dict(zip(self._pivots, self._basis)))

    def contains_space(self, other: Subspace) -> bool:
        if other.ambient != self.ambient:
            raise DimensionMismatch("subspaces live in different ambient spaces")
        piv = dict(zip(self._pivots, self._basis))
        return all(not _reduce_against(r, piv) for r in other._basis)

    def __add__(self, other: Subspace) -> Subspace:
        if other.ambient != self.ambient:
            raise DimensionMismatch("subspaces live in different ambient spaces")
        return Subspace(self.ambient, [*self._basis, *other._basis])

    def intersect(self, other: Subspace) -> Subspace:
        if other.ambient != self.ambient:
            raise DimensionMismatch("subspaces live in different ambient spaces")
        k1, k2 = self.dim, other.dim
        if k1 == 0 or k2 == 0:
            return Subspace(self.ambient)
        # x in self ∩ other  <=>  x = sum s_i b_i = sum t_j c_j
        cols = k1 + k2
        eqs = []
        for coord in range(self.ambient):
            row = {}
            for i, b in enumerate(self._basis):
                v = b.get(coord)
                if v:
                    row[i] = v
            for j, c in enumerate(other._basis):
                v = c.get(coord)
                if v:
                    row[k1 + j] = -v
            if row:
                eqs.append(row)
        vecs = []
        for sol in nullspace_rows(eqs, cols):
            v: dict[int, Fraction] = {}
            for i, b in enumerate(self._basis):
                s = sol[i]
                if s:
                    for k, x in b.items():
                        v[k] = v.get(k, 0) + s * x
            vecs.append(v)
        return Subspace(self.ambient, vecs)

    def quotient_complement(self, vectors: Iterable) -> list[dict[int, Fraction]]:
        """Reduce ``vectors`` modulo this subspace, returning the nonzero remainders."""
        piv = dict(zip(self._pivots, self._basis))
        out = []
        for v in vectors:
            r = _reduce_against({c: Fraction(x) for c, x in _sparse(v).items()}, piv)
            if r:
                out.append(r)
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Subspace):
            return NotImplemented
        return self.ambient == other.ambient and self._pivots == other._pivots and self._basis == other._basis

    def __hash__(self) -> int:
        return hash((self.ambient, tuple(self._pivots),
                     tuple(tuple(sorted(r.items())) for r in self._basis)))

    def __repr__(self) -> str:
        return f"Subspace(dim={self.dim}, ambient={self.ambient})"
