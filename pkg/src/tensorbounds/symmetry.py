"""Symmetry Lie algebra of a tensor.

For ``L = (U, V, W)`` in ``gl(A) + gl(B) + gl(C)`` the action on ``T`` is

    (L.T)[i,j,k] = sum_i' U[i,i'] T[i',j,k] + sum_j' V[j,j'] T[i,j',k]
                   + sum_k' W[k,k'] T[i,j,k']

and the annihilator ``{L : L.T = 0}`` is the nullspace of this linear system in
the ``a^2 + b^2 + c^2`` unknowns (row-major ``U``, then ``V``, then ``W``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import config
from .errors import DimensionMismatch, ResourceBudgetExceeded, TemplateMismatch, ZeroTensor
from .linalg import RationalMatrix, Subspace, nullspace_rows, rank_of_rows
from .tensor import Tensor3, is_concise, make_skeletal

Triple = tuple[RationalMatrix, RationalMatrix, RationalMatrix]


@dataclass
class SymmetryBasis:
    """Basis of the annihilator algebra; ``dim_g`` is ``None`` when undefined (non-concise input)."""

    dims: tuple[int, int, int]
    triples: list[Triple]
    dim_tilde: int
    dim_g: int | None
    blocks: dict = field(default_factory=dict)

    def vectors(self) -> list[list[Fraction]]:
        return [triple_to_vector(t) for t in self.triples]

    def to_json_obj(self) -> dict:
        out = {
            "dims": list(self.dims),
            "dim_tilde": self.dim_tilde,
            "dim_g": self.dim_g,
            "triples": [[M.to_json() for M in t] for t in self.triples],
        }
        if self.blocks:
            out["blocks"] = self.blocks
        return out


def _offsets(dims) -> tuple[int, int, int, int]:
    a, b, c = dims
    return 0, a * a, a * a + b * b, a * a + b * b + c * c


def triple_to_vector(L: Triple) -> list[Fraction]:
    out = []
    for M in L:
        for row in M.rows:
            out.extend(row)
    return out


def vector_to_triple(v: Sequence, dims) -> Triple:
    a, b, c = dims
    o = _offsets(dims)
    mats = []
    for t, n in enumerate((a, b, c)):
        chunk = list(v[o[t]:o[t + 1]])
        mats.append(RationalMatrix([chunk[r * n:(r + 1) * n] for r in range(n)], n))
    return tuple(mats)


def annihilator_system(T: Tensor3) -> list[dict[int, Fraction]]:
    """Sparse rows of the ``abc x (a^2+b^2+c^2)`` system; zero rows are dropped."""
    a, b, c = T.dims
    oU, oV, oW, _ = _offsets(T.dims)
    by_jk: dict[tuple[int, int], list[tuple[int, Fraction]]] = {}
    by_ik: dict[tuple[int, int], list[tuple[int, Fraction]]] = {}
    by_ij: dict[tuple[int, int], list[tuple[int, Fraction]]] = {}
    for i, j, k, v in T.nonzero():
        by_jk.setdefault((j, k), []).append((i, v))
        by_ik.setdefault((i, k), []).append((j, v))
        by_ij.setdefault((i, j), []).append((k, v))
    rows = []
    for i in range(a):
        for j in range(b):
            for k in range(c):
                row: dict[int, Fraction] = {}
                for i2, v in by_jk.get((j, k), ()):
                    row[oU + i * a + i2] = v
                for j2, v in by_ik.get((i, k), ()):
                    row[oV + j * b + j2] = v
                for k2, v in by_ij.get((i, j), ()):
                    row[oW + k * c + k2] = v
                if row:
                    rows.append(row)
    return rows


def act(L: Triple, T: Tensor3) -> Tensor3:
    """``L.T``."""
    U, V, W = L
    a, b, c = T.dims
    if U.shape != (a, a) or V.shape != (b, b) or W.shape != (c, c):
        raise DimensionMismatch(f"triple shapes {U.shape, V.shape, W.shape} do not match dims {T.dims}")
    out: dict = {}
    for i, j, k, v in T.nonzero():
        for r in range(a):
            x = U[r, i]
            if x:
                out[(r, j, k)] = out.get((r, j, k), 0) + x * v
        for r in range(b):
            x = V[r, j]
            if x:
                out[(i, r, k)] = out.get((i, r, k), 0) + x * v
        for r in range(c):
            x = W[r, k]
            if x:
                out[(i, j, r)] = out.get((i, j, r), 0) + x * v
    return Tensor3.from_sparse(T.dims, out)


def check_annihilates(L: Triple, T: Tensor3) -> bool:
    return act(L, T).is_zero()


def _check_system_budget(T: Tensor3, budget: int | None):
    a, b, c = T.dims
    cells = a * b * c * (a * a + b * b + c * c)
    limit = config.ENTRY_BUDGET * 10 if budget is None else budget
    if cells > limit:
        raise ResourceBudgetExceeded(f"symmetry system with {cells} cells exceeds budget {limit}")


def symmetry_algebra(T: Tensor3, budget: int | None = None) -> SymmetryBasis:
    if T.is_zero():
        raise ZeroTensor("the symmetry algebra of the zero tensor is everything")
    _check_system_budget(T, budget)
    a, b, c = T.dims
    n = a * a + b * b + c * c
    kernel = nullspace_rows(annihilator_system(T), n)
    triples = [vector_to_triple(v, T.dims) for v in kernel]
    dim_tilde = len(kernel)
    dim_g = dim_tilde - 2 if is_concise(T) else None
    return SymmetryBasis(T.dims, triples, dim_tilde, dim_g)


def bracket(L1: Triple, L2: Triple) -> Triple:
    return tuple(X @ Y - Y @ X for X, Y in zip(L1, L2))


def in_span(basis: SymmetryBasis, L: Triple) -> bool:
    sub = Subspace(len(triple_to_vector(basis.triples[0])) if basis.triples else 0, basis.vectors())
    return sub.contains(triple_to_vector(L))


# ---------------------------------------------------------------------------
# block report for skeletal tensors
# ---------------------------------------------------------------------------

def extract_skeletal_form(T: Tensor3) -> RationalMatrix:
    """Recover ``B`` from a tensor of skeletal shape, or raise TemplateMismatch."""
    m = T.dims[0]
    if T.dims != (m, m, m) or m < 3:
        raise TemplateMismatch(f"skeletal tensors are cubes of side >= 3, got dims {T.dims}")
    B = RationalMatrix([[T[s, t, 0] for t in range(1, m - 1)] for s in range(1, m - 1)], m - 2)
    try:
        S = make_skeletal(B)
    except Exception as exc:
        raise TemplateMismatch(f"middle block is not a nondegenerate form: {exc}") from None
    if S != T:
        raise TemplateMismatch("tensor does not have skeletal shape")
    return B


def _pattern_dim(kernel_vectors, coords: set[int], n: int) -> int:
    """Dimension of the subspace of kernel elements supported on ``coords``."""
    # v = sum s_t k_t with v_x = 0 outside coords: nullspace of the restricted coefficient system
    outside = [x for x in range(n) if x not in coords]
    rows = []
    for x in outside:
        row = {t: v[x] for t, v in enumerate(kernel_vectors) if v[x]}
        if row:
            rows.append(row)
    return len(kernel_vectors) - rank_of_rows(rows)


def _projection_rank(kernel_vectors, coords: Sequence[int]) -> int:
    return rank_of_rows([[v[x] for x in coords] for v in kernel_vectors])


def structured_basis_report(T: Tensor3) -> SymmetryBasis:
    """Symmetry algebra of a skeletal tensor annotated against its block template.

    Blocks (1-based coordinates, ``m`` the side length): ``u11`` is
    ``U[1,1]``; ``u_bar`` / ``v_bar`` / ``z_bar`` are the first rows of ``U``,
    ``V``, ``W`` over columns ``2..m-1``; ``u1m`` / ``v1m`` are ``U[1,m]`` and
    ``V[1,m]``; ``X`` is the middle ``(m-2) x (m-2)`` block.  For each block
    the report gives the rank of the projection of the algebra onto that
    block, and for ``X`` also the dimension of the elements supported only on
    the three middle blocks (the form's own symmetry algebra ``h_B``).
    """
    extract_skeletal_form(T)
    basis = symmetry_algebra(T)
    m = T.dims[0]
    oU, oV, oW, n = _offsets(T.dims)
    vecs = basis.vectors()

    def idx(off, r, s):
        return off + r * m + s

    mid = range(1, m - 1)
    middle = {idx(o, r, s) for o in (oU, oV, oW) for r in mid for s in mid}
    report = {
        "u11": _projection_rank(vecs, [idx(oU, 0, 0)]),
        "u_bar": _projection_rank(vecs, [idx(oU, 0, s) for s in mid]),
        "v_bar": _projection_rank(vecs, [idx(oV, 0, s) for s in mid]),
        "z_bar": _projection_rank(vecs, [idx(oW, 0, s) for s in mid]),
        "u1m": _projection_rank(vecs, [idx(oU, 0, m - 1)]),
        "v1m": _projection_rank(vecs, [idx(oV, 0, m - 1)]),
        "X_projection": _projection_rank(vecs, [idx(oU, r, s) for r in mid for s in mid]),
        "X": _pattern_dim(vecs, middle, n),
    }
    basis.blocks = report
    return basis
