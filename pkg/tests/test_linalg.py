from fractions import Fraction

import sympy
from hypothesis import given
from hypothesis import strategies as st

from tensorbounds.linalg import RationalMatrix, Subspace, as_fraction, fraction_str, nullspace_rows, rank_of_rows

matrices = st.integers(1, 5).flatmap(
    lambda r: st.integers(1, 5).flatmap(
        lambda c: st.lists(st.lists(st.integers(-4, 4), min_size=c, max_size=c), min_size=r, max_size=r)
    )
)


@given(matrices)
def test_rank_matches_sympy(rows):
    assert RationalMatrix(rows).rank() == sympy.Matrix(rows).rank()


@given(matrices)
def test_nullspace_is_kernel(rows):
    M = RationalMatrix(rows)
    ns = M.nullspace()
    assert len(ns) == M.ncols - M.rank()
    for v in ns:
        assert all(x == 0 for x in M.apply(v))


def test_sparse_row_helpers():
    rows = [{0: 1, 2: 2}, {1: 1}, {0: 2, 1: 2, 2: 4}]
    assert rank_of_rows(rows, 3) == 2
    (v,) = nullspace_rows(rows, 3)
    assert v[0] == -2 * v[2] and v[1] == 0


def test_fraction_parsing():
    assert as_fraction("3/6") == Fraction(1, 2)
    assert fraction_str(Fraction(-4, 2)) == "-2"
    assert fraction_str(Fraction(2, 3)) == "2/3"


@given(st.lists(st.lists(st.integers(-2, 2), min_size=4, max_size=4), max_size=3),
       st.lists(st.lists(st.integers(-2, 2), min_size=4, max_size=4), max_size=3))
def test_intersection_dimension_formula(u, v):
    U, V = Subspace(4, u), Subspace(4, v)
    W = U.intersect(V)
    assert W.dim == U.dim + V.dim - (U + V).dim
    assert U.contains_space(W) and V.contains_space(W)


def test_inverse():
    M = RationalMatrix([[2, 1], [1, 1]])
    assert M @ M.inverse() == RationalMatrix.identity(2)
