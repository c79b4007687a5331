from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tensorbounds.config import ENTRY_BUDGET
from tensorbounds.errors import DegenerateForm, DimensionMismatch, ResourceBudgetExceeded
from tensorbounds.linalg import RationalMatrix
from tensorbounds.tensor import (
    FactorMapTriple,
    Tensor3,
    apply,
    bilinear_form,
    build_family,
    direct_sum,
    flatten,
    is_1generic,
    is_concise,
    kronecker,
    kronecker_power,
    make_bini,
    make_cw_little,
    make_cw_variant,
    make_matmul,
    make_skeletal,
    make_skeletal_family,
    make_unit,
    multilinear_ranks,
)

from .conftest import invertible_matrices, small_tensors


def test_unit():
    assert make_unit(1).sparse() == {(0, 0, 0): 1}
    T = make_unit(3)
    assert sorted(T.sparse()) == [(0, 0, 0), (1, 1, 1), (2, 2, 2)]
    for r in range(1, 7):
        assert flatten(make_unit(r), "A").rank() == r
        assert flatten(make_unit(r), "B").rank() == r


def test_matmul():
    assert make_matmul(1, 1, 1) == make_unit(1)
    T = make_matmul(2, 2, 2)
    assert T.dims == (4, 4, 4)
    assert len(T.sparse()) == 8 and set(T.sparse().values()) == {1}
    for n in (2, 3):
        assert multilinear_ranks(make_matmul(n, n, n)) == (n * n,) * 3
    assert multilinear_ranks(make_matmul(2, 2, 3)) == (4, 6, 6)
    assert is_concise(make_matmul(2, 2, 3))
    assert flatten(T, "A").rank() == 4


def test_matmul_matches_matrix_product_oracle():
    # contracting with A and B must give the entries of the product AB
    l, m, n = 2, 3, 2
    T = make_matmul(l, m, n)
    A = [[Fraction(3 * u + v + 1) for v in range(m)] for u in range(l)]
    B = [[Fraction(2 * v - w) for w in range(n)] for v in range(m)]
    out = [Fraction(0)] * (n * l)
    for (i, j, k), t in T.sparse().items():
        out[k] += t * A[i // m][i % m] * B[j // n][j % n]
    for u, w in product(range(l), range(n)):
        assert out[w * l + u] == sum(A[u][v] * B[v][w] for v in range(m))


def test_cw_little():
    T1 = make_cw_little(1)
    assert T1.dims == (2, 2, 2) and len(T1.sparse()) == 3
    T2 = make_cw_little(2)
    assert T2.dims == (3, 3, 3)
    assert T2.permute((1, 2, 0)) == T2
    for q in range(2, 6):
        assert multilinear_ranks(make_cw_little(q)) == (q + 1,) * 3


def test_skeletal_and_variants():
    B = RationalMatrix.identity(3)
    assert make_skeletal(B).dims == (5, 5, 5)
    with pytest.raises(DegenerateForm):
        make_skeletal(RationalMatrix([[1, 0], [0, 0]]))
    assert make_cw_variant(2, "skew").dims == (3, 3, 3)
    with pytest.raises(DegenerateForm):
        make_cw_variant(3, "skew")
    assert make_cw_variant(2, "symmetric") == make_cw_little(2)
    S = bilinear_form("skew", 4)
    assert S.transpose() == -S and S.rank() == 4


def test_skeletal_identity_consistent_with_cw_variant_on_overlap():
    # the skeletal tensor contains the little CW variant as the slice a_0 removed
    for q in (2, 3, 4):
        big = make_skeletal_family("cw", q + 2)
        little = make_cw_variant(q, "symmetric")
        nested = {
            (i, j, k): v for (i, j, k), v in big.sparse().items()
            if i < q + 1 and j < q + 1 and k < q + 1
        }
        assert nested == little.sparse()


def test_bini():
    T = make_bini()
    assert T.dims == (3, 4, 4)
    assert multilinear_ranks(T) == (3, 4, 4)
    # a 3-dimensional A still carries an invertible 4 x 4 slice, e.g. alpha = (1, 1, 1)
    res = is_1generic(T, "A")
    assert res.generic and res.achieved_rank == 4
    assert T.contract("A", res.witness).rank() == 4


def test_one_genericity():
    for r in (1, 3, 5):
        res = is_1generic(make_unit(r), "B")
        assert res.generic and res.witness == tuple([Fraction(1)] * r)
    res = is_1generic(make_cw_little(3), "A")
    assert res.generic
    assert is_1generic(make_matmul(2, 2, 2), "C").generic


def test_zero_tensor():
    Z = Tensor3.zeros((2, 3, 2))
    assert multilinear_ranks(Z) == (0, 0, 0)
    assert not is_concise(Z)


def test_kronecker():
    assert kronecker(make_unit(2), make_unit(3)) == make_unit(6)
    T = make_matmul(2, 2, 2)
    assert kronecker_power(T, 1) == T
    K = kronecker(T, T)
    M4 = make_matmul(4, 4, 4)
    # pairing: (u1 v1, u2 v2) -> (2u1+u2, 2v1+v2) on every factor

    def pair(idx):
        (x1, y1), (x2, y2) = divmod(idx // 4, 2), divmod(idx % 4, 2)
        return (2 * x1 + x2) * 4 + (2 * y1 + y2)

    mapped = {(pair(i), pair(j), pair(k)): v for (i, j, k), v in K.sparse().items()}
    assert mapped == M4.sparse()


def test_entry_budget():
    with pytest.raises(ResourceBudgetExceeded):
        kronecker(make_unit(20), make_unit(20), budget=1000)
    assert ENTRY_BUDGET > 0


def test_apply_and_direct_sum():
    T = make_cw_little(2)
    assert apply(FactorMapTriple.identity(T.dims), T) == T
    assert direct_sum(make_unit(1), make_unit(1)) == make_unit(2)
    with pytest.raises(DimensionMismatch):
        apply(FactorMapTriple.identity((2, 2, 2)), T)


def test_json_roundtrip_and_one_based_indices():
    T = make_cw_little(2).scale(Fraction(2, 3))
    obj = T.to_json_obj()
    assert all(min(e[:3]) >= 1 for e in obj["entries"])
    assert Tensor3.from_json(T.to_json()) == T


def test_build_family():
    assert build_family("matmul", ["2", "2", "2"]) == make_matmul(2, 2, 2)
    assert build_family("skeletal", ["skew", "6"]).dims == (6, 6, 6)
    with pytest.raises(ValueError):
        build_family("nope", [])


@given(small_tensors(), st.data())
def test_ranks_invariant_under_invertible_maps(T, data):
    g = FactorMapTriple(*(data.draw(invertible_matrices(d)) for d in T.dims))
    assert multilinear_ranks(apply(g, T)) == multilinear_ranks(T)


@given(small_tensors(max_dim=2), small_tensors(max_dim=2))
def test_kronecker_multiplies_ranks(T, S):
    K = kronecker(T, S)
    assert multilinear_ranks(K) == tuple(x * y for x, y in zip(multilinear_ranks(T), multilinear_ranks(S)))
    # rows of flatten(K, A) are ((j j2), (k k2)); the matrix Kronecker product has ((j k), (j2 k2))
    (_, b, c), (_, b2, c2) = T.dims, S.dims
    FK, FT = flatten(K, "A"), flatten(T, "A").kron(flatten(S, "A"))
    for j, k, j2, k2 in product(range(b), range(c), range(b2), range(c2)):
        assert FK.rows[(j * b2 + j2) * c * c2 + k * c2 + k2] == FT.rows[(j * c + k) * b2 * c2 + j2 * c2 + k2]


@given(small_tensors(), small_tensors())
def test_direct_sum_adds_ranks(T, S):
    assert multilinear_ranks(direct_sum(T, S)) == tuple(
        x + y for x, y in zip(multilinear_ranks(T), multilinear_ranks(S))
    )
