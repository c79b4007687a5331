from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tensorbounds.errors import TemplateMismatch, ZeroTensor
from tensorbounds.linalg import RationalMatrix
from tensorbounds.symmetry import (
    bracket,
    check_annihilates,
    in_span,
    structured_basis_report,
    symmetry_algebra,
)
from tensorbounds.tensor import (
    FactorMapTriple,
    Tensor3,
    apply,
    is_1generic,
    kronecker,
    make_cw_little,
    make_matmul,
    make_skeletal_family,
    make_unit,
    random_tensor,
)

from .conftest import invertible_matrices, small_tensors


def nullity_oracle(T: Tensor3) -> int:
    """dim of {(X,Y,Z) : X.T + Y.T + Z.T = 0} from a dense numpy SVD."""
    X = T.to_numpy()
    a, b, c = X.shape
    cols = []
    for f, n in enumerate((a, b, c)):
        for r in range(n):
            for s in range(n):
                E = np.zeros((n, n))
                E[r, s] = 1.0
                cols.append(np.moveaxis(np.tensordot(E, X, axes=([1], [f])), 0, f).ravel())
    M = np.array(cols).T
    sv = np.linalg.svd(M, compute_uv=False)
    return M.shape[1] - int((sv > 1e-9 * sv[0]).sum())


def _eye(n, scale=1):
    return RationalMatrix.identity(n).scale(scale)


def test_unit():
    for m in (2, 3, 4, 5):
        assert symmetry_algebra(make_unit(m)).dim_g == 2 * m - 2


@pytest.mark.parametrize("q", [2, 3, 4, 5])
def test_cw_little(q):
    assert symmetry_algebra(make_cw_little(q)).dim_g == comb(q, 2) + 1


@pytest.mark.parametrize("kind,m", [("cw", 5), ("cw", 7), ("skew", 6), ("skew", 8)])
def test_skeletal_against_numpy_oracle(kind, m):
    T = make_skeletal_family(kind, m)
    assert symmetry_algebra(T).dim_tilde == nullity_oracle(T)


def test_skeletal_values():
    # dimensions follow the convention dim g = dim g~ - 2
    assert symmetry_algebra(make_skeletal_family("cw", 7)).dim_g == 28
    assert symmetry_algebra(make_skeletal_family("skew", 8)).dim_g == 42


def test_structured_report_blocks():
    rep = structured_basis_report(make_skeletal_family("cw", 7))
    assert rep.blocks["X"] == 10  # so(5)
    rep = structured_basis_report(make_skeletal_family("skew", 8))
    assert rep.blocks["X"] == 21  # sp(6)
    with pytest.raises(TemplateMismatch):
        structured_basis_report(make_matmul(2, 2, 2))


def test_check_annihilates():
    T = make_unit(2)
    Z = RationalMatrix.zeros(2, 2)
    assert check_annihilates((Z, Z, Z), T)
    assert check_annihilates((_eye(2), _eye(2, -1), Z), T)
    E12 = RationalMatrix([[0, 1], [0, 0]])
    assert not check_annihilates((E12, Z, Z), T)


def test_zero_tensor():
    with pytest.raises(ZeroTensor):
        symmetry_algebra(Tensor3.zeros((2, 2, 2)))


def test_matmul():
    # sl2 x sl2 x sl2 for M<2>
    assert symmetry_algebra(make_matmul(2, 2, 2)).dim_g == 9


@given(small_tensors(max_dim=3))
def test_basis_annihilates_and_oracle(T):
    if T.is_zero():
        return
    basis = symmetry_algebra(T)
    assert basis.dim_tilde == nullity_oracle(T)
    for L in basis.triples:
        assert check_annihilates(L, T)
    a, b, c = T.dims
    for lam, mu, nu in ((1, -1, 0), (0, 1, -1)):
        assert in_span(basis, (_eye(a, lam), _eye(b, mu), _eye(c, nu)))


@given(small_tensors(max_dim=3))
def test_lie_subalgebra(T):
    if T.is_zero():
        return
    basis = symmetry_algebra(T)
    for L1 in basis.triples[:4]:
        for L2 in basis.triples[:4]:
            assert in_span(basis, bracket(L1, L2))


@given(small_tensors(max_dim=3), st.data())
def test_dim_invariant_under_invertible_maps(T, data):
    if T.is_zero():
        return
    g = FactorMapTriple(*(data.draw(invertible_matrices(d)) for d in T.dims))
    assert symmetry_algebra(apply(g, T)).dim_tilde == symmetry_algebra(T).dim_tilde


@pytest.mark.parametrize("T,S", [
    (make_unit(2), make_unit(2)),
    (make_cw_little(1), make_unit(2)),
    (make_matmul(1, 1, 2), make_cw_little(1)),
])
def test_kronecker_dim_inequality(T, S):
    lhs = symmetry_algebra(kronecker(T, S)).dim_tilde
    assert lhs >= symmetry_algebra(T).dim_tilde + symmetry_algebra(S).dim_tilde - 2


@pytest.mark.parametrize("seed", [0, 1])
def test_random_one_generic_far_below_threshold(seed):
    m = 7
    T = random_tensor((m, m, m), seed=seed)
    assert is_1generic(T, "A").generic
    assert symmetry_algebra(T).dim_g < m * m / 2 + m / 2 - 2
