import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tensorbounds.bounds import flattening_bound, koszul_bound, strassen_commutator_bound, strassen_minrank_test
from tensorbounds.decomposition import (
    BLOWUP,
    CONVERGED,
    EXHAUSTED,
    ALSOptions,
    BilinearDecomposition,
    BorderFamily,
    als_search,
    border_decomposition_eval,
    classical_decomposition,
    classify,
    matmul_check,
    strassen_decomposition,
    tangent_family,
    unit_decomposition,
    verify_decomposition,
)
from tensorbounds.errors import DimensionMismatch, NotConvergent
from tensorbounds.tensor import Tensor3, make_matmul, make_unit, multilinear_ranks


def test_strassen_exact():
    v = verify_decomposition(make_matmul(2, 2, 2), strassen_decomposition())
    assert v.ok and v.residual == 0
    assert strassen_decomposition().r == 7


def test_classical_exact():
    assert verify_decomposition(make_matmul(2, 2, 2), classical_decomposition()).ok
    assert matmul_check(classical_decomposition(2, 3, 2), 2, 3, 2)


def test_sign_flip_detected():
    D = strassen_decomposition()
    u, v, w = D.triples[2]
    flipped = BilinearDecomposition(D.triples[:2] + [([-x for x in u], v, w)] + D.triples[3:])
    res = verify_decomposition(make_matmul(2, 2, 2), flipped)
    assert not res.ok and res.residual > 0
    assert not verify_decomposition(make_matmul(2, 2, 2), strassen_decomposition("wrong")).ok


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        verify_decomposition(make_unit(3), strassen_decomposition())


def test_json_roundtrip():
    D = strassen_decomposition()
    again = BilinearDecomposition.from_json_obj(json.loads(json.dumps(D.to_json_obj())))
    assert again.tensor() == D.tensor()


def test_als_unit():
    res = als_search(make_unit(3), 3)
    assert res.trace.outcome == CONVERGED and res.trace.final_residual < 1e-8
    assert verify_decomposition(make_unit(3), res.decomposition, tol=1e-8).ok


def test_als_matmul2():
    M2 = make_matmul(2, 2, 2)
    res = als_search(M2, 7, restarts=20)
    assert res.trace.outcome == CONVERGED and res.trace.final_residual < 1e-6
    # float re-evaluation reproduces the reported residual
    again = verify_decomposition(M2, res.decomposition, tol=1e-6).residual
    assert again <= 2 * res.trace.final_residual + 1e-15


def test_als_seed_determinism():
    T = make_unit(2)
    a = als_search(T, 2, seed=5, restarts=2, max_iters=50)
    b = als_search(T, 2, seed=5, restarts=2, max_iters=50)
    assert [t.to_json_obj() for t in a.restarts] == [t.to_json_obj() for t in b.restarts]
    assert json.dumps(a.trace.to_json_obj()) == json.dumps(b.trace.to_json_obj())


def test_classify():
    opts = ALSOptions()
    assert classify(1e-9, 1.0, opts) == CONVERGED
    assert classify(1e-5, 1e4, opts) == BLOWUP
    assert classify(1e-2, 1e4, opts) == EXHAUSTED


def test_unknown_option():
    with pytest.raises(TypeError):
        als_search(make_unit(2), 2, nonsense=1)


def test_tangent_family_limit():
    ev = border_decomposition_eval(tangent_family(), t0=Fraction(1, 2))
    W = Tensor3.from_sparse((2, 2, 2), {(0, 0, 1): 1, (0, 1, 0): 1, (1, 0, 0): 1})
    assert ev.limit == W
    assert multilinear_ranks(ev.limit) == (2, 2, 2)
    assert strassen_minrank_test(ev.limit).passed


def test_tangent_limit_als_swamp():
    # rank 3 but border rank 2: at r = 2 coefficients grow while the residual falls.
    # ALS creeps here, so the blow-up thresholds are scaled to what a short run reaches.
    W = border_decomposition_eval(tangent_family()).limit
    opts = ALSOptions(seed=0, restarts=1, max_iters=1500, blowup_residual_tol=1e-2, blowup_threshold=5.0)
    res = als_search(W, 2, opts)
    tr = res.trace
    assert tr.outcome == BLOWUP
    assert tr.residual_history[-1] < tr.residual_history[10]
    assert tr.coeff_history[-1] > tr.coeff_history[10]


def test_constant_and_divergent_families():
    U = make_unit(2)
    fam = BorderFamily([([1, 0], [1, 0], [1, 0]), ([0, 1], [0, 1], [0, 1])])
    assert border_decomposition_eval(fam, target=U).matches_target
    bad = BorderFamily([([1, 0], [1, 0], [1, 0])], t_power=1)
    with pytest.raises(NotConvergent):
        border_decomposition_eval(bad)


def _shipped():
    yield make_matmul(2, 2, 2), strassen_decomposition()
    yield make_matmul(2, 2, 2), classical_decomposition()
    for r in (2, 3, 4, 5):
        yield make_unit(r), unit_decomposition(r)


def test_sandwich_on_shipped_decompositions():
    for T, D in _shipped():
        assert verify_decomposition(T, D).ok
        certs = [flattening_bound(T), strassen_commutator_bound(T)]
        if T.dims[0] >= 3:
            certs.append(koszul_bound(T, 1))
        for cert in certs:
            assert cert.bound <= D.r


@given(st.lists(st.tuples(*(st.lists(st.integers(-3, 3), min_size=2, max_size=2),) * 3), min_size=1, max_size=4))
def test_exact_decomposition_verifies_its_own_tensor(triples):
    D = BilinearDecomposition(triples)
    assert verify_decomposition(D.tensor(), D).ok
    assert np.allclose(D.reconstruct(), D.tensor().to_numpy())
