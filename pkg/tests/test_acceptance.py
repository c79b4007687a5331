"""Acceptance criteria, one PASS/FAIL line each.

Run under pytest (lines appear in the terminal summary) or directly with
``python -m tests.test_acceptance``.
"""

import math
import time
from math import comb

from tensorbounds.apolarity import apolarity_feasible, point_ideal
from tensorbounds.bounds import best_bound, flattening_bound, koszul_bound, strassen_commutator_bound, verify_certificate
from tensorbounds.decomposition import (
    BLOWUP,
    CONVERGED,
    ALSOptions,
    als_search,
    classical_decomposition,
    strassen_decomposition,
    unit_decomposition,
    verify_decomposition,
)
from tensorbounds.engine import count_operations, estimate_exponent, recursive_multiply
from tensorbounds.symmetry import symmetry_algebra
from tensorbounds.tensor import (
    is_concise,
    make_bini,
    make_cw_little,
    make_matmul,
    make_skeletal_family,
    make_unit,
    multilinear_ranks,
    random_tensor,
)

from .conftest import ACCEPTANCE_LINES


def report(n, title, ok, detail, elapsed):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {title} ({elapsed:.1f}s) {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    return ok


def test_criterion_1_strassen():
    import numpy as np

    t0 = time.monotonic()
    D = strassen_decomposition()
    exact = verify_decomposition(make_matmul(2, 2, 2), D).ok
    mults = [count_operations(D, (2 ** k,) * 3).scalar_mults for k in range(1, 9)]
    counts_ok = mults == [7 ** k for k in range(1, 9)]
    # execute a few sizes so the counter is spot-checked against real runs
    rng = np.random.default_rng(0)
    executed_ok = True
    for k in (1, 3, 5):
        A = rng.integers(-9, 10, size=(2 ** k, 2 ** k))
        B = rng.integers(-9, 10, size=(2 ** k, 2 ** k))
        Z, cnt = recursive_multiply(A, B, D)
        executed_ok &= bool((Z == A @ B).all()) and cnt.scalar_mults == 7 ** k
    fit = estimate_exponent(D, [2 ** k for k in range(1, 9)]).fitted_exponent
    elapsed = time.monotonic() - t0
    ok = exact and counts_ok and executed_ok and abs(fit - math.log2(7)) < 0.01 and elapsed < 60
    assert report(1, "Strassen identity, 7^k counts, exponent fit", ok,
                  f"exact={exact} counts={counts_ok} executed={executed_ok} fit={fit:.6f}", elapsed)


def test_criterion_2_commutator():
    t0 = time.monotonic()
    b2 = strassen_commutator_bound(make_matmul(2, 2, 2)).bound
    b3 = strassen_commutator_bound(make_matmul(3, 3, 3)).bound
    elapsed = time.monotonic() - t0
    ok = b2 == 6 and b3 == 14 and elapsed < 30
    assert report(2, "commutator bounds M<2> = 6, M<3> = 14", ok, f"got {b2}, {b3}", elapsed)


def test_criterion_3_koszul():
    t0 = time.monotonic()
    c2 = koszul_bound(make_matmul(2, 2, 2), 1)
    c3 = koszul_bound(make_matmul(3, 3, 3), 2)
    verified = verify_certificate(c2, make_matmul(2, 2, 2)) and verify_certificate(c3, make_matmul(3, 3, 3))
    elapsed = time.monotonic() - t0
    ok = c2.bound == 6 and c3.bound == 15 and verified and elapsed < 300
    assert report(3, "Koszul bounds M<2> p=1 = 6, M<3> p=2 = 15", ok,
                  f"got {c2.bound}, {c3.bound}, certificates re-verified={verified}", elapsed)


def test_criterion_4_symmetry():
    t0 = time.monotonic()
    mismatches = []
    for q in range(2, 6):
        got = symmetry_algebra(make_cw_little(q)).dim_g
        if got != comb(q, 2) + 1:
            mismatches.append(f"cw_{q}: {got} vs {comb(q, 2) + 1}")
    for m in (7, 8, 9):
        want = m * m / 2 + m / 2 - 2
        got = symmetry_algebra(make_skeletal_family("cw", m)).dim_g
        if got != want:
            mismatches.append(f"CW m={m}: {got} vs {want:g}")
    for m in (8, 10):
        want = m * m / 2 + 3 * m / 2 - 4
        got = symmetry_algebra(make_skeletal_family("skew", m)).dim_g
        if got != want:
            mismatches.append(f"skewCW m={m}: {got} vs {want:g}")
    elapsed = time.monotonic() - t0
    ok = not mismatches and elapsed < 600
    detail = "all dimensions match" if not mismatches else "mismatches: " + "; ".join(mismatches)
    assert report(4, "symmetry algebra dimensions", ok, detail, elapsed)


def test_criterion_5_bini():
    t0 = time.monotonic()
    T = make_bini()
    r5 = als_search(T, 5, ALSOptions(seed=0, restarts=20, max_iters=20000))
    blowups = [t for t in r5.restarts if t.outcome == BLOWUP]
    best5 = min(r5.restarts, key=lambda t: t.final_residual)
    r6 = als_search(T, 6, ALSOptions(seed=0, restarts=20, max_iters=20000))
    conv = [t for t in r6.restarts if t.outcome == CONVERGED and t.final_coeff < 1e3]
    elapsed = time.monotonic() - t0
    ok = bool(blowups) and bool(conv) and elapsed < 300
    detail = (
        f"r=5: {len(blowups)}/20 blow-up restarts, best residual {best5.final_residual:.2e} "
        f"at coefficient max-norm {best5.final_coeff:.2e}; "
        f"r=6: {len(conv)}/20 converged with bounded coefficients"
    )
    assert report(5, "Bini blow-up at r=5, convergence at r=6", ok, detail, elapsed)


def _zoo():
    yield "unit2", make_unit(2)
    yield "unit3", make_unit(3)
    yield "unit4", make_unit(4)
    yield "M<2,2,2>", make_matmul(2, 2, 2)
    yield "M<2,2,3>", make_matmul(2, 2, 3)
    for q in (2, 3, 4):
        yield f"cw_{q}", make_cw_little(q)
    yield "CW m=5", make_skeletal_family("cw", 5)
    yield "skewCW m=6", make_skeletal_family("skew", 6)
    yield "Bini", make_bini()
    yield "random 3x3x3", random_tensor((3, 3, 3), seed=0)


def test_criterion_6_apolarity_basic():
    t0 = time.monotonic()
    failures = []
    emitted = 0
    for name, T in _zoo():
        assert is_concise(T)
        res = apolarity_feasible(T, max(multilinear_ranks(T)) - 1, budget=60)
        if res.status != "infeasible":
            failures.append(f"{name} at m-1: {res.status}")
    for m in (1, 2, 3, 4):
        res = apolarity_feasible(make_unit(m), m, budget=60)
        P = point_ideal(m)
        has_point = any(all(c.spaces[d] == P.spaces[d] for d in c.spaces) for c in res.candidates)
        if res.status != "feasible" or not has_point:
            failures.append(f"unit{m} at r=m: {res.status}, point ideal present={has_point}")
        for c in res.candidates:
            emitted += 1
            if not c.hilbert_cap_holds():
                failures.append(f"unit{m}: Hilbert cap violated")
    elapsed = time.monotonic() - t0
    ok = not failures and elapsed < 300
    detail = f"{emitted} candidates checked" if ok else "; ".join(failures)
    assert report(6, "apolarity codim infeasibility, unit point ideals, Hilbert cap", ok, detail, elapsed)


def test_criterion_7_stretch_matmul2_r6():
    t0 = time.monotonic()
    res = apolarity_feasible(make_matmul(2, 2, 2), 6, D=3, budget=3600)
    elapsed = time.monotonic() - t0
    ok = res.status == "infeasible"
    detail = f"status={res.status} reason={res.reason} borel={res.stats.get('borel')}"
    # non-blocking: an inconclusive outcome with its stratum report is accepted
    report(7, "STRETCH apolarity M<2> r=6 infeasible", ok, detail, elapsed)
    assert res.status in ("infeasible", "inconclusive")


def test_criterion_8_sandwich():
    t0 = time.monotonic()
    shipped = [
        ("M<2> Strassen", make_matmul(2, 2, 2), strassen_decomposition()),
        ("M<2> classical", make_matmul(2, 2, 2), classical_decomposition()),
        ("M<2,3,2> classical", make_matmul(2, 3, 2), classical_decomposition(2, 3, 2)),
    ] + [(f"unit{r}", make_unit(r), unit_decomposition(r)) for r in range(1, 6)]
    violations = []
    checked = 0
    for name, T, D in shipped:
        assert verify_decomposition(T, D).ok
        certs = [flattening_bound(T), best_bound(T, budget=60)]
        for cert in certs:
            checked += 1
            if not verify_certificate(cert, T) or cert.bound > D.r:
                violations.append(f"{name}: {cert.method} {cert.bound} > {D.r}")
    elapsed = time.monotonic() - t0
    ok = not violations
    detail = f"{checked} certificates <= decomposition size" if ok else "; ".join(violations)
    assert report(8, "certified lower bound <= verified decomposition size", ok, detail, elapsed)


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn()
            except AssertionError:
                pass
