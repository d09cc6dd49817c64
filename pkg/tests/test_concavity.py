from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from curvlab.concavity import (
    ConcavityReport,
    LuQuery,
    NotInConeError,
    RenWangQuery,
    SigmaBoundError,
    adversarial,
    check_quotient_concavity,
    check_semiconvexity_implication,
    find_beta,
    find_delta_prime,
    lu_form,
    lu_matrices,
    quotient_second_derivative,
    renwang_form,
    renwang_matrices,
    sample_lu,
    sample_renwang,
)
from curvlab.errors import DegenerateDenominatorError, DomainError, PreconditionError
from curvlab.symfunc import PrincipalCurvatures, cone_order, derivatives, sample_cone_array, sigma, sigma_grad

# a strictly ordered point of Gamma_2 in R^3 with sigma_2 in [1, 10]
RW_KAPPA = np.array([3.0, 0.5, 0.2])


def rw_query(xi, kappa=RW_KAPPA, n=3, k=2, beta=1.0, bounds=(1.0, 10.0)):
    return RenWangQuery(n, k, PrincipalCurvatures.from_values(kappa), np.asarray(xi, float), beta, bounds)


# --- Ren-Wang form -------------------------------------------------------


def test_renwang_zero_xi():
    assert renwang_form(rw_query(np.zeros(3))) == 0.0


@pytest.mark.parametrize("j", [1, 2])
def test_renwang_unit_vector_closed_form(j):
    beta = 0.7
    val = renwang_form(rw_query(np.eye(3)[j], beta=beta))
    g = sigma_grad(RW_KAPPA, 2)
    k1 = RW_KAPPA[0]
    expected = k1 * beta * g[j] ** 2 + 2 * k1 / (k1 - RW_KAPPA[j]) * g[j]
    assert val == pytest.approx(expected, rel=1e-14)
    assert val > 0


def test_renwang_matches_matrix_form():
    rng = np.random.default_rng(5)
    K = sample_renwang(5, 3, 1.0, 10.0, 10.0, 50, seed=2)
    L, R = renwang_matrices(K, 3, 0.25)
    for b in range(len(K)):
        xi = rng.normal(size=5)
        q = RenWangQuery(5, 3, PrincipalCurvatures.from_values(K[b]), xi, 0.25, (1.0, 10.0))
        direct = renwang_form(q)
        quad = xi @ (L[b] - R[b]) @ xi
        assert direct == pytest.approx(quad, rel=1e-10, abs=1e-10 * np.abs(L[b]).max())


@given(arrays(np.float64, 3, elements=st.floats(-5, 5)), st.floats(-20, 20).filter(lambda t: abs(t) > 1e-3))
def test_renwang_quadratic_in_xi(xi, t):
    base = renwang_form(rw_query(xi))
    scaled = renwang_form(rw_query(t * xi))
    assert scaled == pytest.approx(t * t * base, rel=1e-10, abs=1e-12 * t * t * max(1.0, float(xi @ xi)) * 100)


def test_renwang_caller_order_respected():
    # xi attaches to kappa in the caller's ordering
    kap = RW_KAPPA[[2, 0, 1]]
    xi = np.array([0.3, -1.0, 2.0])
    a = renwang_form(rw_query(xi, kappa=kap))
    b = renwang_form(rw_query(xi[[1, 2, 0]]))
    assert a == b


def test_renwang_query_gates():
    with pytest.raises(DegenerateDenominatorError):
        rw_query(np.ones(3), kappa=[2.0, 2.0, 0.1], bounds=(0.0, 100.0))
    with pytest.raises(SigmaBoundError):
        rw_query(np.ones(3), bounds=(50.0, 60.0))
    with pytest.raises(NotInConeError):
        rw_query(np.ones(3), kappa=[1.0, -1.0, -1.0], bounds=(-10.0, 10.0))
    with pytest.raises(PreconditionError):
        RenWangQuery(4, 2, PrincipalCurvatures.from_values([4, 3, 2, 1]), np.ones(4), 1.0, (0, 100))
    with pytest.raises(DomainError):
        rw_query(np.ones(2))


def test_sample_renwang_constraints():
    K = sample_renwang(5, 3, 1.0, 10.0, 100.0, 400, seed=3)
    s = sigma(K, 3)
    assert np.all(cone_order(K) >= 3)
    assert np.all((s >= 1.0) & (s <= 10.0))
    assert np.all(K[:, 0] >= 100.0)
    assert np.all(K[:, 0] > K[:, 1])


def test_find_beta_small_budget():
    rep = find_beta(3, 2, 1.0, 10.0, 100.0, budget=2000, seed=1)
    assert rep.passed and rep.samples_tested == 2000
    assert rep.found_constant is not None and 2.0**-20 <= rep.found_constant <= 2.0**20
    # the certificate holds for the reported beta on these samples
    K = sample_renwang(3, 2, 1.0, 10.0, 100.0, 2000, seed=1)
    _, _, _, gap = adversarial(*renwang_matrices(K, 2, rep.found_constant))
    assert gap.min() >= -1e-10


def test_find_beta_empty_budget():
    rep = find_beta(5, 3, 1.0, 10.0, 10.0, budget=0)
    assert rep.samples_tested == 0 and rep.found_constant is None and rep.passed


def test_find_beta_deterministic():
    a = find_beta(4, 3, 1.0, 10.0, 10.0, budget=500, seed=9)
    b = find_beta(4, 3, 1.0, 10.0, 10.0, budget=500, seed=9)
    assert a.to_dict() == b.to_dict()


# --- Lu ------------------------------------------------------------------


def lu_query(kappa, xi, n=4, k=3, l=1, dp=0.25):
    return LuQuery(n, k, l, PrincipalCurvatures.from_values(kappa), np.asarray(xi, float), 0.1, 1 / 3, 0.5, dp)


LU_KAPPA = np.array([100.0, 10.0, 5.0, 1.0])


def test_lu_zero_xi():
    assert lu_form(lu_query(LU_KAPPA, np.zeros(4))) == (0.0, 0.0, True)


def test_lu_first_axis_direct_evaluation():
    K = 1e4
    kap = np.array([K, 0.5 * 0.25 * K, 1e-3, 1e-3])
    lhs, rhs, holds = lu_form(lu_query(kap, np.eye(4)[0]))
    g = sigma_grad(kap, 3)
    s = sigma(kap, 3)
    assert lhs == pytest.approx((g[0] / s) ** 2, rel=1e-12)
    assert rhs == pytest.approx(0.9 / K**2, rel=1e-12)
    assert holds


@given(arrays(np.float64, 4, elements=st.floats(-3, 3)), st.floats(-50, 50).filter(lambda t: abs(t) > 1e-2))
def test_lu_homogeneity_and_verdict(xi, t):
    q1 = lu_form(lu_query(LU_KAPPA, xi))
    q2 = lu_form(lu_query(LU_KAPPA, t * xi))
    tol = 1e-10 * t * t * max(abs(q1.lhs), abs(q1.rhs), 1e-300)
    assert abs(q2.lhs - t * t * q1.lhs) <= tol + 1e-300
    assert abs(q2.rhs - t * t * q1.rhs) <= tol + 1e-300
    assert q1.holds == q2.holds


def test_lu_query_gates():
    with pytest.raises(PreconditionError):
        lu_query([100.0, 90.0, 5.0, 1.0], np.ones(4), dp=0.25)
    with pytest.raises(DomainError):
        lu_query(LU_KAPPA, np.ones(4), dp=1.5)
    with pytest.raises(NotInConeError):
        lu_query([1.0, -1.0, -1.0, -1.0], np.ones(4))


def test_sample_lu_constraints():
    K = sample_lu(5, 3, 2, 1 / 3, 2.0**-3, 500, seed=4)
    assert np.all(cone_order(K) >= 3)
    assert np.all(K[:, 1] >= K[:, 0] / 3)
    assert np.all(K[:, 2] <= 2.0**-3 * K[:, 0])
    assert np.all(np.diff(K, axis=1) <= 0)


def test_sample_lu_near_one_delta_terminates():
    K = sample_lu(4, 3, 2, 0.999, 0.25, 200, seed=0)
    assert len(K) == 200
    assert np.all(K[:, 1] >= 0.999 * K[:, 0])


def test_find_delta_prime_small_budget():
    rep = find_delta_prime(6, 3, 1, 0.1, 1 / 3, 0.5, budget=1000, seed=2)
    assert rep.passed and rep.found_constant >= 2.0**-30
    # each tested delta' before the found one is recorded with its violations
    sweep = rep.params["sweep"]
    assert sweep[-1]["delta_prime"] == rep.found_constant and sweep[-1]["violations"] == 0
    assert all(s["violations"] > 0 for s in sweep[:-1])


def test_find_delta_prime_near_one_delta():
    rep = find_delta_prime(4, 3, 2, 0.1, 0.999, 0.5, budget=300, seed=1)
    assert rep.samples_tested == 300


def test_find_delta_prime_empty_budget():
    rep = find_delta_prime(4, 3, 1, 0.1, 1 / 3, 0.5, budget=0)
    assert rep.samples_tested == 0 and rep.found_constant is None


def test_lu_matrices_agree_with_form():
    rng = np.random.default_rng(8)
    K = sample_lu(5, 4, 2, 1 / 3, 0.125, 30, seed=8)
    L, R = lu_matrices(K, 4, 2, 0.1, 0.5)
    for b in range(len(K)):
        xi = rng.normal(size=5)
        lhs, rhs, _ = lu_form(LuQuery(5, 4, 2, PrincipalCurvatures.from_values(K[b]), xi, 0.1, 1 / 3, 0.5, 0.125))
        k1 = K[b, 0]
        assert xi @ L[b] @ xi == pytest.approx(lhs * k1**2, rel=1e-9, abs=1e-9)
        assert xi @ R[b] @ xi == pytest.approx(rhs * k1**2, rel=1e-9, abs=1e-9)


# --- quotient second derivative and quotient concavity -------------------


def test_quotient_second_derivative_example():
    value, quotient, disc = quotient_second_derivative([3, 2, 1], 2, 0, 1)
    assert value == 1 and quotient == 1 and disc == 0


def test_quotient_second_derivative_degenerate_branch():
    value, quotient, disc = quotient_second_derivative([2, 2, 1], 3, 0, 1)
    assert value == 1 and quotient is None and disc is None


def test_quotient_second_derivative_random():
    K = sample_cone_array(6, 4, 200, seed=12)
    for kap in K:
        for i, j in ((0, 1), (2, 5), (1, 3)):
            value, quotient, disc = quotient_second_derivative(kap, 4, i, j)
            if quotient is not None:
                assert disc <= 1e-10 * max(1.0, abs(value))


def test_quotient_concavity_examples():
    assert check_quotient_concavity([3, 2, 1], np.zeros(3), 2) == (True, 0.0)
    ok, gap = check_quotient_concavity([3, -1, 2], [1.0, 5.0, -2.0], 1)
    assert ok and gap == 0.0
    with pytest.raises(NotInConeError):
        check_quotient_concavity([1, -2, -2], np.ones(3), 1)


def test_linear_sigma_has_no_hessian():
    K = sample_cone_array(5, 1, 20, seed=3)
    _, _, H = derivatives(K, 1)
    assert not H.any()


@given(st.integers(0, 2**31 - 1), st.data())
def test_quotient_concavity_permutation_invariant(seed, data):
    kap = sample_cone_array(5, 3, 1, seed=seed)[0]
    xi = np.random.default_rng(seed).normal(size=5)
    perm = list(data.draw(st.permutations(range(5))))
    ok1, gap1 = check_quotient_concavity(kap, xi, 3)
    ok2, gap2 = check_quotient_concavity(kap[perm], xi[perm], 3)
    assert ok1 and ok2
    assert gap2 == pytest.approx(gap1, rel=1e-10, abs=1e-10 * max(1.0, abs(gap1)))


# --- semi-convexity ------------------------------------------------------


def test_semiconvexity_example():
    eta, holds = check_semiconvexity_implication([1, 1, 1, 1], 2, 6.0)
    assert eta == pytest.approx(4 * math.sqrt(6)) and holds


def test_semiconvexity_gates():
    # Gamma_2 but not Gamma_3
    kap = np.array([1.0, 1.0, -0.4])
    with pytest.raises(NotInConeError):
        check_semiconvexity_implication(kap, 2, 10.0)
    with pytest.raises(SigmaBoundError):
        check_semiconvexity_implication([1, 1, 1, 1], 2, 5.0)
    assert not issubclass(NotInConeError, SigmaBoundError)


def test_semiconvexity_on_samples():
    K = sample_cone_array(6, 4, 300, seed=21)
    for kap in K:
        assert check_semiconvexity_implication(kap, 3, sigma(kap, 3)).holds


# --- reports -------------------------------------------------------------


def test_report_round_trip_and_merge():
    a = ConcavityReport("x", {"n": 3}, 1, 10, samples_tested=10, tightest=[{"rel_gap": 0.2}])
    b = ConcavityReport("x", {"n": 3}, 1, 5, samples_tested=5, violation_count=1, violations=[{"rel_gap": -1.0}])
    m = a.merge(b)
    assert m.samples_tested == 15 and m.violation_count == 1 and not m.passed
    assert b.merge(a).to_dict() == m.to_dict() | {"budget": 15}
    assert ConcavityReport.from_dict(m.to_dict()).to_dict() == m.to_dict()
