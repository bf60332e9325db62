import numpy as np
import pytest
from scipy.optimize import linprog

from gfid.errors import Infeasible, InvalidParams, InvalidScheme
from gfid.sparse import (
    SparseProblem,
    build_weights,
    certificate,
    constrained_variants,
    filter_coefficient_map,
    robustness_constants,
    solve_l1_ball,
    solve_l1_equality,
    support_rank,
)

from helpers import lp_l1_objective, make_instance, overshoot_instance
from gfid.filters import DecreasingPositive


def fig2_problem(rng, q=4, scheme="exponential", sigma=0.0):
    while True:
        inst = overshoot_instance(rng, q=q, sigma=sigma)
        pb = SparseProblem.from_system(inst.system, build_weights(scheme, inst.cols), truth=inst.truth)
        if support_rank(pb.phi[:, pb.support_truth]) == pb.support_truth.size:
            return pb


def with_eps(pb, eps):
    return SparseProblem(phi=pb.phi, b=pb.b, weights=pb.weights, epsilon=eps, pin=pb.pin,
                         truth=pb.truth, support_truth=pb.support_truth, coeff_map=pb.coeff_map)


# weights and problem construction


def test_exponential_weights():
    w = build_weights("exponential", (3, 2))
    np.testing.assert_allclose(w.diag, np.exp([0, 1, 2, 0, 1]))
    assert w.normalized().diag.max() == 1.0
    # pinning the first entry leaves exp(1), exp(2), then the next block
    np.testing.assert_allclose(w.drop(0), np.exp([1, 2, 0, 1]))


def test_weight_errors():
    with pytest.raises(InvalidScheme):
        build_weights("log", (3,))
    with pytest.raises(InvalidScheme):
        build_weights("custom", (3,), values=[1.0, 2.0])
    with pytest.raises(InvalidParams):
        build_weights("custom", (2,), values=[1.0, 0.0])


def test_from_system_pins_and_scales(rng):
    inst = overshoot_instance(rng, q=4)
    truth = 3.0 * inst.truth
    pb = SparseProblem.from_system(inst.system, build_weights("identity", inst.cols), truth=truth)
    a = inst.system.matrix
    np.testing.assert_array_equal(pb.b, a[:, 0])
    np.testing.assert_array_equal(pb.phi, a[:, 1:])
    np.testing.assert_allclose(pb.full(pb.truth), inst.truth / inst.truth[0])
    assert pb.truth_residual() <= 1e-9 * np.linalg.norm(a)
    # padding zeros are off the support
    assert pb.support_truth.size == 8


def test_coefficient_map_single_overshoot():
    tmap, groups = filter_coefficient_map("single_overshoot", (2, 3))
    full = np.array([1.0, 2.0, 0.0, 0.0, 5.0])
    np.testing.assert_array_equal(tmap @ full, [1.0, 2.0, 5.0])
    assert len(groups) == 1


# equality form


def test_equality_matches_lp_oracle():
    rng = np.random.default_rng(5)
    for _ in range(25):
        pb = fig2_problem(rng, q=int(rng.integers(3, 7)), scheme=str(rng.choice(["identity", "exponential"])))
        res = solve_l1_equality(pb)
        ref, _ = lp_l1_objective(pb.phi, pb.b, pb.weights)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(ref, rel=1e-6)
        assert res.residual <= 1e-8 * np.linalg.norm(pb.phi)


def test_exact_recovery_when_certificate_holds():
    rng = np.random.default_rng(9)
    checked = 0
    for _ in range(40):
        pb = fig2_problem(rng)
        rep = certificate(pb)
        if rep.guaranteed:
            res = solve_l1_equality(pb)
            assert pb.error(res.w) < 1e-6
            checked += 1
    assert checked > 20


def test_certificate_two_variable_value():
    # Phi^T Phi = [[1, .5], [.5, 1]], support {0}, delta = 1:
    # G = [[1, .5], [.5, 2]], (G^-1)[1, 0] = -.5 / 1.75
    chol = np.linalg.cholesky(np.array([[1.0, 0.5], [0.5, 1.0]]))
    pb = SparseProblem(phi=chol.T, b=np.zeros(2), weights=np.ones(2), truth=np.array([1.0, 0.0]),
                       support_truth=np.array([0]))
    rep = certificate(pb, delta=1.0)
    assert rep.xi == pytest.approx(2.0 / 7.0)
    assert rep.rank_ok and rep.guaranteed


def test_certificate_needs_support():
    pb = SparseProblem(phi=np.eye(2), b=np.ones(2), weights=np.ones(2))
    with pytest.raises(InvalidParams):
        certificate(pb)


def test_unique_point_returned():
    pb = SparseProblem(phi=np.eye(3), b=np.array([1.0, -2.0, 0.5]), weights=np.ones(3))
    res = solve_l1_equality(pb)
    np.testing.assert_allclose(res.w, [-1.0, 2.0, -0.5])
    assert res.status == "optimal"


def test_inconsistent_system_raises():
    pb = SparseProblem(phi=np.array([[1.0], [1.0]]), b=np.array([1.0, -1.0]), weights=np.ones(1))
    with pytest.raises(Infeasible):
        solve_l1_equality(pb)


# ball form


def test_ball_feasible_and_no_worse_than_truth():
    rng = np.random.default_rng(21)
    for sigma in (1e-2, 1e-3, 1e-4):
        for _ in range(8):
            pb = fig2_problem(rng, sigma=sigma)
            eps = pb.truth_residual()
            res = solve_l1_ball(with_eps(pb, eps))
            assert res.status == "optimal"
            assert res.residual <= eps * (1 + 1e-6)
            assert res.objective <= pb.objective(pb.truth) * (1 + 1e-9)


def test_ball_zero_when_radius_covers_data():
    pb = SparseProblem(phi=np.eye(2), b=np.array([0.3, 0.4]), weights=np.ones(2), epsilon=0.5)
    res = solve_l1_ball(pb)
    np.testing.assert_array_equal(res.w, 0.0)


def test_ball_needs_positive_radius():
    pb = SparseProblem(phi=np.eye(2), b=np.ones(2), weights=np.ones(2))
    with pytest.raises(InvalidParams):
        solve_l1_ball(pb)


def test_ball_matches_cvxpy():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(33)
    for _ in range(6):
        pb = fig2_problem(rng, sigma=1e-3)
        eps = pb.truth_residual()
        res = solve_l1_ball(with_eps(pb, eps))
        w = cp.Variable(pb.phi.shape[1])
        prob = cp.Problem(cp.Minimize(cp.norm1(cp.multiply(pb.weights, w))),
                          [cp.norm(pb.phi @ w + pb.b, 2) <= eps])
        prob.solve()
        assert res.objective == pytest.approx(prob.value, rel=1e-4)


def test_robustness_bound_holds():
    rng = np.random.default_rng(44)
    checked = 0
    for _ in range(60):
        pb = fig2_problem(rng, sigma=float(rng.choice([1e-2, 1e-3, 1e-4])))
        try:
            consts = robustness_constants(pb)
        except Exception:
            continue
        if consts.xi >= 1:
            continue
        eps = pb.truth_residual()
        res = solve_l1_ball(with_eps(pb, eps))
        d = pb.weights / pb.weights.max()
        assert np.sum(d * np.abs(res.w - pb.truth)) <= consts.bound(eps)
        checked += 1
    assert checked >= 30


# priors


def single_problem(rng, sigma=0.0, orders=(3, 5, 7), overshoot=(7, 7, 7), n=25):
    inst = make_instance(rng, "single_overshoot", orders, overshoot=overshoot, n=n, p=0.4,
                         sigma=sigma, rule=DecreasingPositive(orders))
    pb = SparseProblem.from_system(inst.system, build_weights("identity", inst.cols), truth=inst.truth)
    return inst, pb


def prior_lp(pb, cols, decreasing):
    """Oracle for the equality form with priors, written directly over (w, s)."""
    p = pb.phi.shape[1]
    eye = np.eye(p)
    a_ub = [np.block([[eye, -eye], [-eye, -eye]]), np.hstack([-eye, np.zeros((p, p))])]
    b_ub = [np.zeros(2 * p), np.zeros(p)]
    if decreasing:
        width = max(cols)
        tmap = np.hstack([np.eye(width)[:, :q] for q in cols])  # full vector -> longest filter
        diff = np.vstack([tmap[:-1] - tmap[1:], tmap[-1:]])
        a_ub.append(np.hstack([-diff[:, 1:], np.zeros((width, p))]))
        b_ub.append(diff[:, 0])
    # keep an orthonormal basis of the row space so the equalities are independent
    u, sv, vt = np.linalg.svd(pb.phi, full_matrices=False)
    r = int(np.sum(sv > 1e-10 * sv[0]))
    a_eq = np.hstack([vt[:r], np.zeros((r, p))])
    b_eq = -(u[:, :r].T @ pb.b) / sv[:r]
    res = linprog(np.r_[np.zeros(p), pb.weights], A_ub=np.vstack(a_ub), b_ub=np.concatenate(b_ub),
                  A_eq=a_eq, b_eq=b_eq,
                  bounds=[(None, None)] * p + [(0, None)] * p, method="highs")
    return res


@pytest.mark.parametrize("constraint", ["nonnegative", "nonneg_decreasing"])
def test_priors_match_lp_oracle(constraint):
    rng = np.random.default_rng(55)
    for _ in range(20):
        # a small graph leaves a many-dimensional feasible set
        inst, pb = single_problem(rng, orders=(2, 4), overshoot=(4, 5), n=7)
        res = constrained_variants(pb, constraint)
        ref = prior_lp(pb, inst.cols, constraint == "nonneg_decreasing")
        assert ref.status == 0
        assert res.status in ("optimal", "converged")
        assert res.objective == pytest.approx(ref.fun, rel=1e-6)
        assert res.w.min() >= -1e-9


def test_prior_none_is_plain_solver(rng):
    pb = fig2_problem(rng)
    a = constrained_variants(pb, "none")
    b = solve_l1_equality(pb)
    np.testing.assert_allclose(a.w, b.w)
    pb_eps = fig2_problem(rng, sigma=1e-3)
    pb_eps = with_eps(pb_eps, 2 * pb_eps.truth_residual())
    np.testing.assert_allclose(constrained_variants(pb_eps).w, solve_l1_ball(pb_eps).w)


def test_ball_radius_below_least_squares_residual(rng):
    pb = fig2_problem(rng, sigma=1e-2)
    w_ls = np.linalg.lstsq(pb.phi, -pb.b, rcond=None)[0]
    tight = with_eps(pb, 0.5 * pb.residual(w_ls))
    with pytest.raises(Infeasible):
        solve_l1_ball(tight)
    res = constrained_variants(tight)
    assert res.status == "infeasible"
    assert res.residual == pytest.approx(pb.residual(w_ls))


def test_decreasing_prior_in_ball_form():
    rng = np.random.default_rng(66)
    inst, pb = single_problem(rng, sigma=1e-3)
    eps = pb.truth_residual()
    res = constrained_variants(with_eps(pb, eps), "nonneg_decreasing")
    assert res.status in ("optimal", "converged")
    h = np.hstack([np.eye(7)[:, :q] for q in inst.cols]) @ res.full
    assert np.all(np.diff(h) <= 1e-7) and h.min() >= -1e-9
    assert res.residual <= eps * (1 + 1e-6)


def test_infeasible_prior_reports_residual():
    # the data force w = -1, which the nonnegativity prior forbids
    pb = SparseProblem(phi=np.array([[1.0]]), b=np.array([1.0]), weights=np.ones(1))
    res = constrained_variants(pb, "nonnegative")
    assert res.status == "infeasible"
    assert res.residual == pytest.approx(1.0, abs=1e-6)
    res = constrained_variants(with_eps(pb, 0.5), "nonnegative")
    assert res.status == "infeasible" and res.residual > 0.5
    with pytest.raises(Infeasible):
        solve_l1_equality(pb, constraint="nonnegative")


def test_prior_improves_error_when_truth_satisfies_it():
    rng = np.random.default_rng(77)
    plain, shaped = [], []
    for _ in range(15):
        _, pb = single_problem(rng, sigma=1e-4)
        pb = with_eps(pb, pb.truth_residual())
        plain.append(pb.error(constrained_variants(pb, "none").w))
        shaped.append(pb.error(constrained_variants(pb, "nonneg_decreasing").w))
    assert np.median(shaped) <= np.median(plain)
