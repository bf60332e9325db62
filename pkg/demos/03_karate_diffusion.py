"""
A single diffusion on the karate club network
=============================================

One opinion-spreading process is observed after 3, 5 and 7 steps, so the
three filters are nested prefixes of one coefficient vector.  The
coefficients are positive and decreasing.  We compare least squares with
the true orders against l1 recovery with overshoot orders, with and
without the sign and shape priors.
"""

import numpy as np

import gfid
from gfid.dst import filters_from_solution
from gfid.filters import DecreasingPositive, FullNormal

rng = np.random.default_rng(7)
graph = gfid.karate_club()
basis = gfid.eigendecompose(graph)
orders, overshoot = (3, 5, 7), (7, 7, 7)

bank = gfid.generate_filters(DecreasingPositive(orders), rng)
print("true coefficients:", np.round(bank.d, 3))
x, _ = gfid.generate_input(FullNormal(), basis, rng)
clean = [gfid.apply_filter(f, basis, x) for f in bank.to_filter_bank()]

for sigma in (1e-5, 1e-3):
    outputs = np.array([gfid.corrupt(y, sigma, rng) for y in clean])
    obs = gfid.ObservationSet.from_outputs(outputs, basis)
    print(f"\nsigma = {sigma:g}")

    known = gfid.build_system(obs, basis, orders, "single_known")
    res = gfid.solve_nullspace(known, bank.d)
    print(f"  least squares, known orders: error {res.error:.3f}")

    system = gfid.build_system(obs, basis, overshoot, "single_overshoot")
    truth = gfid.true_coefficients(bank, "single_overshoot", overshoot)
    problem = gfid.SparseProblem.from_system(system, gfid.build_weights("identity", overshoot), truth=truth)
    eps = problem.truth_residual()
    ball = gfid.SparseProblem(phi=problem.phi, b=problem.b, weights=problem.weights, epsilon=eps,
                              truth=problem.truth, support_truth=problem.support_truth,
                              coeff_map=problem.coeff_map)
    for constraint in ("none", "nonnegative", "nonneg_decreasing"):
        out = gfid.constrained_variants(ball, constraint)
        h = filters_from_solution(out.full, "single_overshoot", overshoot).filters[-1].coeffs
        err = gfid.alignment_error(h, bank.d)
        print(f"  l1 overshoot, {constraint:>17}: error {err:.3f} ({out.status})")

# The powers of the karate adjacency reach lambda_max**6 ~ 1e5, so the
# columns of the system differ in scale by five orders of magnitude.  Small
# noise already hides the high-power coefficients from the l1 methods.
print("\nlargest eigenvalue:", round(basis.eigenvalues[-1], 3))
