"""Instance builders shared by the test modules."""

from types import SimpleNamespace

import numpy as np
from scipy.optimize import linprog

from gfid import (
    ObservationSet,
    apply_filter,
    build_system,
    corrupt,
    eigendecompose,
    generate_filters,
    generate_graph,
    generate_input,
    true_coefficients,
)
from gfid.filters import FirstEntryOne, FullNormal, IidNormal, IncrementBank

SINGLE = ("single_known", "single_overshoot")


def make_instance(rng, variant, orders, overshoot=None, n=20, p=0.3, sigma=0.0, rule=None):
    """Random noiseless (or noisy) instance of one of the four system variants."""
    g = generate_graph("er", rng, n=n, p=p)
    basis = eigendecompose(g)
    if rule is None:
        rule = IidNormal(tuple(orders), nested=variant in SINGLE)
    bank = generate_filters(rule, rng)
    x, x_hat = generate_input(FullNormal(), basis, rng)
    filters = bank.to_filter_bank() if isinstance(bank, IncrementBank) else bank
    clean = np.array([apply_filter(f, basis, x) for f in filters])
    ys = np.array([corrupt(y, sigma, rng) for y in clean])
    obs = ObservationSet.from_outputs(ys, basis)
    cols = tuple(overshoot) if overshoot is not None else tuple(orders)
    system = build_system(obs, basis, cols, variant)
    truth = true_coefficients(bank, variant, cols)
    return SimpleNamespace(graph=g, basis=basis, bank=bank, filters=filters, x=x, x_hat=x_hat,
                           outputs=ys, system=system, truth=truth, cols=cols)


def overshoot_instance(rng, q=4, n=30, p=0.1, sigma=0.0, orders=(3, 3, 3)):
    """Multi-filter instance with the first coefficient pinned to one."""
    return make_instance(rng, "multi_overshoot", orders, overshoot=(q,) * len(orders), n=n, p=p,
                         sigma=sigma, rule=FirstEntryOne(tuple(orders)))


def lp_l1_objective(phi, b, weights):
    """Oracle: min sum(d |w|) s.t. phi w = -b, as an LP over (w, s) with |w| <= s."""
    p = phi.shape[1]
    c = np.r_[np.zeros(p), weights]
    eye = np.eye(p)
    a_ub = np.block([[eye, -eye], [-eye, -eye]])
    a_eq = np.hstack([phi, np.zeros_like(phi)])
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(2 * p), A_eq=a_eq, b_eq=-b,
                  bounds=[(None, None)] * p + [(0, None)] * p, method="highs")
    assert res.status == 0, res.message
    return res.fun, res.x[:p]
