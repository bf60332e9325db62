import numpy as np
import pytest

from gfid.filters import FilterBank, IncrementBank, common_roots
from gfid.graphs import Gso, eigendecompose, generate_graph, spectral_support
from gfid.identifiability import check_multi, check_single, null_dimension


def support_of(k, basis):
    x_hat = np.zeros(basis.n)
    x_hat[:k] = 1.0 + np.arange(k)
    return spectral_support(x_hat, basis)


@pytest.fixture(scope="module")
def basis():
    rng = np.random.default_rng(11)
    while True:
        b = eigendecompose(generate_graph("er", rng, n=25, p=0.2))
        if b.n_distinct == 25 and np.min(np.abs(b.eigenvalues)) > 1e-6:
            return b


def test_null_dimension():
    assert null_dimension(np.eye(3)) == 0
    assert null_dimension(np.array([[1.0, 2.0], [2.0, 4.0]])) == 1
    assert null_dimension(np.zeros((2, 3))) == 3


def test_sufficient_threshold_multi(basis, rng):
    bank = FilterBank(tuple(rng.standard_normal(4) for _ in range(3)))
    rep = check_multi(bank, support_of(7, basis))  # L_max + L_min - 1 = 7
    assert rep.sufficient and rep.exact and not rep.necessary_violated
    rep = check_multi(bank, support_of(3, basis))  # fewer than L_max frequencies
    assert rep.necessary_violated and not rep.exact and not rep.sufficient


def test_shared_root_breaks_identifiability(basis, rng):
    shared = rng.standard_normal()
    polys = [np.polynomial.polynomial.polyfromroots([shared, r]) for r in rng.standard_normal(3)]
    bank = FilterBank(tuple(polys))
    assert common_roots(bank)
    rep = check_multi(bank, support_of(20, basis))
    assert not rep.sufficient and rep.necessary_violated
    assert not rep.exact and rep.null_dim >= 2
    assert rep.consistent()


def test_single_checks(basis, rng):
    bank = IncrementBank.from_full(rng.standard_normal(8), (2, 4, 6, 8))
    rep = check_single(bank, support_of(20, basis))
    assert rep.sufficient and rep.exact and rep.null_dim == 1
    rep = check_single(bank, support_of(2, basis))
    assert rep.necessary_violated and not rep.exact


def test_single_drops_zero_frequency():
    # path graph on 3 nodes has eigenvalues -sqrt2, 0, sqrt2
    a = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
    basis = eigendecompose(Gso(a))
    sup = spectral_support(np.ones(3), basis)
    assert sup.omega1.size == 3 and sup.omega2.size == 2


def test_report_serializes(basis, rng):
    bank = FilterBank(tuple(rng.standard_normal(3) for _ in range(2)))
    d = check_multi(bank, support_of(10, basis)).to_dict()
    assert set(d) == {"sufficient", "necessary_violated", "exact", "null_dim", "shared_roots"}
