"""Identifiability diagnostics for synthetic instances.

These checks are stated in terms of the *true* filter polynomials, so they
need ground truth and belong to the diagnostics side of an experiment, never
to blind recovery.  Tri-state answers are ``True`` / ``False`` / ``None``
(``None`` when the check does not apply, e.g. fewer than two filters).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySupport
from .filters import FilterBank, IncrementBank, SharedRoot, check_orders_increasing, common_roots
from .graphs import SpectralSupport

__all__ = [
    "IdentifiabilityReport",
    "null_dimension",
    "check_sufficient_multi",
    "check_necessary_multi",
    "exact_matrix_multi",
    "exact_test_multi",
    "check_multi",
    "exact_matrix_single",
    "check_single",
]


@dataclass(frozen=True)
class IdentifiabilityReport:
    sufficient: bool | None
    necessary_violated: bool | None
    exact: bool
    null_dim: int
    shared_roots: list = field(default_factory=list)

    def consistent(self):
        """Sufficient implies exact, and exact rules out a necessary violation."""
        if self.sufficient and not self.exact:
            return False
        if self.exact and self.necessary_violated:
            return False
        return True

    def to_dict(self):
        return {
            "sufficient": self.sufficient,
            "necessary_violated": self.necessary_violated,
            "exact": self.exact,
            "null_dim": self.null_dim,
            "shared_roots": [[r.value.real, r.value.imag, r.multiplicity]
                             for r in self.shared_roots],
        }


def null_dimension(a, rtol=None):
    """Null-space dimension of ``a`` by SVD after column equilibration.

    Rank counts singular values above ``rtol * sigma_max``; the default
    ``rtol`` is ``max(rows, cols) * eps``.  Column scaling leaves the null
    dimension unchanged but removes the spread of Vandermonde column norms.
    """
    a = np.asarray(a, dtype=float)
    rows, cols = a.shape
    norms = np.linalg.norm(a, axis=0)
    nonzero = norms > 0
    scaled = a[:, nonzero] / norms[nonzero]
    zero_cols = int(np.count_nonzero(~nonzero))
    if scaled.shape[1] == 0:
        return cols
    s = np.linalg.svd(scaled, compute_uv=False)
    if rtol is None:
        rtol = max(rows, cols) * np.finfo(float).eps
    rank = int(np.count_nonzero(s > rtol * s[0]))
    return zero_cols + scaled.shape[1] - rank


def _powers(z, length):
    return z ** np.arange(length)


def _block_matrix(poly_values, points, lengths):
    """Assemble ``[diag-of-columns p(z_i) | Z(z_i)]`` over the points."""
    count, m_count = len(points), len(lengths)
    total = sum(lengths)
    offsets = np.r_[0, np.cumsum(lengths)]
    out = np.zeros((m_count * count, count + total), dtype=np.result_type(points, float))
    for i, z in enumerate(points):
        rows = slice(i * m_count, (i + 1) * m_count)
        out[rows, i] = poly_values[:, i]
        for m, length in enumerate(lengths):
            out[i * m_count + m, count + offsets[m]:count + offsets[m + 1]] = _powers(z, length)
    return out


def _poly_values(coeff_list, points):
    return np.array([np.polynomial.polynomial.polyval(points, c) for c in coeff_list])


def check_sufficient_multi(bank: FilterBank, support: SpectralSupport, roots=None):
    """Spectral richness ``>= L_max + L_min - 1`` and no shared root."""
    if len(bank) < 2:
        return None
    orders = bank.orders
    roots = common_roots(bank) if roots is None else roots
    return bool(len(support.omega1) >= max(orders) + min(orders) - 1 and not roots)


def check_necessary_multi(bank: FilterBank, support: SpectralSupport, roots=None):
    """True when the instance is certainly unidentifiable.

    Flags ``|omega1| < L_max``, a root shared by all filters, or too few rows
    for a one-dimensional null space: ``(M-1)|omega1| < sum(L) - 1``.
    """
    if len(bank) < 2:
        return None
    orders = bank.orders
    k = len(support.omega1)
    roots = common_roots(bank) if roots is None else roots
    return bool(k < max(orders) or roots or (len(orders) - 1) * k < sum(orders) - 1)


def exact_matrix_multi(bank: FilterBank, support: SpectralSupport):
    z = support.z1
    if z.size == 0:
        raise EmptySupport("omega1 is empty")
    values = _poly_values([f.coeffs for f in bank], z)
    return _block_matrix(values, z, bank.orders)


def exact_test_multi(bank: FilterBank, support: SpectralSupport, rtol=None):
    """Return ``(identifiable, null_dim)`` from the structured null-space test."""
    dim = null_dimension(exact_matrix_multi(bank, support), rtol)
    return dim == 1, dim


def check_multi(bank: FilterBank, support: SpectralSupport, rtol=None) -> IdentifiabilityReport:
    roots = common_roots(bank)
    exact, dim = exact_test_multi(bank, support, rtol)
    return IdentifiabilityReport(
        sufficient=check_sufficient_multi(bank, support, roots),
        necessary_violated=check_necessary_multi(bank, support, roots),
        exact=exact, null_dim=dim, shared_roots=list(roots))


def exact_matrix_single(bank: IncrementBank, support: SpectralSupport):
    z = support.z2
    if z.size == 0:
        raise EmptySupport("omega2 is empty")
    values = _poly_values(bank.increments, z)
    return _block_matrix(values, z, bank.increment_lengths)


def check_single(bank: IncrementBank, support: SpectralSupport, rtol=None) -> IdentifiabilityReport:
    """All three single-process checks on the increment polynomials."""
    orders = check_orders_increasing(bank.orders)
    lengths = bank.increment_lengths
    k1, k2 = len(support.omega1), len(support.omega2)
    m_count = len(orders)
    roots: list[SharedRoot] = common_roots(FilterBank(bank.increments)) if m_count >= 2 else []

    if m_count < 2:
        sufficient = necessary = None
    else:
        sufficient = bool(k2 >= max(lengths) + min(lengths) - 1 and not roots)
        rank_bound = min(lengths[0], k1) + sum(min(x, k2) for x in lengths[1:])
        necessary = bool(rank_bound < orders[-1] or roots
                         or (m_count - 1) * k2 < orders[-1] - 1)
    if k2 == 0:
        exact, dim = False, orders[-1]
    else:
        dim = null_dimension(exact_matrix_single(bank, support), rtol)
        exact = dim == 1
    return IdentifiabilityReport(sufficient=sufficient, necessary_violated=necessary,
                                 exact=exact, null_dim=dim, shared_roots=list(roots))
