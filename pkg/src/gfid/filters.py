"""Polynomial graph filters, their roots, and the synthetic generators.

A filter of order ``L`` is ``H = sum_l h[l] S^l`` (coefficient of ``S^0``
first).  In the eigenbasis it acts as the entrywise product of its
frequency response ``vandermonde(lam, L) @ h`` with ``U x``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import (
    DegenerateFilter,
    InvalidParams,
    InvalidRule,
    LengthMismatch,
    NonIncreasingOrders,
    OrderExceedsMinimalPolynomial,
)
from .graphs import SpectralBasis, vandermonde

TRIM_TOL = 1e-12

__all__ = [
    "GraphFilter",
    "FilterBank",
    "IncrementBank",
    "SharedRoot",
    "apply_filter",
    "frequency_response",
    "filter_roots",
    "common_roots",
    "CorrelatedNormal",
    "IidNormal",
    "FirstEntryOne",
    "DecreasingPositive",
    "generate_filters",
    "Bandlimited",
    "FullNormal",
    "generate_input",
]


@dataclass(frozen=True)
class GraphFilter:
    coeffs: np.ndarray

    def __post_init__(self):
        h = np.array(self.coeffs, dtype=float).ravel()
        if h.size < 1:
            raise InvalidParams("a filter needs at least one coefficient")
        h.setflags(write=False)
        object.__setattr__(self, "coeffs", h)

    @property
    def order(self):
        return self.coeffs.size

    def __call__(self, lam):
        """Evaluate the filter polynomial at ``lam``."""
        return P.polyval(lam, self.coeffs)


@dataclass(frozen=True)
class FilterBank:
    filters: tuple

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(
            f if isinstance(f, GraphFilter) else GraphFilter(f) for f in self.filters))

    @classmethod
    def from_stacked(cls, stacked, orders):
        stacked = np.asarray(stacked, dtype=float)
        if stacked.size != sum(orders):
            raise LengthMismatch(f"stacked length {stacked.size} != sum(orders) {sum(orders)}")
        cuts = np.cumsum(orders)[:-1]
        return cls(tuple(GraphFilter(c) for c in np.split(stacked, cuts)))

    @property
    def orders(self):
        return tuple(f.order for f in self.filters)

    @property
    def stacked(self):
        return np.concatenate([f.coeffs for f in self.filters])

    def __len__(self):
        return len(self.filters)

    def __iter__(self):
        return iter(self.filters)

    def padded(self, overshoot):
        """Zero-padded stacked vector for overshoot orders ``overshoot``."""
        if len(overshoot) != len(self):
            raise LengthMismatch("one overshoot order per filter")
        parts = []
        for f, q in zip(self.filters, overshoot):
            if q < f.order:
                raise InvalidParams(f"overshoot order {q} < true order {f.order}")
            parts.append(np.r_[f.coeffs, np.zeros(q - f.order)])
        return np.concatenate(parts)

    def to_json(self):
        return json.dumps({"orders": list(self.orders),
                           "coeffs": [f.coeffs.tolist() for f in self.filters]})

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        coeffs = data["coeffs"]
        if [len(c) for c in coeffs] != list(data["orders"]):
            raise LengthMismatch("orders do not match coefficient lengths")
        return cls(tuple(GraphFilter(c) for c in coeffs))


@dataclass(frozen=True)
class IncrementBank:
    """Nested filters of a single diffusion sampled at increasing times.

    ``increments[m]`` holds the coefficients added by observation ``m``;
    observation ``m`` sees the prefix of the concatenation up to ``orders[m]``.
    """

    increments: tuple

    def __post_init__(self):
        inc = tuple(np.array(d, dtype=float).ravel() for d in self.increments)
        if not inc or any(d.size < 1 for d in inc):
            raise NonIncreasingOrders("every increment must hold at least one coefficient")
        for d in inc:
            d.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @classmethod
    def from_full(cls, d, orders):
        orders = list(orders)
        if any(b <= a for a, b in zip(orders, orders[1:])) or orders[0] < 1:
            raise NonIncreasingOrders(f"orders must be strictly increasing, got {orders}")
        d = np.asarray(d, dtype=float)
        if d.size != orders[-1]:
            raise LengthMismatch(f"len(d) = {d.size} but L_M = {orders[-1]}")
        return cls(tuple(np.split(d, orders[:-1])))

    @property
    def orders(self):
        return tuple(int(x) for x in np.cumsum([d.size for d in self.increments]))

    @property
    def increment_lengths(self):
        return tuple(d.size for d in self.increments)

    @property
    def d(self):
        return np.concatenate(self.increments)

    def to_filter_bank(self) -> FilterBank:
        full = self.d
        return FilterBank(tuple(GraphFilter(full[:L]) for L in self.orders))

    def padded(self, overshoot):
        """Increment vector laid out for the overshoot system.

        Block ``m`` has length ``overshoot[m]`` and carries ``d^(m)`` at offset
        ``L_{m-1}`` (zero for the first block).
        """
        orders = self.orders
        if len(overshoot) != len(orders):
            raise LengthMismatch("one overshoot order per observation")
        parts = []
        start = 0
        for d, L, q in zip(self.increments, orders, overshoot):
            if q < L:
                raise InvalidParams(f"overshoot order {q} < true order {L}")
            block = np.zeros(q)
            block[start:L] = d
            parts.append(block)
            start = L
        return np.concatenate(parts)


class SharedRoot(NamedTuple):
    value: complex
    multiplicity: int


def _trimmed(coeffs, tol=TRIM_TOL):
    c = np.asarray(coeffs, dtype=float)
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        raise DegenerateFilter("all coefficients are zero")
    keep = np.flatnonzero(np.abs(c) > tol * scale)
    return c[: keep[-1] + 1]


def filter_roots(coeffs) -> np.ndarray:
    """Roots of ``sum_l h[l] z^l`` after trimming negligible leading terms."""
    c = _trimmed(coeffs)
    if c.size < 2:
        return np.array([], dtype=complex)
    return P.polyroots(c)


def apply_filter(filt, basis: SpectralBasis, x):
    """Output ``V diag(Psi h) U x`` of the filter for input ``x``."""
    h = filt.coeffs if isinstance(filt, GraphFilter) else np.asarray(filt, float)
    if h.size > basis.n_distinct:
        raise OrderExceedsMinimalPolynomial(
            f"order {h.size} exceeds the {basis.n_distinct} distinct graph frequencies")
    x = np.asarray(x, dtype=float)
    return basis.v @ (frequency_response(h, basis) * (basis.u @ x))


def frequency_response(filt, basis: SpectralBasis):
    h = filt.coeffs if isinstance(filt, GraphFilter) else np.asarray(filt, float)
    return vandermonde(basis.eigenvalues, h.size) @ h


def common_roots(bank, tol=None) -> list[SharedRoot]:
    """Roots shared by every filter polynomial in ``bank``.

    Roots are matched greedily within ``tol`` (default
    ``1e-7 * (1 + max|root|)``).  A repeated shared root appears once, with
    the smallest multiplicity found across filters.
    """
    filters = bank.filters if hasattr(bank, "filters") else [GraphFilter(c) for c in bank]
    root_sets = [filter_roots(f.coeffs) for f in filters]
    if any(r.size == 0 for r in root_sets):
        return []
    if tol is None:
        biggest = max(float(np.max(np.abs(r))) for r in root_sets)
        tol = 1e-7 * (1.0 + biggest)

    # distinct candidates from the first filter, with multiplicity
    candidates = []
    for z in root_sets[0]:
        for i, (c, mult) in enumerate(candidates):
            if abs(z - c) <= tol:
                candidates[i] = (c, mult + 1)
                break
        else:
            candidates.append((z, 1))

    shared = []
    for c, mult in candidates:
        for roots in root_sets[1:]:
            mult = min(mult, int(np.count_nonzero(np.abs(roots - c) <= tol)))
            if mult == 0:
                break
        if mult > 0:
            value = complex(c)
            if abs(value.imag) <= tol:
                value = complex(value.real, 0.0)
            shared.append(SharedRoot(value, mult))
    return shared


# --------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class CorrelatedNormal:
    """``h^(m) = a h^(1) + (1 - a) n^(m)`` with standard-normal draws."""

    n_filters: int
    order: int
    a: float


@dataclass(frozen=True)
class IidNormal:
    orders: tuple
    nested: bool = False


@dataclass(frozen=True)
class FirstEntryOne:
    """Standard-normal coefficients with the very first one pinned to 1."""

    orders: tuple
    nested: bool = False


@dataclass(frozen=True)
class DecreasingPositive:
    """Nested filters: first coefficient 1, the rest U(lo, hi) sorted descending."""

    orders: tuple
    lo: float = 0.2
    hi: float = 1.0


def _nested(full, orders):
    return IncrementBank.from_full(full, orders)


def generate_filters(rule, rng=None):
    """Draw a filter bank according to ``rule``.

    Nested rules (``nested=True`` or ``DecreasingPositive``) return an
    :class:`IncrementBank`; the others a :class:`FilterBank`.
    """
    rng = np.random.default_rng(rng)
    if isinstance(rule, CorrelatedNormal):
        if rule.n_filters < 1 or rule.order < 1:
            raise InvalidRule("n_filters and order must be positive")
        h1 = rng.standard_normal(rule.order)
        coeffs = [h1]
        for _ in range(1, rule.n_filters):
            coeffs.append(rule.a * h1 + (1.0 - rule.a) * rng.standard_normal(rule.order))
        return FilterBank(tuple(GraphFilter(c) for c in coeffs))
    if isinstance(rule, (IidNormal, FirstEntryOne)):
        orders = tuple(int(x) for x in rule.orders)
        if not orders or min(orders) < 1:
            raise InvalidRule("orders must be positive")
        if rule.nested:
            full = rng.standard_normal(orders[-1])
            if isinstance(rule, FirstEntryOne):
                full[0] = 1.0
            return _nested(full, orders)
        coeffs = [rng.standard_normal(L) for L in orders]
        if isinstance(rule, FirstEntryOne):
            coeffs[0][0] = 1.0
        return FilterBank(tuple(GraphFilter(c) for c in coeffs))
    if isinstance(rule, DecreasingPositive):
        orders = tuple(int(x) for x in rule.orders)
        if not 0 < rule.lo <= rule.hi:
            raise InvalidRule("need 0 < lo <= hi")
        tail = np.sort(rng.uniform(rule.lo, rule.hi, orders[-1] - 1))[::-1]
        return _nested(np.r_[1.0, tail], orders)
    raise InvalidRule(f"unknown filter rule {rule!r}")


@dataclass(frozen=True)
class Bandlimited:
    """Input whose first ``k`` graph-frequency coefficients are standard normal."""

    k: int


@dataclass(frozen=True)
class FullNormal:
    pass


def generate_input(kind, basis: SpectralBasis, rng=None):
    """Return ``(x, x_hat)`` with ``x_hat = U x``."""
    rng = np.random.default_rng(rng)
    n = basis.n
    if isinstance(kind, Bandlimited):
        if not 0 <= kind.k <= n:
            raise InvalidParams(f"bandwidth k={kind.k} outside [0, {n}]")
        x_hat = np.zeros(n)
        x_hat[: kind.k] = rng.standard_normal(kind.k)
        return basis.v @ x_hat, x_hat
    if isinstance(kind, FullNormal):
        x = rng.standard_normal(n)
        return x, basis.u @ x
    raise InvalidParams(f"unknown input kind {kind!r}")


def check_orders_increasing(orders: Sequence[int]):
    orders = list(orders)
    if not orders or orders[0] < 1 or any(b <= a for a, b in zip(orders, orders[1:])):
        raise NonIncreasingOrders(f"orders must be strictly increasing, got {orders}")
    return orders
