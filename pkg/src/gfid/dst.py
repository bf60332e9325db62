"""Cross-relation systems built from diagonalized filter outputs.

For a shared input every pair of outputs satisfies
``h_n_hat * y_m_hat == h_m_hat * y_n_hat`` entrywise in the graph-frequency
domain.  Stacking all pairs (the data selection transform) and multiplying by
the matching Vandermonde structure gives a matrix whose null space contains
the true coefficient vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import FewerThanTwoBlocks, InvalidParams, LengthMismatch
from .filters import FilterBank, IncrementBank, check_orders_increasing
from .graphs import SpectralBasis, block_diag_vandermonde, vandermonde

__all__ = ["Variant", "ObservationSet", "CrossRelationSystem", "dst", "pair_order",
           "build_system", "true_coefficients", "filters_from_solution"]


class Variant(str, Enum):
    MULTI_KNOWN = "multi_known"
    MULTI_OVERSHOOT = "multi_overshoot"
    SINGLE_KNOWN = "single_known"
    SINGLE_OVERSHOOT = "single_overshoot"


@dataclass(frozen=True)
class ObservationSet:
    """Filter outputs and their graph Fourier transforms (one row per output)."""

    outputs: np.ndarray
    spectral: np.ndarray

    @classmethod
    def from_outputs(cls, outputs, basis: SpectralBasis):
        y = np.atleast_2d(np.asarray(outputs, dtype=float))
        if y.shape[0] < 2:
            raise FewerThanTwoBlocks("need at least two observed outputs")
        if y.shape[1] != basis.n:
            raise LengthMismatch(f"outputs have length {y.shape[1]}, graph has {basis.n} nodes")
        return cls(outputs=y, spectral=(basis.u @ y.T).T)

    @property
    def m(self):
        return self.outputs.shape[0]

    @property
    def diag_blocks(self):
        return [np.diag(row) for row in self.spectral]


@dataclass(frozen=True)
class CrossRelationSystem:
    matrix: np.ndarray
    row_map: tuple  # (k, m) filter pair of each block of n rows
    col_map: tuple  # (block index, power) of each column
    variant: Variant
    orders: tuple

    @property
    def shape(self):
        return self.matrix.shape


def pair_order(m_count):
    """Filter pairs in stacking order: (0,1), (0,2), (1,2), (0,3), ..."""
    return [(k, m) for m in range(1, m_count) for k in range(m)]


def dst(blocks):
    """Stack every pairwise difference ``[.. A_m .. -A_k ..]`` of the blocks.

    The pair ``(k, m)`` contributes a block-row with ``A_m`` in column block
    ``k`` and ``-A_k`` in column block ``m``; pairs follow :func:`pair_order`,
    which is exactly the order produced by the recursive definition.
    """
    blocks = [np.asarray(b) for b in blocks]
    if len(blocks) < 2:
        raise FewerThanTwoBlocks("the transform needs at least two blocks")
    shape = blocks[0].shape
    if any(b.shape != shape for b in blocks):
        raise InvalidParams("all blocks must share one shape")
    rows, cols = shape
    count = len(blocks)
    pairs = pair_order(count)
    out = np.zeros((len(pairs) * rows, count * cols), dtype=np.result_type(*blocks))
    for r, (k, m) in enumerate(pairs):
        out[r * rows:(r + 1) * rows, k * cols:(k + 1) * cols] = blocks[m]
        out[r * rows:(r + 1) * rows, m * cols:(m + 1) * cols] = -blocks[k]
    return out


def _psi_bar(lam, orders):
    n, total = len(lam), orders[-1]
    rows = []
    for L in orders:
        rows.append(np.hstack([vandermonde(lam, L), np.zeros((n, total - L))]))
    return np.vstack(rows)


def _theta_bar(lam, overshoot):
    n, m_count = len(lam), len(overshoot)
    total = sum(overshoot)
    out = np.zeros((m_count * n, total))
    offsets = np.r_[0, np.cumsum(overshoot)]
    for m in range(m_count):
        for k in range(m + 1):
            out[m * n:(m + 1) * n, offsets[k]:offsets[k + 1]] = vandermonde(lam, overshoot[k])
    return out


def build_system(obs: ObservationSet, basis: SpectralBasis, orders, variant) -> CrossRelationSystem:
    """Assemble the cross-relation matrix for one of the four model variants.

    ``orders`` are the true orders for the ``*_known`` variants and the
    overshoot orders for the ``*_overshoot`` variants.  ``single_known``
    needs strictly increasing orders.
    """
    variant = Variant(variant)
    orders = tuple(int(q) for q in orders)
    if len(orders) != obs.m:
        raise LengthMismatch(f"{len(orders)} orders for {obs.m} outputs")
    lam = basis.eigenvalues
    if variant in (Variant.MULTI_KNOWN, Variant.MULTI_OVERSHOOT):
        structure = block_diag_vandermonde(lam, orders)
        col_map = tuple((m, j) for m, q in enumerate(orders) for j in range(q))
    elif variant is Variant.SINGLE_KNOWN:
        check_orders_increasing(orders)
        structure = _psi_bar(lam, orders)
        bounds = (0,) + orders
        col_map = tuple((next(m for m in range(len(orders)) if j < bounds[m + 1]), j)
                        for j in range(orders[-1]))
    else:
        if min(orders) < 1:
            raise InvalidParams("overshoot orders must be positive")
        structure = _theta_bar(lam, orders)
        col_map = tuple((m, j) for m, q in enumerate(orders) for j in range(q))
    matrix = dst(obs.diag_blocks) @ structure
    return CrossRelationSystem(matrix=matrix, row_map=tuple(pair_order(obs.m)),
                               col_map=col_map, variant=variant, orders=orders)


def true_coefficients(bank, variant, orders=None):
    """Ground-truth unknown vector matching :func:`build_system`'s columns."""
    variant = Variant(variant)
    if variant is Variant.MULTI_KNOWN:
        return bank.stacked
    if variant is Variant.MULTI_OVERSHOOT:
        return bank.padded(orders)
    if not isinstance(bank, IncrementBank):
        raise InvalidParams("single-process variants need an IncrementBank")
    if variant is Variant.SINGLE_KNOWN:
        return bank.d
    return bank.padded(orders)


def filters_from_solution(vec, variant, orders) -> FilterBank:
    """Per-observation filters encoded by a solution vector of the system."""
    variant = Variant(variant)
    vec = np.asarray(vec, dtype=float)
    orders = tuple(orders)
    if variant in (Variant.MULTI_KNOWN, Variant.MULTI_OVERSHOOT):
        return FilterBank.from_stacked(vec, orders)
    if variant is Variant.SINGLE_KNOWN:
        return IncrementBank.from_full(vec, orders).to_filter_bank()
    width = max(orders)
    offsets = np.r_[0, np.cumsum(orders)]
    acc = np.zeros(width)
    out = []
    for m, q in enumerate(orders):
        acc = acc.copy()
        acc[:q] += vec[offsets[m]:offsets[m + 1]]
        out.append(acc.copy())
    return FilterBank(tuple(out))
