"""Known-order recovery: the smallest right singular vector of the system."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, SvdFailure, ZeroTruth
from .filters import IncrementBank

SUCCESS_THRESHOLD = 0.01
AMBIGUITY_RATIO = 1e-8

__all__ = ["RecoveryResult", "solve_nullspace", "alignment_error", "reconstruct_single",
           "SUCCESS_THRESHOLD"]


@dataclass(frozen=True)
class RecoveryResult:
    """Outcome of a least-squares recovery.

    ``identifiable`` is False when the second smallest singular value is
    itself negligible (``sigma_second / sigma_max < 1e-8``), i.e. the null
    space is not one-dimensional and the estimate is arbitrary within it.
    """

    estimate: np.ndarray
    sigma_min: float
    sigma_second: float
    sigma_max: float
    identifiable: bool
    error: float | None = None
    success: bool | None = None

    @property
    def gap(self):
        """``sigma_min / sigma_second``; close to 0 for a clean 1-D null space."""
        if self.sigma_second == 0.0:
            return float("nan")
        return self.sigma_min / self.sigma_second


def _sign_fix(v):
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def solve_nullspace(system, truth=None, threshold=SUCCESS_THRESHOLD) -> RecoveryResult:
    """Unit-norm minimizer of ``||A h||_2``.

    ``system`` may be a :class:`~gfid.dst.CrossRelationSystem` or a plain
    matrix.  The estimate is sign-normalized so its largest-magnitude entry
    is positive.  When ``truth`` is given the alignment error and the
    success flag (``error < threshold``) are filled in.
    """
    a = np.asarray(getattr(system, "matrix", system), dtype=float)
    if a.ndim != 2 or a.shape[1] < 1:
        raise SvdFailure(f"need a 2-D matrix with at least one column, got {a.shape}")
    try:
        _, s, vt = np.linalg.svd(a, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(str(exc)) from exc
    ncol = a.shape[1]
    # pad with zeros when there are fewer rows than columns
    sv = np.zeros(ncol)
    sv[: s.size] = s
    sigma_max = float(sv[0]) if ncol else 0.0
    sigma_min = float(sv[-1])
    sigma_second = float(sv[-2]) if ncol > 1 else float("inf")
    estimate = _sign_fix(vt[-1].copy())
    identifiable = ncol == 1 or sigma_second > AMBIGUITY_RATIO * sigma_max
    error = success = None
    if truth is not None:
        error = alignment_error(estimate, truth)
        success = bool(error < threshold)
    return RecoveryResult(estimate=estimate, sigma_min=sigma_min, sigma_second=sigma_second,
                          sigma_max=sigma_max, identifiable=bool(identifiable),
                          error=error, success=success)


def alignment_error(estimate, truth) -> float:
    """Relative error after matching the estimate's norm and sign to ``truth``."""
    est = np.asarray(estimate, dtype=float)
    h = np.asarray(truth, dtype=float)
    if est.shape != h.shape:
        raise LengthMismatch(f"shapes differ: {est.shape} vs {h.shape}")
    h_norm = np.linalg.norm(h)
    if h_norm == 0.0:
        raise ZeroTruth("ground truth is the zero vector")
    e_norm = np.linalg.norm(est)
    if e_norm == 0.0:
        return 1.0
    scaled = est * (h_norm / e_norm)
    if scaled @ h < 0:
        scaled = -scaled
    return float(np.linalg.norm(scaled - h) / h_norm)


def reconstruct_single(d, orders):
    """Split a recovered coefficient vector into the nested per-observation filters."""
    d = np.asarray(d, dtype=float)
    orders = list(orders)
    if d.size != orders[-1]:
        raise LengthMismatch(f"len(d) = {d.size} but the longest order is {orders[-1]}")
    bank = IncrementBank.from_full(d, orders)
    return [f.coeffs for f in bank.to_filter_bank()]
