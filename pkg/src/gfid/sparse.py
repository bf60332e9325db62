"""Unknown-order recovery by weighted l1-analysis minimization.

With overshoot orders the cross-relation system has a null space larger
than one dimension.  Pinning one coefficient to 1 and splitting off its
column gives ``A = [b, Phi]``; the estimate is then

    minimize ||diag(weights) w||_1  subject to  Phi w = -b
    minimize ||diag(weights) w||_1  subject to  ||Phi w + b||_2 <= eps

Both are solved with ADMM followed by an active-set polish whose optimality
is confirmed by an explicit dual certificate.  The module also computes the
certificate quantity ``xi`` that guarantees exact recovery and the constants
of the matching noise-robustness bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve, null_space
from scipy.optimize import isotonic_regression, linprog

from .dst import CrossRelationSystem, Variant
from .errors import (
    Infeasible,
    InvalidParams,
    InvalidScheme,
    MaxIterations,
    RankDeficientSupport,
    SingularInner,
)

DEFAULT_DELTA = 0.02
TOL = 1e-9
MAX_ITER = 200_000
COND_GUARD = 1e12
CONSTRAINTS = ("none", "nonnegative", "nonneg_decreasing")

__all__ = [
    "WeightMatrix",
    "build_weights",
    "SparseProblem",
    "L1Result",
    "solve_l1_equality",
    "solve_l1_ball",
    "constrained_variants",
    "CertificateReport",
    "certificate",
    "RobustnessConstants",
    "robustness_constants",
    "filter_coefficient_map",
    "support_rank",
]


# --------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightMatrix:
    """Positive diagonal weights, one per unknown of the full system."""

    diag: np.ndarray
    scheme: str
    block_sizes: tuple

    def __post_init__(self):
        d = np.array(self.diag, dtype=float)
        if np.any(~(d > 0)):
            raise InvalidParams("weights must be strictly positive")
        d.setflags(write=False)
        object.__setattr__(self, "diag", d)

    def normalized(self):
        return replace(self, diag=self.diag / self.diag.max())

    def drop(self, index):
        return np.delete(self.diag, index)


def build_weights(scheme, block_sizes, normalize=False, values=None) -> WeightMatrix:
    """Weight diagonal for the l1 objective.

    ``identity`` gives all ones.  ``exponential`` gives ``exp(j)`` for the
    0-based position ``j`` inside each block, so every filter block reads
    ``exp(0), exp(1), ...``; with a common block size ``Q`` this is
    ``exp(i mod Q)`` over the global 0-based index ``i``, and the weights left
    after the pinned first entry is dropped read ``exp(1), ..., exp(Q-1),
    exp(0), exp(1), ...``.  ``custom`` takes ``values`` as given.
    """
    sizes = tuple(int(q) for q in block_sizes)
    if not sizes or min(sizes) < 1:
        raise InvalidScheme("block sizes must be >= 1")
    total = sum(sizes)
    if scheme == "identity":
        diag = np.ones(total)
    elif scheme == "exponential":
        diag = np.exp(np.concatenate([np.arange(q) for q in sizes]).astype(float))
    elif scheme == "custom":
        if values is None or len(values) != total:
            raise InvalidScheme(f"custom weights need {total} values")
        diag = np.asarray(values, dtype=float)
    else:
        raise InvalidScheme(f"unknown weight scheme {scheme!r}")
    w = WeightMatrix(diag=diag, scheme=scheme, block_sizes=sizes)
    return w.normalized() if normalize else w


# --------------------------------------------------------------------------
# problem


def filter_coefficient_map(variant, orders):
    """Linear map from a full solution vector to filter coefficients.

    Returns ``(T, groups)``: ``T @ full`` lists coefficients and each entry
    of ``groups`` indexes the rows of one filter, lowest power first.  For the
    multi-process layouts every block is its own filter; for the nested
    layouts only the longest filter is exposed (the others are its prefixes).
    """
    variant = Variant(variant)
    orders = tuple(int(q) for q in orders)
    if variant in (Variant.MULTI_KNOWN, Variant.MULTI_OVERSHOOT):
        total = sum(orders)
        offsets = np.r_[0, np.cumsum(orders)]
        return np.eye(total), [np.arange(offsets[m], offsets[m + 1]) for m in range(len(orders))]
    if variant is Variant.SINGLE_KNOWN:
        return np.eye(orders[-1]), [np.arange(orders[-1])]
    width = max(orders)
    blocks = [np.eye(width)[:, :q] for q in orders]
    return np.hstack(blocks), [np.arange(width)]


@dataclass(frozen=True)
class SparseProblem:
    """``Phi w = -b`` (or within ``epsilon``) with the pinned column split off.

    ``weights`` are the diagonal weights with the pinned entry removed.
    ``truth`` is the true reduced vector (pinned entry scaled to 1) when known;
    ``support_truth`` is its support.
    """

    phi: np.ndarray
    b: np.ndarray
    weights: np.ndarray
    epsilon: float = 0.0
    pin: int = 0
    truth: np.ndarray | None = None
    support_truth: np.ndarray | None = None
    coeff_map: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvalidParams("epsilon must be >= 0")
        if self.phi.shape[1] != self.weights.size:
            raise InvalidParams("one weight per column of phi")

    @classmethod
    def from_system(cls, system, weights, epsilon=0.0, truth=None, pin=0, support_tol=1e-12):
        """Split ``system`` at column ``pin``.

        ``system`` is a :class:`CrossRelationSystem` or a plain matrix;
        ``weights`` a :class:`WeightMatrix` or array over all columns;
        ``truth`` the full true coefficient vector, if known.
        """
        a = np.asarray(getattr(system, "matrix", system), dtype=float)
        diag = weights.diag if isinstance(weights, WeightMatrix) else np.asarray(weights, float)
        if diag.size != a.shape[1]:
            raise InvalidParams(f"{diag.size} weights for {a.shape[1]} columns")
        coeff_map = None
        if isinstance(system, CrossRelationSystem):
            coeff_map = filter_coefficient_map(system.variant, system.orders)
        w_true = support = None
        if truth is not None:
            truth = np.asarray(truth, dtype=float)
            if truth[pin] == 0:
                raise InvalidParams("the pinned true coefficient is zero")
            w_true = np.delete(truth / truth[pin], pin)
            support = np.flatnonzero(np.abs(w_true) > support_tol * np.max(np.abs(w_true)))
        return cls(phi=np.delete(a, pin, axis=1), b=a[:, pin].copy(),
                   weights=np.delete(diag, pin), epsilon=float(epsilon), pin=pin,
                   truth=w_true, support_truth=support, coeff_map=coeff_map)

    @property
    def n_full(self):
        return self.phi.shape[1] + 1

    def full(self, w):
        """Insert the pinned unit entry back into a reduced vector."""
        return np.insert(np.asarray(w, dtype=float), self.pin, 1.0)

    def residual(self, w):
        return float(np.linalg.norm(self.phi @ w + self.b))

    def truth_residual(self):
        """``||Phi w_true + b||``: the radius that keeps the truth feasible."""
        if self.truth is None:
            raise InvalidParams("problem carries no ground truth")
        return self.residual(self.truth)

    def objective(self, w):
        return float(np.sum(self.weights * np.abs(w)))

    def error(self, w):
        """``||w - w_true|| / ||w_true||`` in the pinned coordinates."""
        if self.truth is None:
            raise InvalidParams("problem carries no ground truth")
        return float(np.linalg.norm(w - self.truth) / np.linalg.norm(self.truth))


@dataclass(frozen=True)
class L1Result:
    w: np.ndarray
    full: np.ndarray
    objective: float
    residual: float
    iterations: int
    primal_residual: float
    dual_residual: float
    duality_gap: float
    status: str  # 'optimal' (certificate verified), 'converged', 'max_iterations', 'infeasible'

    @property
    def converged(self):
        return self.status in ("optimal", "converged")


# --------------------------------------------------------------------------
# ADMM engine
#
# minimize sum_j g_j(z_j)  s.t.  z_j = A_j t + c_j, all blocks sharing one
# penalty rho.  Block 0 is always the weighted l1 term; the rest are
# indicator functions of convex sets.


class _Block:
    __slots__ = ("a", "c", "prox")

    def __init__(self, a, c, prox):
        self.a = a
        self.c = c
        self.prox = prox


def _soft(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def _ball_projector(radius):
    def prox(v, rho):
        nv = np.linalg.norm(v)
        return v if nv <= radius else v * (radius / nv)
    return prox


def _nonneg(v, rho):
    return np.maximum(v, 0.0)


def _monotone_projector(groups):
    def prox(v, rho):
        out = v.copy()
        for g in groups:
            out[g] = np.maximum(isotonic_regression(v[g], increasing=False).x, 0.0)
        return out
    return prox


@dataclass
class _AdmmState:
    t: np.ndarray
    z: np.ndarray
    u: np.ndarray
    rho: float
    iterations: int = 0
    r_norm: float = np.inf
    s_norm: float = np.inf
    converged: bool = False


def _admm(blocks, t0, rho, tol, max_iter, polish=None, polish_tol=1e-6, polish_every=200,
          start=0):
    a_all = np.vstack([b.a for b in blocks])
    c_all = np.concatenate([b.c for b in blocks])
    sizes = [b.a.shape[0] for b in blocks]
    cuts = np.cumsum(sizes)[:-1]
    slices = [slice(s, e) for s, e in zip(np.r_[0, cuts], np.r_[cuts, sum(sizes)])]
    gram = cho_factor(a_all.T @ a_all)
    m, dim = a_all.shape

    t = t0
    at = a_all @ t + c_all
    z = np.concatenate([b.prox(at[s], rho) for b, s in zip(blocks, slices)])
    u = np.zeros(m)
    state = _AdmmState(t=t, z=z, u=u, rho=rho, iterations=start)
    tried_polish_at = -1
    for it in range(start, max_iter):
        t = cho_solve(gram, a_all.T @ (z - u - c_all))
        at = a_all @ t + c_all
        v = at + u
        z_new = np.empty_like(z)
        for b, s in zip(blocks, slices):
            z_new[s] = b.prox(v[s], rho)
        u = u + at - z_new
        r_norm = np.linalg.norm(at - z_new)
        s_norm = rho * np.linalg.norm(a_all.T @ (z_new - z))
        z = z_new
        scale_p = max(np.linalg.norm(at - c_all), np.linalg.norm(z), np.linalg.norm(c_all), 1e-300)
        scale_d = max(np.linalg.norm(rho * (a_all.T @ u)), 1e-300)
        eps_pri = np.sqrt(m) * tol * 1e-3 + tol * scale_p
        eps_dual = np.sqrt(dim) * tol * 1e-3 + tol * scale_d
        state.t, state.z, state.u, state.rho = t, z, u, rho
        state.iterations, state.r_norm, state.s_norm = it + 1, r_norm, s_norm
        if r_norm <= eps_pri and s_norm <= eps_dual:
            state.converged = True
            return state, None
        near = r_norm <= polish_tol * scale_p and s_norm <= polish_tol * scale_d
        if polish is not None and it - tried_polish_at >= (25 if near else polish_every):
            tried_polish_at = it
            result = polish(state)
            if result is not None:
                return state, result
        # residual balancing
        if it % 10 == 9:
            if r_norm > 10 * s_norm:
                rho *= 2.0
                u = u / 2.0
            elif s_norm > 10 * r_norm:
                rho /= 2.0
                u = u * 2.0
    return state, None


# --------------------------------------------------------------------------
# affine parametrization of {w : Phi w = -b}


def _affine_set(phi, b, rtol=1e-9, feas_tol=1e-6):
    """Least-squares point and orthonormal null basis, with a feasibility check."""
    norms = np.linalg.norm(phi, axis=0)
    norms[norms == 0] = 1.0
    scaled = phi / norms
    u, s, vt = np.linalg.svd(scaled, full_matrices=True)
    rank = int(np.count_nonzero(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    coef = (u[:, :rank].T @ (-b)) / s[:rank]
    w0 = (vt[:rank].T @ coef) / norms
    null = vt[rank:].T / norms[:, None]
    if null.shape[1]:
        null, _ = np.linalg.qr(null)
    w0 = w0 - null @ (null.T @ w0) if null.shape[1] else w0
    resid = np.linalg.norm(phi @ w0 + b)
    scale = np.linalg.norm(b) + np.linalg.norm(phi, 2) * np.linalg.norm(w0)
    if resid > feas_tol * max(scale, 1e-300):
        raise Infeasible(f"affine constraint inconsistent: residual {resid:.3e} vs scale {scale:.3e}")
    return w0, null


def _independent_rows(mat, order, k):
    chosen = []
    for i in order:
        trial = mat[chosen + [i]]
        if np.linalg.matrix_rank(trial, tol=1e-10 * max(1.0, np.abs(mat).max())) == len(chosen) + 1:
            chosen.append(i)
            if len(chosen) == k:
                break
    return chosen


def _polish_equality(w0, null, weights, t, y_hint):
    """Snap to the vertex suggested by ``t`` and certify it.

    Returns ``(w, gap)`` when a dual vector ``y`` with ``|y| <= 1``,
    ``y = sign(D w)`` off the zero set and ``(D N)^T y = 0`` exists near
    ``y_hint``; otherwise ``None``.
    """
    k = null.shape[1]
    a = weights[:, None] * null
    c = weights * w0
    f = c + a @ t
    order = list(np.argsort(np.abs(f), kind="stable"))
    zero_rows = _independent_rows(a, order, k)
    if len(zero_rows) < k:
        return None
    t_star = np.linalg.solve(a[zero_rows], -c[zero_rows])
    f_star = c + a @ t_star
    w_star = w0 + null @ t_star
    ztol = 1e-10 * max(np.abs(f_star).max(), 1e-300)
    zero = np.abs(f_star) <= ztol
    zero[zero_rows] = True
    f_star[zero] = 0.0
    w_star[zero] = 0.0
    sgn = np.sign(f_star)
    y = sgn.copy()
    az = a[zero]
    rhs = -(a[~zero].T @ sgn[~zero])
    y0 = np.clip(y_hint[zero], -1.0, 1.0)
    corr = np.linalg.lstsq(az.T, rhs - az.T @ y0, rcond=None)[0]
    y[zero] = y0 + corr
    if np.any(np.abs(y[zero]) > 1.0 + 1e-9):
        return None
    if np.linalg.norm(a.T @ y) > 1e-8 * max(1.0, np.linalg.norm(a)):
        return None
    primal = np.sum(np.abs(f_star))
    dual = float(y @ c)
    return w_star, primal - dual


def _polish_ball(phi, b, weights, eps, w, nonneg=False):
    """Solve the KKT system on the support of ``w``; ``(w, gap)`` or ``None``."""
    f = np.abs(weights * w)
    top = f.max()
    if top == 0:
        return None
    for tau in (1e-6, 1e-8, 1e-4, 1e-10):
        support = f > tau * top
        phi_s = phi[:, support]
        if np.linalg.matrix_rank(phi_s) < phi_s.shape[1]:
            continue
        s = np.sign(w[support])
        if nonneg and np.any(s < 0):
            continue
        gram = phi_s.T @ phi_s
        w_ls = -np.linalg.solve(gram, phi_s.T @ b)
        r_ls = phi_s @ w_ls + b
        g = np.linalg.solve(gram, weights[support] * s)
        q = phi_s @ g
        slack = eps ** 2 - r_ls @ r_ls
        if slack <= 0 or not np.any(q):
            continue
        mu = np.linalg.norm(q) / np.sqrt(slack)
        w_s = w_ls - g / mu
        if np.any(np.sign(w_s) != s):
            continue
        out = np.zeros_like(w)
        out[support] = w_s
        lam = -mu * (phi @ out + b)
        ratio = (phi.T @ lam) / weights
        off = ratio[~support]
        bad = off > 1 + 1e-9 if nonneg else np.abs(off) > 1 + 1e-9
        if np.any(bad):
            continue
        lam_feas = lam / max(1.0, np.max(np.abs(ratio)) if not nonneg else 1.0)
        primal = float(np.sum(weights * np.abs(out)))
        dual = float(-lam_feas @ b - eps * np.linalg.norm(lam_feas))
        return out, primal - dual
    return None


def _ball_homotopy(phi, b, weights, eps, nonneg=False, max_steps=None):
    """Follow the weighted lasso path until the residual norm reaches ``eps``.

    With ``v = D w`` and ``X = Phi D^-1`` the path of
    ``min 0.5 ||X v + b||^2 + tau ||v||_1`` is piecewise linear in ``tau`` and
    its residual norm shrinks as ``tau`` decreases, so the breakpoint segment
    containing ``||r|| = eps`` gives the ball-constrained minimizer.  Returns
    ``None`` if the path breaks down numerically.
    """
    x = phi / weights
    y = -b
    p = x.shape[1]
    v = np.zeros(p)
    r = y.copy()
    c = x.T @ r
    active = []
    signs = np.zeros(p)
    max_steps = max_steps or 8 * p + 20
    rtol = 1e-12
    tau = float(np.max(c) if nonneg else np.max(np.abs(c)))
    if tau <= 0:
        return None
    j = int(np.argmax(c) if nonneg else np.argmax(np.abs(c)))
    active.append(j)
    signs[j] = np.sign(c[j])
    for _ in range(max_steps):
        xa = x[:, active]
        gram = xa.T @ xa
        try:
            d_a = np.linalg.solve(gram, signs[active])
        except np.linalg.LinAlgError:
            return None
        u = xa @ d_a
        a = x.T @ u
        # step to the next event, measured as the decrease of tau
        gamma = tau
        event = None
        inactive = np.setdiff1d(np.arange(p), active)
        for k in inactive:
            cands = [(tau - c[k]) / (1.0 - a[k]) if 1.0 - a[k] > rtol else np.inf]
            if not nonneg:
                cands.append((tau + c[k]) / (1.0 + a[k]) if 1.0 + a[k] > rtol else np.inf)
            for g in cands:
                if rtol * tau < g < gamma:
                    gamma, event = g, ("add", k)
        for idx, k in enumerate(active):
            if d_a[idx] != 0:
                g = -v[k] / d_a[idx]
                if rtol * tau < g < gamma:
                    gamma, event = g, ("drop", k)
        # does the residual cross eps inside this segment?
        rr, ru, uu = r @ r, r @ u, u @ u
        disc = ru ** 2 - uu * (rr - eps ** 2)
        if uu > 0 and disc >= 0:
            g_eps = (ru - np.sqrt(disc)) / uu
            if 0 <= g_eps <= gamma:
                v[active] += g_eps * d_a
                return v / weights
        v[active] += gamma * d_a
        r = r - gamma * u
        c = x.T @ r
        tau -= gamma
        if event is None:
            return None  # reached tau = 0 with the residual still above eps
        kind, k = event
        if kind == "add":
            active.append(k)
            signs[k] = np.sign(c[k]) if not nonneg else 1.0
        else:
            active.remove(k)
            v[k] = 0.0
            signs[k] = 0.0
    return None


def _shape_rows(problem, constraint):
    """Write a sign/shape prior as ``G w + g0 >= 0`` on the reduced vector.

    Returns ``(G, g0, n_nonneg)``: the first ``n_nonneg`` rows are plain
    nonnegativity, the rest are differences ``h_j - h_{j+1}`` and the last
    coefficient ``h_{q-1}`` of every filter exposed by the coefficient map.
    """
    if constraint not in CONSTRAINTS:
        raise InvalidParams(f"constraint must be one of {CONSTRAINTS}")
    p = problem.phi.shape[1]
    rows, offs = [np.eye(p)], [np.zeros(p)]
    if constraint == "nonneg_decreasing":
        if problem.coeff_map is None:
            raise InvalidParams("monotone constraint needs a problem built from a system")
        diff = _difference_rows(problem.coeff_map)
        rows.append(np.delete(diff, problem.pin, axis=1))
        offs.append(diff[:, problem.pin])
    return np.vstack(rows), np.concatenate(offs), p


def _difference_rows(coeff_map):
    tmap, groups = coeff_map
    out = []
    for g in groups:
        for j in range(len(g) - 1):
            out.append(tmap[g[j]] - tmap[g[j + 1]])
        out.append(tmap[g[-1]])
    return np.array(out)


def _shape_blocks(problem, constraint, a, c):
    """ADMM blocks enforcing the prior on ``w = a t + c``."""
    blocks = [_Block(a, c, _nonneg)]
    if constraint == "nonneg_decreasing":
        tmap, groups = problem.coeff_map
        t_free = np.delete(tmap, problem.pin, axis=1)
        blocks.append(_Block(t_free @ a, t_free @ c + tmap[:, problem.pin],
                             _monotone_projector(groups)))
    return blocks


def _active_candidates(problem, constraint, z_shape):
    """Guess active prior rows from the projected ADMM copies.

    Projections produce exact zeros and exact ties, so the slack of the
    projected copy vanishes on the active rows.
    """
    p = problem.phi.shape[1]
    slack = [z_shape[:p]]
    if constraint == "nonneg_decreasing":
        slack.append(_h_differences(problem.coeff_map, z_shape[p:]))
    slack = np.concatenate(slack)
    top = max(np.abs(slack).max(), 1e-300)
    seen = []
    for tau in (0.0, 1e-12, 1e-9, 1e-6, 1e-4):
        act = slack <= tau * top
        if not any(np.array_equal(act, s) for s in seen):
            seen.append(act)
    return seen


def _h_differences(coeff_map, h):
    _, groups = coeff_map
    out = []
    for g in groups:
        out.extend(h[g[:-1]] - h[g[1:]])
        out.append(h[g[-1]])
    return np.array(out)


def _face_feasible(G, g0, w, active):
    slack = G @ w + g0
    scale = max(1.0, np.abs(w).max())
    return bool(np.all(slack[~active] >= -1e-9 * scale))


def _polish_face_ball(phi, b, weights, eps, G, g0, active):
    """Minimize ``weights . w`` on the face ``G_A w + g0_A = 0`` inside the ball.

    Returns ``(w, gap)`` when the point is feasible and the multipliers of
    the active rows are nonnegative, otherwise ``None``.
    """
    p = phi.shape[1]
    ga, oa = G[active], g0[active]
    if ga.shape[0]:
        w_a = np.linalg.lstsq(ga, -oa, rcond=None)[0]
        if np.linalg.norm(ga @ w_a + oa) > 1e-9 * max(1.0, np.linalg.norm(oa)):
            return None
        null = null_space(ga)
    else:
        w_a, null = np.zeros(p), np.eye(p)
    if null.shape[1] == 0:
        return None
    pm = phi @ null
    bb = phi @ w_a + b
    if np.linalg.matrix_rank(pm) < pm.shape[1]:
        return None
    c = null.T @ weights
    gram = pm.T @ pm
    v_ls = -np.linalg.solve(gram, pm.T @ bb)
    r_ls = pm @ v_ls + bb
    slack = eps ** 2 - r_ls @ r_ls
    g = np.linalg.solve(gram, c)
    q = pm @ g
    if slack <= 0 or not np.any(q):
        return None
    mu = np.linalg.norm(q) / np.sqrt(slack)
    w = w_a + null @ (v_ls - g / mu)
    if not _face_feasible(G, g0, w, active):
        return None
    lam = mu * (phi @ w + b)
    target = weights + phi.T @ lam
    if ga.shape[0]:
        nu = np.linalg.lstsq(ga.T, target, rcond=None)[0]
        stat = np.linalg.norm(ga.T @ nu - target)
    else:
        nu, stat = np.zeros(0), np.linalg.norm(target)
    if stat > 1e-7 * max(1.0, np.linalg.norm(weights)) or np.any(nu < -1e-9 * max(1.0, np.abs(nu).max(initial=0))):
        return None
    w = np.maximum(w, 0.0)
    primal = float(weights @ w)
    dual = float(-np.maximum(nu, 0) @ oa + lam @ b - eps * np.linalg.norm(lam))
    return w, primal - dual


def _polish_face_equality(w0, null, weights, G, g0, active):
    """Same as :func:`_polish_face_ball` on the affine set ``w0 + N t``."""
    ga, oa = G[active], g0[active]
    k = null.shape[1]
    if ga.shape[0] == 0:
        return None
    m = ga @ null
    t = np.linalg.lstsq(m, -(ga @ w0 + oa), rcond=None)[0]
    if np.linalg.norm(m @ t + ga @ w0 + oa) > 1e-9 * max(1.0, np.abs(w0).max()):
        return None
    if np.linalg.matrix_rank(m) < k:
        return None
    w = w0 + null @ t
    if not _face_feasible(G, g0, w, active):
        return None
    nu = np.linalg.lstsq(m.T, null.T @ weights, rcond=None)[0]
    if np.linalg.norm(m.T @ nu - null.T @ weights) > 1e-7 * max(1.0, np.linalg.norm(weights)):
        return None
    if np.any(nu < -1e-9 * max(1.0, np.abs(nu).max())):
        return None
    w = np.maximum(w, 0.0)
    primal = float(weights @ w)
    dual = float(-nu @ oa - (ga.T @ nu - weights) @ w0)
    return w, primal - dual


def _newton_barrier(objective, G, g0, quad, x0, gap_tol=1e-10, max_newton=500, stop=None):
    """Minimize ``tau f(x) - sum log(G x + g0) - log(1 - ||P x + q||^2)`` for growing ``tau``.

    ``objective(x)`` returns ``(value, grad, hess)`` of the convex objective;
    ``quad`` is ``(P, q)`` or ``None``.  ``x0`` must be strictly feasible.
    Returns ``(x, gap_bound, ok)``; ``gap_bound = m / tau`` bounds the
    suboptimality on the central path.  ``stop(x)`` ends the run early.
    """
    m = G.shape[0] + (quad is not None)

    def barrier(x):
        s = G @ x + g0
        if np.any(s <= 0):
            return np.inf, None, None
        val = -np.sum(np.log(s))
        grad = -G.T @ (1.0 / s)
        hess = (G.T * (1.0 / s ** 2)) @ G
        if quad is not None:
            P, q = quad
            r = P @ x + q
            beta = 1.0 - r @ r
            if beta <= 0:
                return np.inf, None, None
            gq = 2 * (P.T @ r) / beta
            val -= np.log(beta)
            grad = grad + gq
            hess = hess + 2 * (P.T @ P) / beta + np.outer(gq, gq)
        return val, grad, hess

    x = x0.copy()
    if not np.isfinite(barrier(x)[0]):
        return x, np.inf, False
    tau = 1.0
    newton = 0
    while newton < max_newton:
        for _ in range(80):
            f, gf, hf = objective(x)
            bv, bg, bh = barrier(x)
            grad = tau * gf + bg
            hess = tau * hf + bh
            d = 1.0 / np.sqrt(np.maximum(np.diag(hess), 1e-300))
            try:
                step = -d * np.linalg.solve(hess * np.outer(d, d), d * grad)
            except np.linalg.LinAlgError:
                step = -d * np.linalg.lstsq(hess * np.outer(d, d), d * grad, rcond=None)[0]
            dec = -grad @ step
            newton += 1
            if dec / 2 <= 1e-13 or not np.isfinite(dec):
                break
            phi0, t = tau * f + bv, 1.0
            while t > 1e-16:
                xn = x + t * step
                bn = barrier(xn)[0]
                if np.isfinite(bn) and tau * objective(xn)[0] + bn <= phi0 - 0.25 * t * dec:
                    break
                t *= 0.5
            if t <= 1e-16:
                break
            x = xn
            if stop is not None and stop(x):
                return x, m / tau, True
        if m / tau <= gap_tol * max(1.0, abs(objective(x)[0])):
            return x, m / tau, True
        tau *= 10.0
    return x, m / tau, False


def _polyhedron_interior(G, g0):
    """A point with ``G x + g0 > 0`` (Chebyshev-style LP), or ``None``."""
    n = G.shape[1]
    res = linprog(np.r_[np.zeros(n), -1.0], A_ub=np.hstack([-G, np.ones((G.shape[0], 1))]),
                  b_ub=g0, bounds=[(None, None)] * n + [(None, 1.0)], method="highs")
    if res.status != 0 or res.x[-1] <= 0:
        return None
    return res.x[:n]


def _barrier_ball(phi, b, weights, eps, G, g0):
    """Shape-constrained ball problem by the barrier method.

    A feasibility phase drives ``||Phi w + b||`` below ``eps`` from an
    interior point of the prior's polyhedron; the main phase then minimizes
    the (linear) weighted l1 objective.  Returns ``(w, gap)`` or ``None``.
    """
    P, q = phi / eps, b / eps
    x = _polyhedron_interior(G, g0)
    if x is None:
        return None

    def resid(z):
        r = P @ z + q
        return r @ r, 2 * (P.T @ r), 2 * (P.T @ P)

    if resid(x)[0] >= 1.0:
        x, _, done = _newton_barrier(resid, G, g0, None, x, gap_tol=1e-9,
                                     stop=lambda z: resid(z)[0] < 1.0 - 1e-9)
        if resid(x)[0] >= 1.0:
            return ("infeasible", np.maximum(x, 0.0), np.inf) if done else None
    zero = np.zeros((x.size, x.size))
    linear = lambda z: (weights @ z, weights, zero)  # noqa: E731
    w, gap, ok = _newton_barrier(linear, G, g0, (P, q), x)
    if not ok:
        return None
    return "optimal", np.maximum(w, 0.0), gap


def _prior_compatible(w0, null, G, g0):
    """Whether some ``w0 + N t`` satisfies ``G w + g0 >= 0`` (LP feasibility)."""
    k = null.shape[1]
    slack = G @ w0 + g0
    tol = 1e-9 * max(1.0, np.abs(w0).max())
    if k == 0:
        return bool(np.all(slack >= -tol))
    res = linprog(np.zeros(k), A_ub=-G @ null, b_ub=slack + tol,
                  bounds=[(None, None)] * k, method="highs")
    return res.status == 0


def _best_fit_under_prior(phi, b, G, g0):
    """``argmin ||Phi w + b||`` over the prior's polyhedron (barrier method)."""
    x = _polyhedron_interior(G, g0)
    if x is None:
        return np.zeros(phi.shape[1])
    scale = max(np.linalg.norm(b), 1e-300)

    def resid(z):
        r = (phi @ z + b) / scale
        return r @ r, 2 * (phi.T @ r) / scale, 2 * (phi.T @ phi) / scale ** 2

    x, _, _ = _newton_barrier(resid, G, g0, None, x, gap_tol=1e-9)
    return np.maximum(x, 0.0)


def _finish(problem, w, state, status, gap):
    return L1Result(w=w, full=problem.full(w), objective=problem.objective(w),
                    residual=problem.residual(w),
                    iterations=state.iterations if state else 0,
                    primal_residual=state.r_norm if state else 0.0,
                    dual_residual=state.s_norm if state else 0.0,
                    duality_gap=float(gap), status=status)


def _stopped(problem, state, w, gap, max_iter, strict):
    status = "converged" if state.converged else "max_iterations"
    if status == "max_iterations" and strict:
        raise MaxIterations(f"no convergence in {max_iter} iterations "
                            f"(primal {state.r_norm:.2e}, dual {state.s_norm:.2e})")
    return _finish(problem, w, state, status, gap)


def solve_l1_equality(problem: SparseProblem, constraint="none", tol=TOL, max_iter=MAX_ITER,
                      strict=True, null_rtol=1e-9) -> L1Result:
    """Minimize the weighted l1 norm over ``{w : Phi w = -b}``.

    The affine set is parametrized as ``w0 + N t`` (``N`` an orthonormal
    basis of the numerical null space of ``Phi``) and ADMM runs in ``t``.
    The iterate is periodically polished to the exact vertex it points at
    and accepted once a dual certificate verifies optimality, giving status
    ``'optimal'``.  ``constraint`` adds a sign/shape prior (see
    :func:`constrained_variants`).

    Raises
    ------
    Infeasible
        ``Phi w = -b`` has no solution within tolerance.
    MaxIterations
        The iteration cap was hit and ``strict`` is set.
    """
    phi, b, weights = problem.phi, problem.b, problem.weights
    w0, null = _affine_set(phi, b, rtol=null_rtol)
    k = null.shape[1]
    shaped = constraint != "none"
    if shaped:
        G, g0, _ = _shape_rows(problem, constraint)
    if shaped and not _prior_compatible(w0, null, G, g0):
        if strict:
            raise Infeasible("no solution of Phi w = -b satisfies the prior")
        return _finish(problem, _best_fit_under_prior(phi, b, G, g0), None, "infeasible", np.inf)
    if k == 0:
        return _finish(problem, w0, None, "optimal", 0.0)

    p = weights.size
    blocks = [_Block(weights[:, None] * null, weights * w0, lambda v, rho: _soft(v, 1.0 / rho))]
    if shaped:
        blocks += _shape_blocks(problem, constraint, null, w0)
    rho = 1.0 / max(np.abs(blocks[0].c).max(), 1e-12) if np.any(blocks[0].c) else 1.0

    def polish(state):
        if not shaped:
            return _polish_equality(w0, null, weights, state.t, state.rho * state.u[:p])
        for active in _active_candidates(problem, constraint, state.z[p:]):
            out = _polish_face_equality(w0, null, weights, G, g0, active)
            if out is not None:
                return out
        return None

    state, polished = _admm(blocks, np.zeros(k), rho, tol, max_iter, polish=polish)
    if polished is None:
        polished = polish(state)
    if polished is not None:
        return _finish(problem, polished[0], state, "optimal", polished[1])
    w = w0 + null @ state.t
    return _stopped(problem, state, w, _equality_gap(problem, w0, null, state, w), max_iter, strict)


def _equality_gap(problem, w0, null, state, w):
    weights = problem.weights
    a = weights[:, None] * null
    y = np.clip(state.rho * state.u[: weights.size], -1.0, 1.0)
    # project onto {A^T y = 0} then re-clip; report the gap of that point
    y = y - a @ np.linalg.lstsq(a, y, rcond=None)[0]
    y = np.clip(y, -1.0, 1.0)
    return float(np.sum(np.abs(weights * w)) - y @ (weights * w0))


def solve_l1_ball(problem: SparseProblem, epsilon=None, constraint="none", tol=TOL,
                  max_iter=MAX_ITER, strict=True) -> L1Result:
    """Minimize the weighted l1 norm over ``{w : ||Phi w + b||_2 <= eps}``.

    Without a shape prior the support is found by following the weighted
    lasso path to the point where the residual equals ``eps``; the KKT
    system on that support is then solved exactly and accepted with a dual
    certificate.  Otherwise (or if the path breaks down) ADMM splits ``w``
    into a weighted-l1 copy and a data copy ``Phi w`` projected onto the ball
    of radius ``eps`` around ``-b``, with the data block normalized by
    ``||Phi||_2``, and polishes on the face its projections point at.

    Raises
    ------
    Infeasible
        ``eps`` is below the smallest achievable residual (with ``strict``
        unset the least-squares point comes back with status ``'infeasible'``).
    """
    eps = problem.epsilon if epsilon is None else float(epsilon)
    if not eps > 0:
        raise InvalidParams("the ball-constrained problem needs eps > 0")
    phi, b, weights = problem.phi, problem.b, problem.weights
    rows, p = phi.shape
    shaped = constraint != "none"
    if shaped:
        G, g0, _ = _shape_rows(problem, constraint)
    if np.linalg.norm(b) <= eps:
        w = np.zeros(p)
        if not shaped or _face_feasible(G, g0, w, np.zeros(G.shape[0], bool)):
            return _finish(problem, w, None, "optimal", 0.0)
    if not shaped:
        w_ls = -np.linalg.lstsq(phi, b, rcond=None)[0]
        if np.linalg.norm(phi @ w_ls + b) > eps * (1 + 1e-9):
            if strict:
                raise Infeasible("eps is below the least-squares residual")
            return _finish(problem, w_ls, None, "infeasible", np.inf)
    if constraint in ("none", "nonnegative"):
        nonneg = constraint == "nonnegative"
        guess = _ball_homotopy(phi, b, weights, eps, nonneg=nonneg)
        if guess is not None:
            polished = _polish_ball(phi, b, weights, eps, guess, nonneg=nonneg)
            if polished is not None:
                return _finish(problem, polished[0], None, "optimal", polished[1])

    # ADMM runs on v = E w with E the column norms of Phi
    col = np.linalg.norm(phi, axis=0)
    col[col == 0] = 1.0
    phi_v = phi / col
    scale = np.linalg.norm(phi_v, 2)
    blocks = [
        _Block(np.diag(weights / col), np.zeros(p), lambda v, rho: _soft(v, 1.0 / rho)),
        _Block(phi_v / scale, b / scale, _ball_projector(eps / scale)),
    ]
    if shaped:
        blocks += _shape_blocks(problem, constraint, np.diag(1.0 / col), np.zeros(p))

    def polish(state):
        if not shaped:
            return _polish_ball(phi, b, weights, eps, state.z[:p] / weights)
        for active in _active_candidates(problem, constraint, state.z[p + rows:]):
            out = _polish_face_ball(phi, b, weights, eps, G, g0, active)
            if out is not None:
                return out
        return None

    if shaped:
        out = _barrier_ball(phi, b, weights, eps, G, g0)
        if out is not None:
            status, w, gap = out
            if status == "infeasible" and strict:
                raise Infeasible("no point of the prior lies within eps of the data")
            return _finish(problem, w, None, status, gap)

    # warm start from the least-squares point
    t0 = -np.linalg.lstsq(phi_v, b, rcond=None)[0]
    rho = 1.0 / max(np.abs(weights * t0 / col).max(), 1e-12)
    state, polished = _admm(blocks, t0, rho, tol, max_iter, polish=polish)
    if polished is None:
        polished = polish(state)
    if polished is not None:
        return _finish(problem, polished[0], state, "optimal", polished[1])
    w = state.t / col
    lam = state.rho * state.u[p:p + rows] / scale
    ratio = np.abs(phi.T @ lam) / weights
    lam = lam / max(1.0, ratio.max())
    dual = max(float(sg * lam @ b - eps * np.linalg.norm(lam)) for sg in (1.0, -1.0))
    return _stopped(problem, state, w, problem.objective(w) - dual, max_iter, strict)


def constrained_variants(problem: SparseProblem, constraint="none", **kwargs) -> L1Result:
    """l1 recovery with an optional sign/shape prior on the coefficients.

    ``nonnegative`` keeps every coefficient >= 0; ``nonneg_decreasing`` also
    makes each filter's coefficients non-increasing in the power.  Uses the
    ball form when ``problem.epsilon > 0`` and never raises on
    non-convergence: an incompatible prior returns the best fit under the
    prior with status ``'infeasible'``.
    """
    kwargs.setdefault("strict", False)
    if problem.epsilon > 0:
        return solve_l1_ball(problem, constraint=constraint, **kwargs)
    return solve_l1_equality(problem, constraint=constraint, **kwargs)


# --------------------------------------------------------------------------
# certificates


def support_rank(phi_support, rtol=None):
    if phi_support.shape[1] == 0:
        return 0
    norms = np.linalg.norm(phi_support, axis=0)
    norms[norms == 0] = 1.0
    s = np.linalg.svd(phi_support / norms, compute_uv=False)
    if rtol is None:
        rtol = max(phi_support.shape) * np.finfo(float).eps
    return int(np.count_nonzero(s > rtol * s[0])) if s.size and s[0] > 0 else 0


@dataclass(frozen=True)
class CertificateReport:
    xi: float
    delta: float
    rank_ok: bool

    @property
    def guaranteed(self):
        return bool(self.rank_ok and self.xi < 1.0)


def certificate(problem: SparseProblem, delta=DEFAULT_DELTA) -> CertificateReport:
    """Exact-recovery certificate for the true support.

    ``xi`` is the infinity norm (max absolute row sum) of the off-support rows
    of ``G^{-1}`` restricted to on-support columns, with
    ``G = delta^-2 D^-1 Phi^T Phi D^-1 + E_off E_off^T``.  Recovery is
    guaranteed when ``Phi`` restricted to the support has full column rank
    and ``xi < 1``.
    """
    if problem.support_truth is None:
        raise InvalidParams("certificate needs the true support")
    if not delta > 0:
        raise InvalidParams("delta must be > 0")
    phi = problem.phi
    p = phi.shape[1]
    on = np.asarray(problem.support_truth, dtype=int)
    off = np.setdiff1d(np.arange(p), on)
    rank_ok = support_rank(phi[:, on]) == on.size
    inv_w = 1.0 / problem.weights
    scaled = phi * inv_w
    gram = delta ** -2 * (scaled.T @ scaled)
    gram[off, off] += 1.0
    d = np.sqrt(np.diag(gram))
    if np.any(d == 0):
        raise SingularInner("inner matrix has a zero diagonal entry")
    if np.linalg.cond(gram / np.outer(d, d)) > COND_GUARD:
        raise SingularInner("inner matrix is numerically singular (support rank condition fails)")
    if off.size == 0:
        return CertificateReport(xi=0.0, delta=float(delta), rank_ok=bool(rank_ok))
    rhs = np.zeros((p, on.size))
    rhs[on, np.arange(on.size)] = 1.0
    x = np.linalg.solve(gram, rhs)
    xi = float(np.max(np.sum(np.abs(x[off]), axis=1)))
    return CertificateReport(xi=xi, delta=float(delta), rank_ok=bool(rank_ok))


@dataclass(frozen=True)
class RobustnessConstants:
    c1: float
    c2: float
    c3: float
    c: float
    xi: float

    def bound(self, epsilon):
        """Upper bound on ``||D (w_hat - w_true)||_1`` with normalized weights."""
        return self.c * epsilon


def robustness_constants(problem: SparseProblem, delta=DEFAULT_DELTA, xi=None) -> RobustnessConstants:
    """Constants of the noise-robustness bound ``||D(w_hat - w)||_1 <= C eps``.

    Weights are normalized to a maximum of 1 before use.  The certificate
    value ``xi`` stands in the denominator of ``C2``; ``C3`` uses
    ``||D Phi^+||_2^2`` times the number of unknowns in the full system.
    """
    if problem.support_truth is None:
        raise InvalidParams("robustness constants need the true support")
    weights = problem.weights / problem.weights.max()
    phi = problem.phi
    on = np.asarray(problem.support_truth, dtype=int)
    s_on = np.linalg.svd(phi[:, on], compute_uv=False)
    if s_on.size == 0 or s_on[-1] <= s_on[0] * max(phi.shape) * np.finfo(float).eps:
        raise RankDeficientSupport("Phi restricted to the support is rank deficient")
    if xi is None:
        xi = certificate(replace(problem, weights=weights), delta).xi
    c1 = np.sqrt(on.size) / s_on[-1]
    ratio = weights.max() / weights.min()
    c2 = (1.0 + ratio * c1 * np.linalg.norm(phi, 2)) / (1.0 - xi) if xi < 1 else np.inf
    c3 = np.linalg.norm(weights[:, None] * np.linalg.pinv(phi), 2) ** 2 * problem.n_full
    c = 2 * c1 + 2 * c2 * np.sqrt(c3)
    return RobustnessConstants(c1=float(c1), c2=float(c2), c3=float(c3), c=float(c), xi=float(xi))
