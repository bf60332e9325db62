"""Graph shift operators, random graph models and spectral machinery.

Everything downstream works in the eigenbasis of a real symmetric shift
operator ``S = V diag(lam) V^T``; this module owns that decomposition, the
spectral support sets of an input signal and the Vandermonde matrices that
turn filter coefficients into frequency responses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.linalg import block_diag
from scipy.sparse.csgraph import connected_components

from .errors import ConnectivityTimeout, EigFailure, InvalidParams, NonSymmetric

MAX_RESAMPLES = 1000

__all__ = [
    "Gso",
    "SpectralBasis",
    "SpectralSupport",
    "eigendecompose",
    "generate_graph",
    "spectral_support",
    "vandermonde",
    "block_diag_vandermonde",
    "read_edge_list",
    "write_edge_list",
    "karate_club",
    "is_connected",
]


def _is_symmetric(a):
    return bool(np.all(np.abs(a - a.T) <= 1e-12 * np.maximum(1.0, np.abs(a))))


@dataclass(frozen=True)
class Gso:
    """Dense real graph shift operator.

    ``symmetric`` is computed from the matrix when not given.
    """

    matrix: np.ndarray
    symmetric: bool | None = None

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidParams(f"shift operator must be square, got shape {a.shape}")
        if a.shape[0] < 2:
            raise InvalidParams("shift operator needs at least 2 nodes")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        sym = _is_symmetric(a)
        if self.symmetric is None:
            object.__setattr__(self, "symmetric", sym)
        elif self.symmetric and not sym:
            raise NonSymmetric("matrix flagged symmetric but S != S^T")

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def n_edges(self):
        """Number of undirected edges (nonzero off-diagonal pairs)."""
        off = self.matrix - np.diag(np.diag(self.matrix))
        return int(np.count_nonzero(np.triu(off, 1)))


@dataclass(frozen=True)
class SpectralBasis:
    """Eigendecomposition ``S = V diag(eigenvalues) U`` with ``U = V^{-1}``."""

    eigenvalues: np.ndarray
    v: np.ndarray
    u: np.ndarray
    n_distinct: int
    tol_lambda: float

    @property
    def n(self):
        return self.eigenvalues.shape[0]

    def gft(self, x):
        """Graph Fourier transform ``U x`` (works column-wise on 2-D input)."""
        return self.u @ x

    def igft(self, x_hat):
        return self.v @ x_hat

    def clusters(self):
        """Label each eigenvalue with the index of its coincidence cluster."""
        return _cluster_labels(self.eigenvalues, self.tol_lambda)


@dataclass(frozen=True)
class SpectralSupport:
    """Index sets of input frequencies usable for identification.

    ``omega1`` keeps one index per distinct eigenvalue carrying input energy;
    ``omega2`` further drops zero eigenvalues.  Indices are 0-based.
    """

    omega1: np.ndarray
    omega2: np.ndarray
    tol_x: float
    tol_lambda: float
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def z1(self):
        """Eigenvalues indexed by ``omega1``."""
        return self.eigenvalues[self.omega1]

    @property
    def z2(self):
        return self.eigenvalues[self.omega2]


def _cluster_labels(eigenvalues, tol):
    order = np.argsort(eigenvalues, kind="stable")
    labels = np.empty(len(eigenvalues), dtype=int)
    current = 0
    prev = None
    for idx in order:
        lam = eigenvalues[idx]
        if prev is not None and lam - prev > tol:
            current += 1
        labels[idx] = current
        prev = lam
    return labels


def default_tol_lambda(eigenvalues):
    return 1e-9 * max(1.0, float(np.max(np.abs(eigenvalues))))


def eigendecompose(gso: Gso, tol_lambda: float | None = None) -> SpectralBasis:
    """Eigendecomposition of a symmetric shift operator.

    Eigenvalues come back in ascending order with orthonormal eigenvectors,
    so the inverse transform is simply ``V^T``.
    """
    if not gso.symmetric:
        raise NonSymmetric("only symmetric shift operators are supported")
    try:
        lam, v = np.linalg.eigh(gso.matrix)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigFailure(str(exc)) from exc
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(v))):
        raise EigFailure("non-finite eigendecomposition")
    if tol_lambda is None:
        tol_lambda = default_tol_lambda(lam)
    n_distinct = int(_cluster_labels(lam, tol_lambda).max()) + 1
    u = np.ascontiguousarray(v.T)
    return SpectralBasis(eigenvalues=lam, v=v, u=u, n_distinct=n_distinct,
                         tol_lambda=float(tol_lambda))


def spectral_support(x_hat, basis: SpectralBasis, tol_x=None, tol_lambda=None) -> SpectralSupport:
    """Compute the spectral support sets of a frequency-domain input.

    Parameters
    ----------
    x_hat : array_like
        Frequency representation ``U x`` of the input, length ``n``.
    basis : SpectralBasis
    tol_x : float, optional
        Magnitudes at or below this count as zero.  Defaults to
        ``1e-9 * max|x_hat|``.
    tol_lambda : float, optional
        Eigenvalues closer than this are the same graph frequency.  Defaults
        to the tolerance stored on ``basis``.
    """
    x_hat = np.asarray(x_hat)
    if x_hat.shape != (basis.n,):
        raise InvalidParams(f"x_hat must have length {basis.n}, got shape {x_hat.shape}")
    if tol_x is None:
        tol_x = 1e-9 * float(np.max(np.abs(x_hat))) if x_hat.size else 0.0
    if tol_lambda is None:
        tol_lambda = basis.tol_lambda
    lam = basis.eigenvalues
    labels = _cluster_labels(lam, tol_lambda)
    seen = set()
    omega1 = []
    for i in range(basis.n):
        if abs(x_hat[i]) > tol_x and labels[i] not in seen:
            seen.add(labels[i])
            omega1.append(i)
    omega1 = np.array(omega1, dtype=int)
    omega2 = np.array([i for i in omega1 if abs(lam[i]) > tol_lambda], dtype=int)
    return SpectralSupport(omega1=omega1, omega2=omega2, tol_x=float(tol_x),
                           tol_lambda=float(tol_lambda), eigenvalues=lam)


def vandermonde(lam, order: int) -> np.ndarray:
    """``len(lam) x order`` matrix with entries ``lam_i ** j``, ``j = 0..order-1``."""
    if order < 1:
        raise InvalidParams("order must be >= 1")
    return np.vander(np.asarray(lam), order, increasing=True)


def block_diag_vandermonde(lam, orders) -> np.ndarray:
    """Block-diagonal stack of ``vandermonde(lam, L)`` for each ``L`` in ``orders``."""
    if any(int(q) < 1 for q in orders):
        raise InvalidParams("all orders must be >= 1")
    return block_diag(*[vandermonde(lam, int(q)) for q in orders])


# --------------------------------------------------------------------------
# random graph models


def is_connected(adj) -> bool:
    n_comp, _ = connected_components(np.asarray(adj) != 0, directed=False)
    return n_comp == 1


def _check_prob(name, p):
    if not (0.0 <= p <= 1.0):
        raise InvalidParams(f"{name} must lie in [0, 1], got {p}")


def _er(n, p, rng):
    upper = np.triu(rng.random((n, n)) < p, 1)
    return (upper | upper.T).astype(float)


def _weighted_er(n, p, w_lo, w_hi, rng):
    upper = np.triu(rng.random((n, n)) < p, 1)
    weights = np.triu(rng.uniform(w_lo, w_hi, size=(n, n)), 1) * upper
    return weights + weights.T


def _watts_strogatz(n, mean_degree, rewire_p, rng):
    half = mean_degree // 2
    adj = np.zeros((n, n), dtype=bool)
    for j in range(1, half + 1):
        idx = np.arange(n)
        adj[idx, (idx + j) % n] = True
        adj[(idx + j) % n, idx] = True
    # rewire each lattice edge (u, u+j) with probability rewire_p
    for j in range(1, half + 1):
        for u in range(n):
            v = (u + j) % n
            if rng.random() >= rewire_p:
                continue
            if not adj[u, v]:
                continue
            candidates = np.flatnonzero(~adj[u])
            candidates = candidates[candidates != u]
            if candidates.size == 0:
                continue
            w = candidates[rng.integers(candidates.size)]
            adj[u, v] = adj[v, u] = False
            adj[u, w] = adj[w, u] = True
    return adj.astype(float)


def _sbm(n, blocks, p_within, p_across, rng):
    if isinstance(blocks, int):
        sizes = [n // blocks] * blocks
        for i in range(n - sum(sizes)):
            sizes[i] += 1
    else:
        sizes = list(blocks)
    if sum(sizes) != n:
        raise InvalidParams("block sizes must sum to n")
    labels = np.repeat(np.arange(len(sizes)), sizes)
    probs = np.where(labels[:, None] == labels[None, :], p_within, p_across)
    upper = np.triu(rng.random((n, n)) < probs, 1)
    return (upper | upper.T).astype(float)


_MODELS = {
    "er": ("n", "p"),
    "weighted_er": ("n", "p", "w_lo", "w_hi"),
    "watts_strogatz": ("n", "mean_degree", "rewire_p"),
    "sbm": ("n", "blocks", "p_within", "p_across"),
    "karate": (),
}


def generate_graph(model: str, rng=None, max_resamples=MAX_RESAMPLES, **params) -> Gso:
    """Draw a connected undirected graph and return its adjacency matrix.

    Parameters
    ----------
    model : {'er', 'weighted_er', 'watts_strogatz', 'sbm', 'karate'}
    rng : int, numpy.random.Generator or None
    max_resamples : int
        Disconnected samples are redrawn up to this many times.
    **params
        ``er``: n, p.  ``weighted_er``: n, p, w_lo, w_hi.
        ``watts_strogatz``: n, mean_degree (even), rewire_p.
        ``sbm``: n, blocks (count or list of sizes), p_within, p_across.
    """
    if model not in _MODELS:
        raise InvalidParams(f"unknown graph model {model!r}")
    missing = [k for k in _MODELS[model] if k not in params]
    extra = [k for k in params if k not in _MODELS[model]]
    if missing or extra:
        raise InvalidParams(f"{model}: missing {missing}, unexpected {extra}")
    if model == "karate":
        return karate_club()
    rng = np.random.default_rng(rng)
    n = int(params["n"])
    if n < 2:
        raise InvalidParams("n must be >= 2")

    if model == "er":
        _check_prob("p", params["p"])
        draw = lambda: _er(n, params["p"], rng)  # noqa: E731
    elif model == "weighted_er":
        _check_prob("p", params["p"])
        lo, hi = float(params["w_lo"]), float(params["w_hi"])
        if not 0 < lo <= hi:
            raise InvalidParams("need 0 < w_lo <= w_hi")
        draw = lambda: _weighted_er(n, params["p"], lo, hi, rng)  # noqa: E731
    elif model == "watts_strogatz":
        k = int(params["mean_degree"])
        _check_prob("rewire_p", params["rewire_p"])
        if k < 2 or k % 2 or k >= n:
            raise InvalidParams("mean_degree must be even with 2 <= k < n")
        draw = lambda: _watts_strogatz(n, k, params["rewire_p"], rng)  # noqa: E731
    else:
        _check_prob("p_within", params["p_within"])
        _check_prob("p_across", params["p_across"])
        draw = lambda: _sbm(n, params["blocks"], params["p_within"], params["p_across"], rng)  # noqa: E731

    for _ in range(max_resamples):
        adj = draw()
        if is_connected(adj):
            return Gso(adj, symmetric=True)
    raise ConnectivityTimeout(f"no connected {model} sample after {max_resamples} draws")


# --------------------------------------------------------------------------
# edge-list I/O


def read_edge_list(path) -> Gso:
    """Read ``n <count>`` header followed by ``i j [w]`` lines (0-based ids)."""
    n = None
    adj = None
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if n is None:
                if parts[0] != "n" or len(parts) != 2:
                    raise InvalidParams(f"{path}: expected header 'n <count>'")
                n = int(parts[1])
                adj = np.zeros((n, n))
                continue
            if len(parts) not in (2, 3):
                raise InvalidParams(f"{path}: bad edge line {line!r}")
            i, j = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
            adj[i, j] = adj[j, i] = w
    if n is None:
        raise InvalidParams(f"{path}: empty edge list")
    return Gso(adj)


def write_edge_list(gso: Gso, path, weighted=None):
    a = gso.matrix
    if weighted is None:
        weighted = not np.all(np.isin(a, (0.0, 1.0)))
    iu, ju = np.nonzero(np.triu(a))
    with open(path, "w") as fh:
        fh.write(f"n {gso.n}\n")
        for i, j in zip(iu, ju):
            if weighted:
                fh.write(f"{i} {j} {float(a[i, j])!r}\n")
            else:
                fh.write(f"{i} {j}\n")


def karate_club() -> Gso:
    """Zachary's karate club (34 nodes, 78 edges), bundled as an edge list."""
    ref = resources.files("gfid") / "data" / "karate.edges"
    with resources.as_file(ref) as p:
        return read_edge_list(Path(p))
