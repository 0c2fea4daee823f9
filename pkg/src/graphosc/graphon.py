"""Graphons, graphs, cut norms and cut distances.

Conventions
-----------
* Matrix cut norms are normalised by ``1/n^2`` so that the cut norm of an
  ``n x n`` matrix equals the cut norm of its step-function embedding.
* Step graphons use right-open cells ``[(i-1)/n, i/n)``; ``x = 1`` belongs to
  the last cell.
* Every exact value is re-evaluated on its witness with :func:`math.fsum`,
  so two exact algorithms that find the same optimum agree bit-for-bit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, ContractError, DomainError, FormatError, SizeCapError

EXACT_CUT_CAP = 16
EXACT_PERMUTATION_CAP = 10
MAX_REFINEMENT_BLOCKS = 120

__all__ = [
    "Graph",
    "Graphon",
    "SignPair",
    "CutDistance",
    "step_graphon",
    "sample_w_random_graph",
    "cut_norm_exact",
    "cut_norm_heuristic",
    "inf_to_one_norm",
    "cut_distance_step",
    "delta_expectation",
    "read_graph",
    "write_edge_list",
]


# ---------------------------------------------------------------------------
# Graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Graph:
    """Symmetric adjacency matrix with zero diagonal and entries in [0, 1].

    ``labels`` holds the uniform labels U_i of a W-random sample and
    ``weights`` the vertex weights g_i of a rank-1 graph, when known.
    """

    adj: np.ndarray
    labels: Optional[np.ndarray] = field(default=None, compare=False)
    weights: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        adj = np.array(self.adj, dtype=float)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] < 1:
            raise DomainError(f"adjacency must be a nonempty square matrix, got {adj.shape}")
        if not np.array_equal(adj, adj.T):
            raise DomainError("adjacency matrix must be symmetric")
        if np.any(np.diag(adj) != 0):
            raise DomainError("adjacency matrix must have zero diagonal")
        if np.any(adj < 0) or np.any(adj > 1):
            raise DomainError("adjacency entries must lie in [0, 1]")
        adj.setflags(write=False)
        object.__setattr__(self, "adj", adj)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.adj == 0) | (self.adj == 1)))

    def permuted(self, perm) -> "Graph":
        perm = np.asarray(perm)
        return Graph(
            self.adj[np.ix_(perm, perm)],
            labels=None if self.labels is None else self.labels[perm],
            weights=None if self.weights is None else self.weights[perm],
        )

    def __eq__(self, other):
        return isinstance(other, Graph) and np.array_equal(self.adj, other.adj)

    __hash__ = None


# ---------------------------------------------------------------------------
# Graphons
# ---------------------------------------------------------------------------

_GAUSS_POINTS = 16


def _gauss_cells(m: int, q: int = _GAUSS_POINTS):
    """Gauss-Legendre nodes/weights on each of ``m`` uniform cells of [0, 1].

    Returns arrays of shape ``(m, q)``; weights in each row sum to 1.
    """
    x, w = np.polynomial.legendre.leggauss(q)
    lo = np.arange(m)[:, None] / m
    nodes = lo + (x[None, :] + 1.0) / (2.0 * m)
    return nodes, np.broadcast_to(w / 2.0, (m, q))


def _overlap(m: int, b: int) -> np.ndarray:
    """``R[a, i] = m * |cell_a  n  block_i|`` for m cells and b blocks (rows sum to 1)."""
    lo = np.maximum(np.arange(m)[:, None] / m, np.arange(b)[None, :] / b)
    hi = np.minimum((np.arange(m)[:, None] + 1) / m, (np.arange(b)[None, :] + 1) / b)
    return m * np.clip(hi - lo, 0.0, None)


class Graphon:
    """Symmetric kernel ``W: [0,1]^2 -> [0,1]``.

    Build one with :meth:`constant`, :meth:`step`, :meth:`rank1` or
    :meth:`custom`; evaluate with ``w(x, y)`` (numpy broadcasting).
    """

    def __init__(self, kind: str, *, p=None, blocks=None, quantile=None, func=None,
                 description=None):
        self.kind = kind
        self.p = p
        self.blocks = blocks
        self.quantile = quantile
        self.func = func
        self.description = description

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, p: float) -> "Graphon":
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"constant graphon value must lie in [0, 1], got {p}")
        return cls("constant", p=p, description={"kind": "constant", "p": p})

    @classmethod
    def step(cls, blocks) -> "Graphon":
        b = np.array(blocks, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1] or b.shape[0] < 1:
            raise DomainError("step graphon needs a nonempty square block matrix")
        if not np.array_equal(b, b.T):
            raise DomainError("step graphon block matrix must be symmetric")
        if np.any(b < 0) or np.any(b > 1):
            raise DomainError("step graphon values must lie in [0, 1]")
        b.setflags(write=False)
        return cls("step", blocks=b, description={"kind": "step", "blocks": b.tolist()})

    @classmethod
    def rank1(cls, quantile: Callable, description=None) -> "Graphon":
        """``W(x, y) = Q(x) Q(y)`` where ``Q`` is the quantile of the vertex weight."""
        probe = np.asarray(quantile(np.linspace(0.0, 1.0, 9)), dtype=float)
        if np.any(probe < 0) or np.any(probe > 1) or np.any(np.diff(probe) < -1e-12):
            raise DomainError("rank-1 quantile must be nondecreasing with values in [0, 1]")
        return cls("rank1", quantile=quantile, description=description)

    @classmethod
    def rank1_beta(cls, alpha: float, beta: float) -> "Graphon":
        from scipy.special import betaincinv

        if alpha <= 0 or beta <= 0:
            raise DomainError("Beta parameters must be positive")
        a, b = float(alpha), float(beta)
        return cls.rank1(
            lambda x: betaincinv(a, b, np.asarray(x, dtype=float)),
            description={"kind": "rank1-beta", "alpha": a, "beta": b},
        )

    @classmethod
    def rank1_beta_moments(cls, mean: float, variance: float) -> "Graphon":
        """Beta-quantile rank-1 graphon with given weight mean and variance.

        Zero variance gives the degenerate weight ``g = mean`` (a constant
        graphon ``mean**2`` in rank-1 form).
        """
        mean, variance = float(mean), float(variance)
        if not 0.0 < mean < 1.0:
            raise DomainError("weight mean must lie in (0, 1)")
        if variance == 0.0:
            return cls.rank1(
                lambda x: np.full(np.shape(x), mean),
                description={"kind": "rank1-beta", "mean": mean, "variance": 0.0},
            )
        if not 0.0 < variance < mean * (1.0 - mean):
            raise DomainError("Beta variance must lie in (0, mean(1-mean))")
        c = mean * (1.0 - mean) / variance - 1.0
        g = cls.rank1_beta(mean * c, (1.0 - mean) * c)
        g.description = {"kind": "rank1-beta", "mean": mean, "variance": variance}
        return g

    @classmethod
    def custom(cls, func: Callable, description=None) -> "Graphon":
        grid = np.linspace(0.0, 1.0, 7)
        vals = np.asarray(func(grid[:, None], grid[None, :]), dtype=float)
        if not np.allclose(vals, vals.T, rtol=0, atol=1e-12):
            raise DomainError("custom graphon must be symmetric")
        if np.any(vals < 0) or np.any(vals > 1):
            raise DomainError("custom graphon values must lie in [0, 1]")
        return cls("custom", func=func, description=description)

    @classmethod
    def from_config(cls, spec: dict) -> "Graphon":
        """Parse ``{kind: constant|step|rank1-beta|custom-grid, ...}``."""
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ConfigError(f"graphon spec must be a mapping with 'kind', got {spec!r}")
        kind = spec["kind"]
        try:
            if kind == "constant":
                return cls.constant(spec["p"])
            if kind in ("step", "custom-grid"):
                key = "blocks" if kind == "step" else "grid"
                return cls.step(spec[key])
            if kind == "rank1-beta":
                if "alpha" in spec:
                    return cls.rank1_beta(spec["alpha"], spec["beta"])
                return cls.rank1_beta_moments(spec["mean"], spec["variance"])
        except KeyError as exc:
            raise ConfigError(f"graphon spec of kind {kind!r} is missing {exc}") from None
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        raise ConfigError(f"unknown graphon kind {kind!r}")

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "constant":
            return np.full(np.broadcast(x, y).shape, self.p)
        if self.kind == "step":
            n = self.blocks.shape[0]
            i = np.minimum((x * n).astype(int), n - 1)
            j = np.minimum((y * n).astype(int), n - 1)
            return self.blocks[i, j]
        if self.kind == "rank1":
            return np.asarray(self.quantile(x), dtype=float) * np.asarray(
                self.quantile(y), dtype=float)
        return np.asarray(self.func(x, y), dtype=float)

    eval = __call__

    @property
    def n_blocks(self) -> Optional[int]:
        if self.kind == "step":
            return self.blocks.shape[0]
        if self.kind == "constant":
            return 1
        return None

    def step_blocks(self) -> np.ndarray:
        """Block matrix of a step or constant graphon."""
        if self.kind == "constant":
            return np.array([[self.p]])
        if self.kind == "step":
            return self.blocks
        raise ContractError(f"{self.kind} graphon has no block representation")

    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "step":
            return bool(np.all(self.blocks == self.blocks.flat[0]))
        return False

    def cell_average(self, m: int) -> np.ndarray:
        """``m x m`` matrix of averages of W over products of uniform cells.

        Exact for constant and step graphons, Gauss-Legendre otherwise.
        """
        if self.kind == "constant":
            return np.full((m, m), self.p)
        if self.kind == "step":
            r = _overlap(m, self.blocks.shape[0])
            out = r @ self.blocks @ r.T
            return 0.5 * (out + out.T)
        nodes, w = _gauss_cells(m)
        if self.kind == "rank1":
            qbar = np.sum(w * np.asarray(self.quantile(nodes), dtype=float), axis=1)
            return np.outer(qbar, qbar)
        x = nodes.reshape(m, 1, -1, 1)
        y = nodes.reshape(1, m, 1, -1)
        vals = np.asarray(self.func(x, y), dtype=float)
        out = np.einsum("p,q,abpq->ab", w[0], w[0], vals)
        return 0.5 * (out + out.T)

    def row_cell_average(self, x, m: int) -> np.ndarray:
        """``out[i, b]`` = average over cell ``b`` of ``W(x_i, y) dy``."""
        x = np.asarray(x, dtype=float).ravel()
        if self.kind == "constant":
            return np.full((x.size, m), self.p)
        if self.kind == "step":
            n = self.blocks.shape[0]
            i = np.minimum((x * n).astype(int), n - 1)
            return self.blocks[i] @ _overlap(m, n).T
        nodes, w = _gauss_cells(m)
        if self.kind == "rank1":
            qbar = np.sum(w * np.asarray(self.quantile(nodes), dtype=float), axis=1)
            return np.asarray(self.quantile(x), dtype=float)[:, None] * qbar[None, :]
        vals = np.asarray(self.func(x[:, None, None], nodes[None, :, :]), dtype=float)
        return np.sum(vals * w[None, :, :], axis=2)

    def discretize(self, m: int) -> "Graphon":
        """Step graphon of cell averages on ``m`` uniform cells."""
        return Graphon.step(self.cell_average(m))

    def permuted(self, perm) -> "Graphon":
        b = self.step_blocks()
        perm = np.asarray(perm)
        return Graphon.step(b[np.ix_(perm, perm)])

    def to_config(self) -> dict:
        if self.description is None:
            raise ConfigError(f"{self.kind} graphon has no serializable description")
        return dict(self.description)

    def __repr__(self):
        return f"Graphon({self.description or self.kind!r})"


def step_graphon(g: Graph) -> Graphon:
    """Embed a graph as the step graphon of its adjacency matrix."""
    return Graphon.step(g.adj)


def sample_w_random_graph(w: Graphon, n: int, seed=None, weighted: bool = False):
    """Sample a W-random graph on ``n`` vertices.

    Labels ``U_i`` are IID uniform.  In binary mode edge ``ij`` (i < j) is
    present independently with probability ``W(U_i, U_j)``; in weighted
    mode the adjacency entry is ``W(U_i, U_j)`` itself.

    Returns
    -------
    (Graph, labels)
    """
    if n < 1:
        raise DomainError("W-random graph needs n >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.random(n)
    iu, ju = np.triu_indices(n, k=1)
    probs = np.asarray(w(labels[iu], labels[ju]), dtype=float)
    if weighted:
        vals = probs
    else:
        vals = (rng.random(iu.size) < probs).astype(float)
    adj = np.zeros((n, n))
    adj[iu, ju] = vals
    adj[ju, iu] = vals
    return Graph(adj, labels=labels), labels


# ---------------------------------------------------------------------------
# Cut norms
# ---------------------------------------------------------------------------


def _subset_matrix(n: int) -> np.ndarray:
    """All ``2^n`` subsets of ``range(n)`` as 0/1 rows."""
    codes = np.arange(2 ** n, dtype=np.int64)[:, None]
    return ((codes >> np.arange(n)) & 1).astype(float)


def _block_sum(a: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> float:
    return math.fsum(a[np.ix_(rows, cols)].ravel().tolist())


def _as_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DomainError(f"expected a nonempty square matrix, got shape {a.shape}")
    return a


def _cut_norm_exact_witness(a: np.ndarray):
    n = a.shape[0]
    x = _subset_matrix(n)
    colsums = x @ a
    pos = np.sum(np.maximum(colsums, 0.0), axis=1)
    neg = np.sum(np.maximum(-colsums, 0.0), axis=1)
    best = int(np.argmax(np.maximum(pos, neg)))
    rows = np.flatnonzero(x[best])
    c = colsums[best]
    cols = np.flatnonzero(c > 0) if pos[best] >= neg[best] else np.flatnonzero(c < 0)
    value = abs(_block_sum(a, rows, cols)) / n ** 2
    return value, rows, cols


def cut_norm_exact(a, cap: int = EXACT_CUT_CAP) -> float:
    """Exact cut norm ``max_{S,T} |sum_{S x T} a_ij| / n^2``.

    Enumerates the ``2^n`` row sets; for each, the best column set keeps
    the columns whose restricted sum has the favourable sign.
    """
    a = _as_square(a)
    if a.shape[0] > cap:
        raise SizeCapError(
            f"exact cut norm is capped at n={cap} (got n={a.shape[0]}); "
            "use cut_norm_heuristic or inf_to_one_norm")
    return _cut_norm_exact_witness(a)[0]


@dataclass(frozen=True)
class SignPair:
    s: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        for v in (self.s, self.t):
            if not np.all(np.abs(v) == 1):
                raise DomainError("sign vectors must have entries in {-1, +1}")

    def evaluate(self, a) -> float:
        """``sum_ij a_ij s_i t_j / n^2`` computed with exact rounding."""
        a = _as_square(a)
        return math.fsum((a * np.outer(self.s, self.t)).ravel().tolist()) / a.shape[0] ** 2


def _sign(v):
    return np.where(v >= 0, 1.0, -1.0)


def inf_to_one_norm(a, restarts: int = 50, seed=None, method: str = "auto",
                    cap: int = EXACT_CUT_CAP):
    """Normalised infinity-to-one norm ``max_{s,t} sum a_ij s_i t_j / n^2``.

    ``method="exact"`` enumerates all sign vectors ``t``; ``"heuristic"``
    runs alternating sign maximisation from ``restarts`` random starts; the
    default ``"auto"`` is exact up to ``cap``.  The heuristic result is a
    certified lower bound: ``witness.evaluate(a)`` reproduces it.

    Returns
    -------
    (value, SignPair)
    """
    a = _as_square(a)
    n = a.shape[0]
    if method == "auto":
        method = "exact" if n <= cap else "heuristic"
    if method == "exact":
        if n > cap:
            raise SizeCapError(f"exact infinity-to-one norm is capped at n={cap} (got n={n})")
        # t and -t give the same value, so fix t_0 = +1.
        t_all = np.ones((n, 2 ** (n - 1)))
        if n > 1:
            t_all[1:] = 1.0 - 2.0 * _subset_matrix(n - 1).T
        scores = np.sum(np.abs(a @ t_all), axis=0)
        t = t_all[:, int(np.argmax(scores))]
        s = _sign(a @ t)
    elif method == "heuristic":
        if restarts < 1:
            raise DomainError("need at least one restart")
        rng = np.random.default_rng(seed)
        t_mat = _sign(rng.random((n, restarts)) - 0.5)
        prev = None
        for _ in range(100):
            s_mat = _sign(a @ t_mat)
            t_mat = _sign(a.T @ s_mat)
            vals = np.sum(s_mat * (a @ t_mat), axis=0)
            if prev is not None and np.all(vals <= prev):
                break
            prev = vals
        # t_mat is the best response to s_mat, so vals is attained.
        best = int(np.argmax(vals))
        s, t = s_mat[:, best], t_mat[:, best]
    else:
        raise DomainError(f"unknown method {method!r}")
    witness = SignPair(s.copy(), t.copy())
    return witness.evaluate(a), witness


def cut_norm_heuristic(a, restarts: int = 50, seed=None):
    """Certified lower bound on the cut norm for matrices too large to enumerate.

    Seeds 0/1 alternating maximisation with the sign classes of the
    infinity-to-one witnesses and with random row sets.

    Returns
    -------
    (value, rows, cols)
    """
    a = _as_square(a)
    n = a.shape[0]
    rng = np.random.default_rng(seed)
    _, w = inf_to_one_norm(a, restarts=restarts, seed=rng, method="heuristic")
    starts = [w.s > 0, w.s < 0] + [rng.random(n) < 0.5 for _ in range(restarts)]
    x0 = np.array(starts, dtype=float).T
    best = (-1.0, None, None)
    for sign in (1.0, -1.0):
        x = x0.copy()
        for _ in range(200):
            y = ((sign * (x.T @ a)) > 0).astype(float).T
            x_new = ((sign * (a @ y)) > 0).astype(float)
            if np.array_equal(x_new, x):
                break
            x = x_new
        y = ((sign * (x.T @ a)) > 0).astype(float).T
        vals = sign * np.sum(x * (a @ y), axis=0)
        k = int(np.argmax(vals))
        if vals[k] > best[0]:
            best = (vals[k], np.flatnonzero(x[:, k]), np.flatnonzero(y[:, k]))
    _, rows, cols = best
    return abs(_block_sum(a, rows, cols)) / n ** 2, rows, cols


# ---------------------------------------------------------------------------
# Cut distance between step graphons
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CutDistance:
    """Achieved minimum of the cut norm of ``u - v^sigma`` over block relabelings.

    ``slack`` is the additive gap ``17 / sqrt(log N)`` allowed between the
    labelled-graph distance and the graphon cut distance on ``N`` blocks
    (``inf`` when ``N = 1``).
    """

    value: float
    blocks: int
    slack: float
    mode: str
    permutation: tuple
    resampled: bool

    def __float__(self):
        return self.value


def _blocks_of(x) -> np.ndarray:
    if isinstance(x, Graphon):
        return np.asarray(x.step_blocks(), dtype=float)
    if isinstance(x, Graph):
        return x.adj
    return _as_square(x)


def _common_refinement(u: np.ndarray, v: np.ndarray, max_blocks: int):
    n, m = u.shape[0], v.shape[0]
    big = math.lcm(n, m)
    if big <= max_blocks:
        return np.kron(u, np.ones((big // n, big // n))), np.kron(
            v, np.ones((big // m, big // m))), False
    return (Graphon.step(u).cell_average(max_blocks),
            Graphon.step(v).cell_average(max_blocks), True)


def _batched_cut_norms(diffs: np.ndarray, subsets: np.ndarray) -> np.ndarray:
    colsums = np.einsum("sn,pnm->psm", subsets, diffs)
    pos = np.sum(np.maximum(colsums, 0.0), axis=2)
    neg = np.sum(np.maximum(-colsums, 0.0), axis=2)
    return np.max(np.maximum(pos, neg), axis=1)


def cut_distance_step(u, v, mode: str = "exact", seed=None, restarts: int = 20,
                      cap: int = EXACT_CUT_CAP,
                      max_blocks: int = MAX_REFINEMENT_BLOCKS) -> CutDistance:
    """Cut distance between two step graphons over relabelings of a common refinement.

    Both arguments may be step/constant :class:`Graphon`, :class:`Graph`
    or square matrices.  They are refined to ``N = lcm(n, m)`` blocks (or
    resampled onto ``max_blocks`` cells when ``N`` is larger), and the cut
    norm of ``u - v^sigma`` is minimised over permutations ``sigma`` of the
    ``N`` blocks: exhaustively in ``"exact"`` mode (``N <= 10``), by
    pairwise-swap hill climbing with restarts in ``"local_search"`` mode.
    """
    if mode not in ("exact", "local_search"):
        raise DomainError(f"unknown cut distance mode {mode!r}")
    u0, v0 = _blocks_of(u), _blocks_of(v)
    constant_side = bool(np.all(u0 == u0.flat[0]) or np.all(v0 == v0.flat[0]))
    ub, vb, resampled = _common_refinement(u0, v0, max_blocks)
    big = ub.shape[0]
    slack = math.inf if big == 1 else 17.0 / math.sqrt(math.log(big))

    def finish(value, perm, used_mode):
        return CutDistance(float(value), big, slack, used_mode,
                           tuple(int(i) for i in perm), resampled)


    def objective(perm, obj_seed=0):
        diff = ub - vb[np.ix_(perm, perm)]
        if big <= cap:
            return cut_norm_exact(diff, cap=cap)
        return cut_norm_heuristic(diff, seed=obj_seed)[0]

    identity = np.arange(big)
    if constant_side:
        # A constant side makes the cut norm invariant under relabeling.
        if mode == "exact" and big > EXACT_PERMUTATION_CAP:
            raise SizeCapError(f"exact cut distance is capped at N={EXACT_PERMUTATION_CAP}")
        return finish(objective(identity), identity, mode)

    if mode == "exact":
        if big > EXACT_PERMUTATION_CAP:
            raise SizeCapError(
                f"exact cut distance is capped at N={EXACT_PERMUTATION_CAP} blocks "
                f"(got N={big}); use mode='local_search'")
        subsets = _subset_matrix(big)
        perms = itertools.permutations(range(big))
        chunk = max(1, 2_000_000 // (subsets.shape[0] * big))
        best_val, best_perm = math.inf, identity
        while True:
            batch = np.array(list(itertools.islice(perms, chunk)), dtype=int)
            if batch.size == 0:
                break
            diffs = ub[None] - vb[batch[:, :, None], batch[:, None, :]]
            vals = _batched_cut_norms(diffs, subsets)
            k = int(np.argmin(vals))
            if vals[k] < best_val:
                best_val, best_perm = vals[k], batch[k]
        return finish(objective(best_perm), best_perm, mode)

    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(big) for j in range(i + 1, big)]
    best_val, best_perm = math.inf, identity
    for r in range(max(1, restarts)):
        perm = identity.copy() if r == 0 else rng.permutation(big)
        current = objective(perm)
        # Stop once a full pass over all swaps gives no improvement.
        improved = True
        while improved and pairs:
            improved = False
            for idx in rng.permutation(len(pairs)):
                i, j = pairs[idx]
                perm[[i, j]] = perm[[j, i]]
                val = objective(perm)
                if val < current:
                    current, improved = val, True
                else:
                    perm[[i, j]] = perm[[j, i]]
        if current < best_val:
            best_val, best_perm = current, perm.copy()
    return finish(best_val, best_perm, mode)


def delta_expectation(samples):
    """Mean and standard error of replica cut distances.

    The standard error is ``nan`` for a single sample.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("need at least one sample")
    mean = float(np.mean(x))
    if x.size == 1:
        return mean, math.nan
    return mean, float(np.std(x, ddof=1) / math.sqrt(x.size))


# ---------------------------------------------------------------------------
# Graph files
# ---------------------------------------------------------------------------


def write_edge_list(g: Graph, path) -> None:
    """Write ``n=<count>`` then one ``i j [weight]`` line per edge (0-indexed, i < j)."""
    iu, ju = np.nonzero(np.triu(g.adj, k=1))
    binary = g.is_binary
    lines = [f"n={g.n}"]
    for i, j in zip(iu.tolist(), ju.tolist()):
        if binary:
            lines.append(f"{i} {j}")
        else:
            lines.append(f"{i} {j} {float(g.adj[i, j])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph(path) -> Graph:
    """Read an edge list (``n=<count>`` header) or a dense CSV adjacency matrix."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read graph file: {exc}", path=path) from None
    lines = [(k + 1, ln.strip()) for k, ln in enumerate(text.splitlines())]
    lines = [(k, ln) for k, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise FormatError("empty graph file", path=path)
    first_no, first = lines[0]
    if first.startswith("n="):
        try:
            n = int(first[2:])
        except ValueError:
            raise FormatError(f"bad header {first!r}", path=path, line=first_no) from None
        if n < 1:
            raise FormatError("vertex count must be positive", path=path, line=first_no)
        adj = np.zeros((n, n))
        for no, ln in lines[1:]:
            parts = ln.split()
            if len(parts) not in (2, 3):
                raise FormatError(f"expected 'i j [weight]', got {ln!r}", path=path, line=no)
            try:
                i, j = int(parts[0]), int(parts[1])
                wgt = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise FormatError(f"unparseable edge {ln!r}", path=path, line=no) from None
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise FormatError(f"invalid vertex pair ({i}, {j})", path=path, line=no)
            if not 0.0 <= wgt <= 1.0:
                raise FormatError(f"weight {wgt} outside [0, 1]", path=path, line=no)
            adj[i, j] = adj[j, i] = wgt
        return Graph(adj)
    rows = []
    for no, ln in lines:
        try:
            rows.append([float(v) for v in ln.split(",")])
        except ValueError:
            raise FormatError(f"unparseable CSV row {ln!r}", path=path, line=no) from None
        if len(rows[-1]) != len(rows[0]):
            raise FormatError("ragged CSV row", path=path, line=no)
    try:
        return Graph(np.array(rows))
    except DomainError as exc:
        raise FormatError(str(exc), path=path) from None
