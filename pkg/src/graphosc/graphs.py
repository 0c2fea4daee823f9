"""Random graph generators: complete, Erdos-Renyi, rank-1 and preferential attachment."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError
from .graphon import Graph, Graphon, read_graph

__all__ = ["GraphSpec", "generate", "degree_stats", "preferential_attachment"]

KINDS = ("complete", "erdos_renyi", "rank1", "preferential_attachment", "from_file")


@dataclass(frozen=True)
class GraphSpec:
    """What to generate.

    ``quantile`` is the rank-1 weight quantile, given as a rank-1
    :class:`Graphon`.  With ``deterministic_weights`` the weights are
    ``Q(i/n)`` instead of ``Q(U_i)``; with ``weighted`` the adjacency is
    ``g_i g_j`` instead of a Bernoulli draw.
    """

    kind: str
    n: int = 1
    seed: Optional[int] = None
    p: float = 0.5
    quantile: Optional[Graphon] = None
    path: Optional[str] = None
    deterministic_weights: bool = False
    weighted: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown graph kind {self.kind!r}; expected one of {KINDS}")
        if self.kind != "from_file" and self.n < 1:
            raise DomainError("graph needs n >= 1")
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"edge probability must lie in [0, 1], got {self.p}")
        if self.kind == "rank1" and (self.quantile is None or self.quantile.kind != "rank1"):
            raise DomainError("rank1 graphs need a rank-1 graphon as quantile")
        if self.kind == "from_file" and not self.path:
            raise DomainError("from_file graphs need a path")

    @classmethod
    def from_config(cls, spec: dict, seed=None) -> "GraphSpec":
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ConfigError(f"graph spec must be a mapping with 'kind', got {spec!r}")
        quantile = None
        if spec["kind"] == "rank1":
            if "quantile" not in spec:
                raise ConfigError("rank1 graph spec needs a 'quantile' graphon spec")
            quantile = Graphon.from_config(spec["quantile"])
        try:
            return cls(
                kind=spec["kind"],
                n=int(spec.get("n", 1)),
                seed=spec.get("seed", seed),
                p=float(spec.get("p", 0.5)),
                quantile=quantile,
                path=spec.get("path"),
                deterministic_weights=bool(spec.get("deterministic_weights", False)),
                weighted=bool(spec.get("weighted", False)),
            )
        except DomainError as exc:
            raise ConfigError(str(exc)) from None


def _symmetric_from_upper(n: int, vals: np.ndarray) -> np.ndarray:
    iu, ju = np.triu_indices(n, k=1)
    adj = np.zeros((n, n))
    adj[iu, ju] = vals
    adj[ju, iu] = vals
    return adj


def preferential_attachment(n: int, rng: np.random.Generator) -> np.ndarray:
    """Grow a preferential attachment graph from a single node.

    Node ``k`` (with ``k`` nodes already present) links to each earlier
    node ``i`` independently with probability ``(deg(i) + 1) / (k + 1)``.
    The first ``k`` rows of the result are the graph after ``k`` steps.
    """
    adj = np.zeros((n, n))
    deg = np.zeros(n)
    for k in range(1, n):
        links = rng.random(k) < (deg[:k] + 1.0) / (k + 1.0)
        adj[k, :k] = links
        adj[:k, k] = links
        deg[:k] += links
        deg[k] = links.sum()
    return adj


def generate(spec: GraphSpec) -> Graph:
    """Draw a graph of the requested law; same seed gives the same graph."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    if spec.kind == "complete":
        return Graph(np.ones((n, n)) - np.eye(n))
    if spec.kind == "erdos_renyi":
        draws = rng.random(n * (n - 1) // 2)
        return Graph(_symmetric_from_upper(n, (draws < spec.p).astype(float)))
    if spec.kind == "rank1":
        if spec.deterministic_weights:
            labels = np.arange(1, n + 1) / n
        else:
            labels = rng.random(n)
        g = np.asarray(spec.quantile.quantile(labels), dtype=float)
        iu, ju = np.triu_indices(n, k=1)
        probs = g[iu] * g[ju]
        vals = probs if spec.weighted else (rng.random(iu.size) < probs).astype(float)
        return Graph(_symmetric_from_upper(n, vals), labels=labels, weights=g)
    if spec.kind == "preferential_attachment":
        return Graph(preferential_attachment(n, rng))
    return read_graph(spec.path)


def degree_stats(g: Graph):
    """Edge density ``2|E| / (n(n-1))`` (0 when n <= 1) and the degree sequence."""
    deg = g.adj.sum(axis=1)
    if g.is_binary:
        deg = deg.astype(int)
    n = g.n
    if n <= 1:
        return 0.0, deg
    return float(g.adj.sum() / (n * (n - 1))), deg
