"""Euler-Maruyama simulation of oscillators interacting along a graph.

Three systems share one integrator:

* the particle system ``d th_i = F(th_i) dt + (1/n) sum_j xi_ij Gamma(th_i, th_j) dt + dB_i``;
* the annealed system, where ``xi_ij`` is replaced by a constant ``p``
  for every ``j`` (including ``j = i``);
* coupled copies of the non-linear process, driven by a solved density
  field through ``int W(U_i, y) int Gamma(th_i, .) d mu^y dy``.

Brownian increments have variance ``dt`` (generator ``1/2 d^2/d theta^2``).
All drifts are evaluated on the pre-step state before any particle moves.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import ConfigError, ContractError, DomainError, FormatError, NumericalError
from .graphon import Graph, Graphon
from .graphs import GraphSpec, generate
from .model import CouplingSpec, InitialLaw, re_triple
from .torus_metrics import TWO_PI, EmpiricalMeasure, coupled_sup_distance_arrays

__all__ = [
    "CouplingSpec",
    "InitialLaw",
    "SimConfig",
    "TrajectoryEnsemble",
    "interaction_term",
    "simulate_particle_system",
    "simulate_annealed",
    "simulate_coupled_copies",
    "empirical_measure",
    "lln_estimator",
    "write_ensemble",
    "read_ensemble",
    "write_ensemble_csv",
]

_METHODS = ("auto", "direct", "moments", "fast")
_FAST_MIN_N = 32


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce one simulation.

    ``initial_angles`` and ``increments`` override the seeded draws; they
    are how shared-noise couplings are built (see :meth:`sharing_noise`).
    ``zero_noise`` forces all Brownian increments to zero.
    """

    n: int
    T: float = 1.0
    dt: float = 1e-2
    seed: Optional[int] = None
    initial_law: InitialLaw = field(default_factory=InitialLaw)
    coupling: CouplingSpec = field(default_factory=CouplingSpec)
    graph: Union[Graph, GraphSpec, None] = None
    zero_noise: bool = False
    interaction: str = "auto"
    initial_angles: Optional[np.ndarray] = None
    increments: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("need at least one particle")
        if not self.dt > 0:
            raise ConfigError(f"time step must be positive, got {self.dt}")
        if self.T < 0:
            raise ConfigError(f"horizon must be nonnegative, got {self.T}")
        ratio = self.T / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError(f"T/dt must be an integer (T={self.T}, dt={self.dt})")
        if self.interaction not in _METHODS:
            raise ConfigError(f"interaction method must be one of {_METHODS}")
        if self.graph is not None and self.graph.n != self.n:
            raise ConfigError(f"graph has {self.graph.n} vertices but n={self.n}")
        if self.initial_angles is not None and np.shape(self.initial_angles) != (self.n,):
            raise ConfigError("initial_angles must have shape (n,)")
        if self.increments is not None and np.shape(self.increments) != (self.n, self.steps):
            raise ConfigError("increments must have shape (n, steps)")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def time_grid(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def _streams(self):
        init_ss, noise_ss, graph_ss = np.random.SeedSequence(self.seed).spawn(3)
        return init_ss, noise_ss, graph_ss

    def resolve_graph(self) -> Graph:
        if self.graph is None:
            raise ConfigError("this simulation needs a graph")
        if isinstance(self.graph, GraphSpec):
            spec = self.graph
            if spec.seed is None:
                spec = replace(spec, seed=self._streams()[2])
            return generate(spec)
        return self.graph

    def draw_initial_angles(self) -> np.ndarray:
        if self.initial_angles is not None:
            return np.array(self.initial_angles, dtype=float)
        return self.initial_law.sample(self.n, np.random.default_rng(self._streams()[0]))

    def draw_increments(self) -> np.ndarray:
        if self.zero_noise:
            return np.zeros((self.n, self.steps))
        if self.increments is not None:
            return np.array(self.increments, dtype=float)
        rng = np.random.default_rng(self._streams()[1])
        return math.sqrt(self.dt) * rng.standard_normal((self.n, self.steps))

    def sharing_noise(self, ens: "TrajectoryEnsemble") -> "SimConfig":
        """Copy of this config driven by the initial data and noise of ``ens``."""
        if ens.n != self.n or ens.steps != self.steps or ens.dt != self.dt:
            raise ContractError("ensemble grid does not match this config")
        return replace(self, initial_angles=ens.initial_angles,
                       increments=ens.brownian_increments, zero_noise=False)


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Wrapped paths ``angles[i, s]`` on ``time_grid`` plus the randomness behind them."""

    time_grid: np.ndarray
    angles: np.ndarray
    brownian_increments: np.ndarray
    initial_angles: np.ndarray
    labels: Optional[np.ndarray] = None
    dt: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        for name in ("time_grid", "angles", "brownian_increments", "initial_angles", "labels"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        if self.angles.shape != (self.initial_angles.size, self.time_grid.size):
            raise ContractError("angles must have shape (n, steps + 1)")
        if not np.array_equal(self.angles[:, 0], self.initial_angles):
            raise ContractError("first column of angles must equal the initial angles")

    @property
    def n(self) -> int:
        return self.angles.shape[0]

    @property
    def steps(self) -> int:
        return self.angles.shape[1] - 1

    def permuted(self, perm) -> "TrajectoryEnsemble":
        perm = np.asarray(perm)
        return replace(
            self,
            angles=self.angles[perm],
            brownian_increments=self.brownian_increments[perm],
            initial_angles=self.initial_angles[perm],
            labels=None if self.labels is None else self.labels[perm],
        )


# ---------------------------------------------------------------------------
# Interaction kernels
# ---------------------------------------------------------------------------


def _phases(theta: np.ndarray, modes) -> dict:
    """``e^{i l theta}`` for each mode; negative modes are exact conjugates."""
    out = {}
    for l in modes:
        if abs(l) not in out:
            out[abs(l)] = np.exp(1j * abs(l) * theta)
        out[l] = out[abs(l)] if l >= 0 else np.conj(out[abs(l)])
    return out


def _combine(theta: np.ndarray, coupling: CouplingSpec, moments: dict) -> np.ndarray:
    """``Re sum_kl G_kl e^{i k theta_i} m_l[i]`` for per-particle (or scalar) moments."""
    ks = {k for k, _ in coupling.interaction_coeffs}
    ph = _phases(theta, ks)
    out = np.zeros_like(theta)
    for (k, l), c in coupling.interaction_coeffs.items():
        out = out + re_triple(c, ph[k], np.asarray(moments[l]) + 0j)
    return out


def interaction_term(theta, coupling: CouplingSpec, adj=None, method: str = "auto",
                     weight: Optional[float] = None) -> np.ndarray:
    """``sum_j xi_ij Gamma(theta_i, theta_j)`` (no ``1/n`` factor).

    ``adj`` is the adjacency matrix; ``weight=p`` instead means
    ``xi_ij = p`` for all ``i, j`` including the diagonal.

    Methods
    -------
    ``direct``
        Builds the full ``n x n`` matrix of ``Gamma`` values and sums each
        row in sorted order, so the result is bit-exactly equivariant under
        relabeling of the particles.
    ``moments``
        Uses ``Gamma(th, ps) = sum G_kl e^{ik th} e^{il ps}`` and the weighted
        moments ``m_l[i] = sum_j xi_ij e^{i l theta_j}`` (one matrix product).
    ``fast``
        Particle-independent moments; valid for complete graphs and for
        constant weights.
    ``auto``
        ``fast`` for constant weights and for complete graphs with at least
        32 vertices, else ``moments``.  (The complete-graph fast path forms
        ``total - self`` which is not exact; tiny systems avoid it.)
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    if not coupling.interaction_coeffs:
        return np.zeros(n)
    complete = False
    if weight is None:
        adj = np.asarray(adj, dtype=float)
        complete = bool(np.all(adj + np.eye(n) == 1.0))
    if method == "auto":
        fast_ok = weight is not None or (complete and n >= _FAST_MIN_N)
        method = "fast" if fast_ok else "moments"
    if method == "direct":
        a = np.full((n, n), weight) if weight is not None else adj
        terms = a * coupling.interaction(theta[:, None], theta[None, :])
        return np.sort(terms, axis=1).sum(axis=1)
    modes = coupling.interaction_modes
    ph = _phases(theta, modes)
    if method == "fast":
        if weight is None and not complete:
            raise ContractError("fast interaction path needs a complete graph or a constant weight")
        totals = {l: ph[l].sum() for l in modes}
        if weight is not None:
            moments = {l: weight * totals[l] for l in modes}
        else:
            moments = {l: totals[l] - ph[l] for l in modes}
        return _combine(theta, coupling, moments)
    if method == "moments":
        a = np.full((n, n), weight) if weight is not None else adj
        stack = np.concatenate([np.stack([ph[l].real for l in modes], axis=1),
                                np.stack([ph[l].imag for l in modes], axis=1)], axis=1)
        prod = a @ stack
        nm = len(modes)
        moments = {l: prod[:, q] + 1j * prod[:, nm + q] for q, l in enumerate(modes)}
        return _combine(theta, coupling, moments)
    raise DomainError(f"unknown interaction method {method!r}")


# ---------------------------------------------------------------------------
# Integrator
# ---------------------------------------------------------------------------


def _wrap_fast(x: np.ndarray) -> np.ndarray:
    out = np.mod(x, TWO_PI)
    out[out >= TWO_PI] = 0.0
    return out


def _integrate(cfg: SimConfig, drift_fn, labels=None) -> TrajectoryEnsemble:
    theta = cfg.draw_initial_angles()
    if not np.all(np.isfinite(theta)):
        raise NumericalError("non-finite initial angles", step=0)
    theta = _wrap_fast(theta)
    incr = cfg.draw_increments()
    angles = np.empty((cfg.n, cfg.steps + 1))
    angles[:, 0] = theta
    for s in range(cfg.steps):
        drift = drift_fn(theta, s)
        theta = theta + drift * cfg.dt + incr[:, s]
        if not np.all(np.isfinite(theta)):
            raise NumericalError("non-finite particle state", step=s + 1)
        theta = _wrap_fast(theta)
        angles[:, s + 1] = theta
    seed = cfg.seed if isinstance(cfg.seed, (int, np.integer)) else None
    return TrajectoryEnsemble(cfg.time_grid, angles, incr, angles[:, 0].copy(), labels=labels,
                              dt=cfg.dt, seed=seed)


def simulate_particle_system(cfg: SimConfig) -> TrajectoryEnsemble:
    """Simulate the graph-coupled particle system."""
    graph = cfg.resolve_graph()
    adj = graph.adj
    coupling = cfg.coupling
    n = cfg.n

    def drift(theta, _s):
        inter = interaction_term(theta, coupling, adj=adj, method=cfg.interaction)
        return coupling.drift(theta) + inter / n

    return _integrate(cfg, drift, labels=graph.labels)


def simulate_annealed(cfg: SimConfig, p: float) -> TrajectoryEnsemble:
    """Simulate the annealed system with every edge weight replaced by ``p``.

    The sum runs over all ``j`` including ``j = i``, which differs from a
    complete simple graph by ``p Gamma(theta_i, theta_i) / n``.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"annealed weight must lie in [0, 1], got {p}")
    coupling = cfg.coupling
    n = cfg.n
    method = "fast" if cfg.interaction == "auto" else cfg.interaction

    def drift(theta, _s):
        inter = interaction_term(theta, coupling, method=method, weight=p)
        return coupling.drift(theta) + inter / n

    return _integrate(cfg, drift)


def simulate_coupled_copies(cfg: SimConfig, w: Graphon, field, labels=None) -> TrajectoryEnsemble:
    """Simulate IID copies of the non-linear process driven by a solved field.

    Each copy ``i`` carries a label ``U_i`` and feels
    ``sum_kl G_kl e^{ik theta} int W(U_i, y) mu_hat^y_{-l}(t) dy``, with the
    ``y``-integral taken exactly over the field's ``M`` label cells.
    Pass ``cfg.sharing_noise(ens)`` to reuse a particle run's noise.

    ``labels`` defaults to IID uniforms from the config's seed.  ``field``
    must cover ``[0, T]`` with a time step no coarser than ``cfg.dt``;
    moments between field nodes are interpolated linearly.
    """
    if field.time_grid[-1] < cfg.T - 1e-9 * max(1.0, cfg.T):
        raise ContractError("density field does not cover the simulation horizon")
    if field.time_grid.size > 1 and field.time_grid[1] - field.time_grid[0] > cfg.dt * (1 + 1e-9):
        raise ContractError("density field time step is coarser than the simulation step")
    if labels is None:
        labels = np.random.default_rng(cfg._streams()[2]).random(cfg.n)
    labels = np.asarray(labels, dtype=float)
    if labels.shape != (cfg.n,):
        raise ContractError("need one label per particle")
    coupling = cfg.coupling
    modes = coupling.interaction_modes
    # wcell[i, b] = int_{cell b} W(U_i, y) dy
    wcell = w.row_cell_average(labels, field.M) / field.M
    times = cfg.time_grid

    def drift(theta, s):
        if not modes:
            return coupling.drift(theta) + np.zeros_like(theta)
        mom = field.moments_at(times[s])
        moments = {l: wcell @ mom[:, field.K - l] for l in modes}
        return coupling.drift(theta) + _combine(theta, coupling, moments)

    return _integrate(cfg, drift, labels=labels)


def empirical_measure(ens: TrajectoryEnsemble, t_index: int) -> EmpiricalMeasure:
    if not -ens.time_grid.size <= t_index < ens.time_grid.size:
        raise IndexError(f"time index {t_index} out of range for {ens.time_grid.size} times")
    return EmpiricalMeasure(ens.angles[:, t_index])


def lln_estimator(ens_particle: TrajectoryEnsemble, ens_copies: TrajectoryEnsemble) -> float:
    """Root mean sup-squared gap between particles and their coupled copies."""
    if not np.array_equal(ens_particle.time_grid, ens_copies.time_grid):
        raise ContractError("ensembles live on different time grids")
    if ens_particle.n != ens_copies.n:
        raise ContractError("ensembles have different particle counts")
    if not (np.array_equal(ens_particle.initial_angles, ens_copies.initial_angles)
            and np.array_equal(ens_particle.brownian_increments, ens_copies.brownian_increments)):
        raise ContractError("ensembles were not built from shared noise and initial data")
    return coupled_sup_distance_arrays(ens_particle.angles, ens_copies.angles)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_ENS_HEADER = struct.Struct("<QQdQ")
_NO_SEED = 2 ** 64 - 1


def write_ensemble(ens: TrajectoryEnsemble, path) -> None:
    """Binary layout: little-endian ``u64 n, u64 steps, f64 dt, u64 seed``
    followed by the ``n x (steps + 1)`` angle grid as row-major f64."""
    seed = _NO_SEED if ens.seed is None else int(ens.seed) % 2 ** 64
    with open(path, "wb") as fh:
        fh.write(_ENS_HEADER.pack(ens.n, ens.steps, float(ens.dt), seed))
        fh.write(np.ascontiguousarray(ens.angles, dtype="<f8").tobytes())


def read_ensemble(path):
    """Inverse of :func:`write_ensemble`; returns ``(angles, dt, seed)``."""
    data = Path(path).read_bytes()
    if len(data) < _ENS_HEADER.size:
        raise FormatError("truncated ensemble header", path=path)
    n, steps, dt, seed = _ENS_HEADER.unpack_from(data)
    if len(data) - _ENS_HEADER.size != 8 * n * (steps + 1):
        raise FormatError(f"expected {n * (steps + 1)} angles ({8 * n * (steps + 1)} bytes), found "
                          f"{len(data) - _ENS_HEADER.size} bytes", path=path)
    body = np.frombuffer(data, dtype="<f8", offset=_ENS_HEADER.size)
    return body.reshape(n, steps + 1).copy(), dt, (None if seed == _NO_SEED else seed)


def write_ensemble_csv(ens: TrajectoryEnsemble, path) -> None:
    """One row per time: ``t, theta_0, ..., theta_{n-1}``."""
    header = "t," + ",".join(f"theta_{i}" for i in range(ens.n))
    rows = np.column_stack([ens.time_grid, ens.angles.T])
    np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")
