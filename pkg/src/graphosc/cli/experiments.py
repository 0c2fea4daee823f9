"""Experiment drivers.

Each ``run_*`` takes an :class:`ExperimentConfig` and returns a
:class:`ResultTable`.  Work is split into independent jobs keyed by
tuples such as ``(n_index, replica)``; every job derives its own seeds
from the config seed and its key, so results do not depend on how jobs
are scheduled.  Jobs run in a process pool when ``workers > 1`` and are
merged in key order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Callable, Dict, List, Tuple

import numpy as np

from ..dynamics import SimConfig, lln_estimator, simulate_annealed, simulate_coupled_copies, \
    simulate_particle_system
from ..errors import ConfigError, GraphoscError
from ..fokker_planck import average_field, field_distance, kuramoto_self_consistent_r, \
    sample_from_moments, solve_labeled_fp
from ..graphon import Graphon, cut_distance_step, sample_w_random_graph, step_graphon
from ..graphs import GraphSpec, degree_stats, generate
from ..model import CouplingSpec, InitialLaw
from ..torus_metrics import wasserstein2_circle
from .config import ExperimentConfig, dump_yaml
from .results import ResultTable, mean_and_se

# Tags separating the random streams of one job.
_GRAPH, _SIM, _SAMPLE, _LABELS, _FLOOR = range(5)


def derive_seed(seed: int, *key: int) -> int:
    """64-bit seed for the stream identified by ``key`` under ``seed``."""
    lo, hi = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)).generate_state(
        2, np.uint32)
    return (int(hi) << 32) | int(lo)


class Params:
    """Typed access to an experiment's parameter mapping."""

    def __init__(self, data: dict, experiment: str):
        self.data = dict(data)
        self.experiment = experiment

    def get(self, key, default=None, kind: Callable = None):
        if key not in self.data:
            if default is None:
                raise ConfigError(f"{self.experiment}: missing parameter {key!r}")
            return default
        val = self.data[key]
        if kind is None:
            return val
        try:
            return kind(val)
        except (TypeError, ValueError):
            raise ConfigError(f"{self.experiment}: parameter {key!r} has bad value {val!r}") from None

    def coupling(self) -> CouplingSpec:
        return CouplingSpec.from_config(self.get("coupling", {"preset": "kuramoto", "K": 1.0}))

    def initial_law(self, default=None) -> InitialLaw:
        return InitialLaw.from_config(self.data.get("initial_law", default))

    def n_list(self) -> List[int]:
        ns = [int(n) for n in self.get("n_list")]
        if not ns or any(n < 1 for n in ns):
            raise ConfigError(f"{self.experiment}: n_list must hold positive sizes")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError(f"{self.experiment}: n_list must be strictly increasing")
        return ns

    def replicas(self, minimum: int = 1) -> int:
        r = self.get("replicas", 1, int)
        if r < minimum:
            raise ConfigError(f"{self.experiment}: needs at least {minimum} replicas, got {r}")
        return r


def run_jobs(fn, jobs: Dict[Tuple, tuple], workers: int = 1) -> Dict[Tuple, object]:
    """Evaluate ``fn(*args)`` for every job; results keyed and ordered by job key."""
    keys = sorted(jobs)
    if workers > 1 and len(keys) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(fn, *zip(*[jobs[k] for k in keys])))
    else:
        outs = [fn(*jobs[k]) for k in keys]
    return dict(zip(keys, outs))


def _context(exc: GraphoscError, where: str) -> GraphoscError:
    exc.args = (f"{where}: {exc.args[0] if exc.args else ''}",) + tuple(exc.args[1:])
    return exc


def _graph_spec(spec: dict, n: int, seed: int) -> GraphSpec:
    return GraphSpec.from_config({**spec, "n": n, "seed": seed})


def _order(theta: np.ndarray) -> float:
    return float(abs(np.mean(np.exp(1j * theta))))


def _steps_ratio(dt: float, fp_dt: float) -> int:
    ratio = dt / fp_dt
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * ratio:
        raise ConfigError(f"simulation dt={dt} must be an integer multiple of fp_dt={fp_dt}")
    return k


# ---------------------------------------------------------------------------
# Law of large numbers
# ---------------------------------------------------------------------------

_FIELD_CACHE: Dict[str, object] = {}


def _field_for(limit_spec, coupling_spec, law_spec, M, K, T, fp_dt, save_every):
    key = dump_yaml({"w": limit_spec, "c": coupling_spec, "i": law_spec, "M": M, "K": K,
                     "T": T, "dt": fp_dt, "s": save_every})
    if key not in _FIELD_CACHE:
        _FIELD_CACHE[key] = solve_labeled_fp(
            Graphon.from_config(limit_spec), CouplingSpec.from_config(coupling_spec),
            InitialLaw.from_config(law_spec), M, K, T, fp_dt, save_every=save_every)
    return _FIELD_CACHE[key]


def _lln_job(seed, ni, r, n, data):
    P = Params(data, "lln")
    coupling = P.coupling()
    law = P.initial_law()
    T, dt = P.get("T", 1.0, float), P.get("dt", 1e-2, float)
    fp_dt = P.get("fp_dt", min(1e-3, dt), float)
    limit_spec = P.get("limit")
    limit = Graphon.from_config(limit_spec)
    graph_spec = P.get("graph")
    gseed = derive_seed(seed, ni, r, _GRAPH)
    if graph_spec.get("kind") == "w_random":
        graph, labels = sample_w_random_graph(limit, n, gseed, bool(graph_spec.get("weighted", False)))
    else:
        graph = generate(_graph_spec(graph_spec, n, gseed))
        labels = graph.labels
    if labels is None:
        labels = np.random.default_rng(derive_seed(seed, ni, r, _LABELS)).random(n)
    cfg = SimConfig(n=n, T=T, dt=dt, seed=derive_seed(seed, ni, r, _SIM), initial_law=law,
                    coupling=coupling, graph=graph)
    ens = simulate_particle_system(cfg)
    M = P.get("M", 1 if limit.is_constant() else 16, int)
    field = _field_for(limit_spec, coupling.to_config(), law.to_config(), M,
                       P.get("K", 16, int), T, fp_dt, _steps_ratio(dt, fp_dt))
    copies = simulate_coupled_copies(cfg.sharing_noise(ens), limit, field, labels)
    est = lln_estimator(ens, copies)
    sample = sample_from_moments(average_field(field)[-1], n,
                                 np.random.default_rng(derive_seed(seed, ni, r, _SAMPLE)))
    w2 = wasserstein2_circle(ens.angles[:, -1], sample)
    cut = None
    want_cut = P.get("cut_distance", "auto")
    if want_cut is True or (want_cut == "auto" and limit.is_constant()):
        target = limit if limit.n_blocks is not None else limit.discretize(P.get("cut_blocks", 8, int))
        cut = cut_distance_step(step_graphon(graph), target, mode="local_search",
                                seed=derive_seed(seed, ni, r, _SAMPLE, 1)).value
    return est, w2, cut


def run_lln(cfg: ExperimentConfig, workers: int = 1) -> ResultTable:
    """Gap between the particle system and coupled copies of the limit, versus n."""
    P = Params(cfg.parameters, "lln")
    ns, R = P.n_list(), P.replicas()
    P.get("graph"), P.get("limit")
    jobs = {(ni, r): (cfg.seed, ni, r, n, cfg.parameters) for ni, n in enumerate(ns) for r in range(R)}
    try:
        out = run_jobs(_lln_job, jobs, workers)
    except GraphoscError as exc:
        raise _context(exc, "lln") from None
    table = ResultTable("lln")
    for ni, n in enumerate(ns):
        res = [out[(ni, r)] for r in range(R)]
        for r, (est, w2, cut) in enumerate(res):
            table.add({"n": n, "replica": r}, "lln_estimator_replica", est)
        for idx, name in ((0, "lln_estimator"), (1, "w2_terminal"), (2, "cut_distance")):
            vals = [x[idx] for x in res if x[idx] is not None]
            if vals:
                mean, se = mean_and_se(vals)
                table.add({"n": n}, name, mean, se, len(vals))
    return table


# ---------------------------------------------------------------------------
# Hoelder continuity in the graphon
# ---------------------------------------------------------------------------


def _holder_pairs(P: Params, seed: int):
    """List of (label, graphon_a, graphon_b, delta, M)."""
    pairs = []
    base = P.get("base", 0.5, float)
    for q in P.get("values", [0.1 * k for k in range(1, 10)]):
        q = float(q)
        pairs.append(({"p": q}, Graphon.constant(q), Graphon.constant(base), abs(q - base), 1))
    pert = P.data.get("step_perturbations")
    if pert:
        b0 = np.array(pert["base_blocks"], dtype=float)
        d = np.array(pert["direction_blocks"], dtype=float)
        refine = int(pert.get("cells_per_block", 1))
        for j, eps in enumerate(pert["eps"]):
            u = Graphon.step(np.clip(b0 + float(eps) * d, 0.0, 1.0))
            v = Graphon.step(b0)
            mode = "exact" if b0.shape[0] <= 8 else "local_search"
            delta = cut_distance_step(u, v, mode=mode, seed=derive_seed(seed, 1, j)).value
            pairs.append(({"eps": float(eps)}, u, v, delta, b0.shape[0] * refine))
    return pairs


def run_holder(cfg: ExperimentConfig, workers: int = 1) -> ResultTable:
    """Field distance between FP solutions versus the cut distance of their graphons."""
    P = Params(cfg.parameters, "holder")
    coupling, law = P.coupling(), P.initial_law({"kind": "von_mises", "loc": 0.0, "concentration": 1.0})
    K, T = P.get("K", 16, int), P.get("T", 1.0, float)
    fp_dt = P.get("fp_dt", 1e-3, float)
    pairs = _holder_pairs(P, cfg.seed)
    if len(pairs) < 4:
        raise ConfigError("holder: need at least 4 graphon pairs")
    table = ResultTable("holder")
    deltas, dists = [], []
    try:
        for label, u, v, delta, M in pairs:
            fa = solve_labeled_fp(u, coupling, law, M, K, T, fp_dt)
            fb = solve_labeled_fp(v, coupling, law, M, K, T, fp_dt)
            dist = field_distance(fa, fb, per_class=False)
            table.add(label, "delta_cut", delta)
            table.add(label, "field_distance", dist)
            deltas.append(delta)
            dists.append(dist)
    except GraphoscError as exc:
        raise _context(exc, "holder") from None
    deltas, dists = np.array(deltas), np.array(dists)
    pos = (deltas > 0) & (dists > 0)
    if pos.sum() >= 2:
        slope = float(np.polyfit(np.log(deltas[pos]), np.log(dists[pos]), 1)[0])
    else:
        slope = math.nan
    ratios = dists[deltas > 0] / np.sqrt(deltas[deltas > 0])
    C = float(ratios.max()) if ratios.size else 0.0
    holds = bool(np.all(dists <= C * np.sqrt(deltas) * (1 + 1e-12)))
    table.add({}, "holder_exponent", slope)
    table.add({}, "holder_constant", C)
    table.add({}, "holder_bound_holds", float(holds))
    return table


# ---------------------------------------------------------------------------
# Propagation of chaos
# ---------------------------------------------------------------------------

_TEST_FUNCTIONS = {"cos": np.cos, "sin": np.sin}


def _chaos_job(seed, ni, r, n, data):
    P = Params(data, "chaos")
    T, dt = P.get("T", 1.0, float), P.get("dt", 1e-2, float)
    t_eval = P.get("time", T, float)
    graph = generate(_graph_spec(P.get("graph", {"kind": "erdos_renyi", "p": 0.5}), n,
                                 derive_seed(seed, ni, r, _GRAPH)))
    cfg = SimConfig(n=n, T=T, dt=dt, seed=derive_seed(seed, ni, r, _SIM),
                    initial_law=P.initial_law(), coupling=P.coupling(), graph=graph)
    ens = simulate_particle_system(cfg)
    idx = int(round(t_eval / dt))
    theta = ens.angles[:, idx]
    return {name: _TEST_FUNCTIONS[name](theta) for name in P.get("functions", ["cos", "sin"])}


def exchangeable_covariance(values: np.ndarray) -> Tuple[float, float]:
    """Unbiased ``Cov(f(theta_1), f(theta_2))`` from ``(replicas, n)`` samples.

    Uses every ordered pair of distinct particles of each replica (valid for
    exchangeable systems) and an unbiased product-of-means correction
    across replicas.  The standard error is the jackknife over replicas.
    """
    x = np.asarray(values, dtype=float)
    x = x - x.mean()  # shift invariance; makes constant inputs give exactly 0
    R, n = x.shape
    if n < 2 or R < 2:
        raise ConfigError("covariance needs at least 2 particles and 2 replicas")
    s = x.sum(axis=1)
    q = (x * x).sum(axis=1)
    pair = (s * s - q) / (n * (n - 1))
    m = s / n

    def estimate(pair, m):
        k = pair.size
        return pair.mean() - (m.sum() ** 2 - (m * m).sum()) / (k * (k - 1))

    full = float(estimate(pair, m))
    keep = ~np.eye(R, dtype=bool)
    loo = np.array([estimate(pair[keep[i]], m[keep[i]]) for i in range(R)])
    se = float(math.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2)))
    return full, se


def pair_covariance(values: np.ndarray) -> Tuple[float, float]:
    """Sample covariance of particles 0 and 1 across replicas, jackknife error."""
    x = np.asarray(values, dtype=float)
    a, b = x[:, 0] - x[:, 0].mean(), x[:, 1] - x[:, 1].mean()
    R = a.size
    full = float(np.sum(a * b) / (R - 1))
    keep = ~np.eye(R, dtype=bool)
    loo = np.array([np.cov(x[keep[i], 0], x[keep[i], 1])[0, 1] for i in range(R)])
    se = float(math.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2)))
    return full, se


def run_chaos(cfg: ExperimentConfig, workers: int = 1) -> ResultTable:
    """Two-particle covariances of test functions versus n."""
    P = Params(cfg.parameters, "chaos")
    ns, R = P.n_list(), P.replicas(minimum=100)
    if min(ns) < 2:
        raise ConfigError("chaos: need n >= 2 for two-particle statistics")
    funcs = P.get("functions", ["cos", "sin"])
    bad = [f for f in funcs if f not in _TEST_FUNCTIONS]
    if bad:
        raise ConfigError(f"chaos: unknown test functions {bad}")
    jobs = {(ni, r): (cfg.seed, ni, r, n, cfg.parameters) for ni, n in enumerate(ns) for r in range(R)}
    try:
        out = run_jobs(_chaos_job, jobs, workers)
    except GraphoscError as exc:
        raise _context(exc, "chaos") from None
    table = ResultTable("chaos")
    for ni, n in enumerate(ns):
        for name in funcs:
            vals = np.stack([out[(ni, r)][name] for r in range(R)])
            cov, se = exchangeable_covariance(vals)
            table.add({"n": n, "f": name}, "covariance", cov, se, R)
            table.add({"n": n, "f": name}, "abs_covariance", abs(cov), se, R)
            cov12, se12 = pair_covariance(vals)
            table.add({"n": n, "f": name}, "covariance_pair01", cov12, se12, R)
    return table


# ---------------------------------------------------------------------------
# Random mean-field limit
# ---------------------------------------------------------------------------


def _meanfield_job(seed, r, data):
    P = Params(data, "random_meanfield")
    n = P.get("n", 800, int)
    Kc = P.get("K", 3.0, float)
    T, dt = P.get("T", 40.0, float), P.get("dt", 0.05, float)
    graph = generate(_graph_spec(P.get("graph", {"kind": "preferential_attachment"}), n,
                                 derive_seed(seed, r, _GRAPH)))
    p_hat, _ = degree_stats(graph)
    cfg = SimConfig(n=n, T=T, dt=dt, seed=derive_seed(seed, r, _SIM), initial_law=P.initial_law(),
                    coupling=CouplingSpec.kuramoto(Kc), graph=graph)
    ens = simulate_particle_system(cfg)
    return p_hat, _order(ens.angles[:, -1]), kuramoto_self_consistent_r(p_hat * Kc)


def run_random_meanfield(cfg: ExperimentConfig, workers: int = 1) -> ResultTable:
    """Per-replica edge density, simulated and self-consistent order parameters."""
    P = Params(cfg.parameters, "random_meanfield")
    R = P.replicas(minimum=20)
    Kc = P.get("K", 3.0, float)
    thr = P.get("threshold", 0.1, float)
    try:
        out = run_jobs(_meanfield_job, {(r,): (cfg.seed, r, cfg.parameters) for r in range(R)}, workers)
    except GraphoscError as exc:
        raise _context(exc, "random_meanfield") from None
    table = ResultTable("random_meanfield")
    agree = []
    p_hats = []
    for r in range(R):
        p_hat, r_sim, r_sc = out[(r,)]
        table.add({"replica": r}, "p_hat", p_hat)
        table.add({"replica": r}, "r_simulated", r_sim)
        table.add({"replica": r}, "r_selfconsistent", r_sc)
        agree.append(float((r_sim > thr) == (p_hat * Kc > 1.0)))
        p_hats.append(p_hat)
    p = np.array(p_hats)
    mean, se = mean_and_se(p)
    table.add({}, "p_hat_mean", mean, se, R)
    var = float(np.var(p, ddof=1))
    keep = ~np.eye(R, dtype=bool)
    loo = np.array([np.var(p[keep[i]], ddof=1) for i in range(R)])
    var_se = float(math.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2)))
    table.add({}, "p_hat_variance", var, var_se, R)
    frac = float(np.mean(agree))
    table.add({"K": Kc, "threshold": thr}, "classification_agreement", frac,
              math.sqrt(frac * (1 - frac) / R), R)
    return table


# ---------------------------------------------------------------------------
# Annealed gap
# ---------------------------------------------------------------------------


def _annealed_job(seed, li, r, variance, data):
    P = Params(data, "annealed_gap")
    n = P.get("n", 400, int)
    p = P.get("p", 0.5, float)
    T, dt = P.get("T", 1.0, float), P.get("dt", 1e-2, float)
    coupling = P.coupling()
    law = P.initial_law({"kind": "von_mises", "loc": 0.0, "concentration": 1.0})
    base = SimConfig(n=n, T=T, dt=dt, seed=derive_seed(seed, 0, r, _SIM), initial_law=law,
                     coupling=coupling)
    if li < 0:
        # noise floor: two annealed runs with independent randomness
        a = simulate_annealed(base, p)
        b = simulate_annealed(replace(base, seed=derive_seed(seed, 0, r, _FLOOR)), p)
        return wasserstein2_circle(a.angles[:, -1], b.angles[:, -1])
    quantile = Graphon.rank1_beta_moments(math.sqrt(p), variance)
    spec = GraphSpec("rank1", n=n, seed=derive_seed(seed, li + 1, r, _GRAPH), quantile=quantile)
    cfg = replace(base, graph=generate(spec))
    ens = simulate_particle_system(cfg)
    ann = simulate_annealed(cfg.sharing_noise(ens), p)
    return wasserstein2_circle(ens.angles[:, -1], ann.angles[:, -1])


def run_annealed_gap(cfg: ExperimentConfig, workers: int = 1) -> ResultTable:
    """Terminal W2 between the graph system and the annealed system versus Var[g]."""
    P = Params(cfg.parameters, "annealed_gap")
    R = P.replicas()
    variances = [float(v) for v in P.get("variances")]
    if any(b < a for a, b in zip(variances, variances[1:])):
        raise ConfigError("annealed_gap: variances must be nondecreasing")
    m = math.sqrt(P.get("p", 0.5, float))
    for v in variances:
        if v < 0 or (v > 0 and v >= m * (1 - m)):
            raise ConfigError(f"annealed_gap: variance {v} impossible for a Beta weight of mean {m}")
    jobs = {(li, r): (cfg.seed, li, r, v, cfg.parameters)
            for li, v in enumerate(variances) for r in range(R)}
    if P.get("noise_floor", True, bool):
        jobs.update({(-1, r): (cfg.seed, -1, r, 0.0, cfg.parameters) for r in range(R)})
    try:
        out = run_jobs(_annealed_job, jobs, workers)
    except GraphoscError as exc:
        raise _context(exc, "annealed_gap") from None
    table = ResultTable("annealed_gap")
    for li, v in enumerate(variances):
        mean, se = mean_and_se([out[(li, r)] for r in range(R)])
        table.add({"variance": v}, "w2_gap", mean, se, R)
    if (-1, 0) in out:
        mean, se = mean_and_se([out[(-1, r)] for r in range(R)])
        table.add({}, "noise_floor", mean, se, R)
    return table


# ---------------------------------------------------------------------------
# Graph convergence
# ---------------------------------------------------------------------------


def _convergence_job(seed, ni, r, n, data):
    P = Params(data, "graph_convergence")
    w = Graphon.from_config(P.get("graphon"))
    graph, _ = sample_w_random_graph(w, n, derive_seed(seed, ni, r, _GRAPH))
    target = w if w.n_blocks is not None else w.discretize(P.get("discretization", n, int))
    res = cut_distance_step(step_graphon(graph), target, mode=P.get("mode", "local_search"),
                            seed=derive_seed(seed, ni, r, _SAMPLE),
                            restarts=P.get("restarts", 5, int))
    return res.value


def run_graph_convergence(cfg: ExperimentConfig, workers: int = 1) -> ResultTable:
    """Monte-Carlo cut distance between W-random graphs and their graphon, versus n."""
    P = Params(cfg.parameters, "graph_convergence")
    ns, R = P.n_list(), P.replicas()
    Graphon.from_config(P.get("graphon"))
    jobs = {(ni, r): (cfg.seed, ni, r, n, cfg.parameters) for ni, n in enumerate(ns) for r in range(R)}
    try:
        out = run_jobs(_convergence_job, jobs, workers)
    except GraphoscError as exc:
        raise _context(exc, "graph_convergence") from None
    table = ResultTable("graph_convergence")
    for ni, n in enumerate(ns):
        mean, se = mean_and_se([out[(ni, r)] for r in range(R)])
        table.add({"n": n}, "cut_distance", mean, se, R)
    return table


RUNNERS = {
    "lln": run_lln,
    "holder": run_holder,
    "chaos": run_chaos,
    "random_meanfield": run_random_meanfield,
    "annealed_gap": run_annealed_gap,
    "graph_convergence": run_graph_convergence,
}


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ResultTable:
    return RUNNERS[cfg.experiment](cfg, workers=workers)
