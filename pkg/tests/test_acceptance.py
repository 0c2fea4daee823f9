"""Acceptance criteria 1-11, each at its stated size and tolerance.

Every test reports one ``criterion N: PASS|FAIL`` line in the terminal
summary (visible without ``-s``).  Criteria 6-10 run the experiment
configs shipped in ``configs/``.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from helpers import brute_cut_norm_table
from graphosc.cli.config import ExperimentConfig
from graphosc.cli.experiments import run_experiment
from graphosc.fokker_planck import (
    initial_moments,
    kuramoto_self_consistent_r,
    order_parameter,
    solve_labeled_fp,
    solve_mckean_vlasov,
)
from graphosc.graphon import Graphon, cut_norm_exact, inf_to_one_norm
from graphosc.model import CouplingSpec, InitialLaw

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
LINES = []


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        reporter.write_sep("=", "acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            reporter.write_line(line)


def report(n, ok, detail, start):
    LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - start:.1f} s) {detail}")
    assert ok, detail


_RUNS = {}


def experiment(name):
    if name not in _RUNS:
        cfg = ExperimentConfig.load(CONFIGS / f"{name}.yaml")
        start = time.perf_counter()
        table = run_experiment(cfg)
        _RUNS[name] = (table, time.perf_counter() - start)
    return _RUNS[name]


def _matrices():
    return [np.random.default_rng(1000 + s).uniform(-1, 1, (8, 8)) for s in range(200)]


def test_criterion_01_cut_norm_oracle():
    start = time.perf_counter()
    mismatches = sum(cut_norm_exact(a) != brute_cut_norm_table(a) for a in _matrices())
    good = 0
    for s in range(100):
        a = np.random.default_rng(5000 + s).uniform(-1, 1, (10, 10))
        exact = inf_to_one_norm(a, method="exact")[0]
        heur = inf_to_one_norm(a, restarts=50, seed=s, method="heuristic")[0]
        good += heur >= 0.95 * exact
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and good >= 95 and elapsed < 60
    report(1, ok, f"exact mismatches {mismatches}/200, heuristic >= 0.95 exact on {good}/100", start)


def test_criterion_02_norm_sandwich():
    start = time.perf_counter()
    bad = 0
    for a in _matrices():
        c = cut_norm_exact(a)
        i = inf_to_one_norm(a, method="exact")[0]
        bad += not (c <= i <= 4 * c)
    report(2, bad == 0, f"sandwich violated on {bad}/200", start)


GENERIC = CouplingSpec({1: 0.2, -1: 0.2},
                       {(1, -1): 1.0j, (-1, 1): -1.0j, (2, -1): 0.3 + 0.1j, (-2, 1): 0.3 - 0.1j})
STEP = np.array([[0.9, 0.3, 0.1, 0.6], [0.3, 0.2, 0.8, 0.4], [0.1, 0.8, 0.5, 0.7],
                 [0.6, 0.4, 0.7, 0.1]])


def test_criterion_03_fp_conservation_and_symmetry():
    start = time.perf_counter()
    law = InitialLaw("von_mises", 0.8, 1.5)
    mass_err = collapse = 0.0
    equivariant = True
    configs = 0
    for M in (1, 4, 8):
        for K in (16, 32):
            for coupling in (CouplingSpec.kuramoto(2.0), GENERIC):
                f = solve_labeled_fp(Graphon.constant(0.7), coupling, law, M, K, 1.0, 1e-3)
                mass_err = max(mass_err, float(np.max(np.abs(f.coeffs[..., K] - 1.0))))
                collapse = max(collapse, float(np.max(np.abs(f.coeffs - f.coeffs[:, :1]))))
                configs += 1
    perm = np.array([2, 0, 3, 1])
    for M in (4, 8):
        for K in (16, 32):
            for coupling in (CouplingSpec.kuramoto(2.0), GENERIC):
                rng = np.random.default_rng(M + K)
                init = np.stack([initial_moments(InitialLaw("von_mises", loc, a), K)[0]
                                 for loc, a in rng.uniform(0, 3, size=(M, 2))])
                cells = np.arange(M) // (M // 4)
                w = Graphon.step(STEP)
                f = solve_labeled_fp(w, coupling, init, M, K, 1.0, 1e-3)
                # relabel the four blocks; with M = 8 each block owns two cells
                cell_perm = np.concatenate([np.flatnonzero(cells == b) for b in perm])
                g = solve_labeled_fp(Graphon.step(STEP[np.ix_(perm, perm)]), coupling, init[cell_perm],
                                     M, K, 1.0, 1e-3)
                equivariant &= bool(np.array_equal(g.coeffs, f.coeffs[:, cell_perm]))
                mass_err = max(mass_err, float(np.max(np.abs(f.coeffs[..., K] - 1.0))))
                configs += 1
    elapsed = time.perf_counter() - start
    ok = configs == 20 and mass_err <= 1e-14 and collapse <= 1e-12 and equivariant and elapsed < 120
    report(3, ok, f"{configs} configs, mass error {mass_err:.1e}, collapse {collapse:.1e}, "
                  f"equivariant {equivariant}", start)


def test_criterion_04_heat_kernel():
    start = time.perf_counter()
    K, c = 16, 0.6 + 0.3j
    init = np.zeros(2 * K + 1, dtype=complex)
    init[K], init[K + 1], init[K - 1] = 1.0, c, np.conj(c)
    f = solve_labeled_fp(Graphon.constant(0.0), CouplingSpec(), init, 1, K, 2.0, 1e-3, save_every=500)
    err = max(abs(f.mode(1)[int(round(t / 0.5)), 0] - c * np.exp(-t / 2)) for t in (0.5, 1.0, 2.0))
    ok = err <= 1e-8 and time.perf_counter() - start < 5
    report(4, ok, f"max error {err:.1e}", start)


def test_criterion_05_phase_transition():
    start = time.perf_counter()
    sub = [kuramoto_self_consistent_r(pk) for pk in (0.2, 0.5, 0.9, 1.0)]
    sup = [kuramoto_self_consistent_r(pk) for pk in (1.2, 1.5, 2.0, 3.0)]
    K = 32
    init = np.ones(2 * K + 1, dtype=complex)  # synchronised: point mass at 0
    init = init * 0.999 ** np.abs(np.arange(-K, K + 1))
    f = solve_mckean_vlasov(1.0, CouplingSpec.kuramoto(2.0), init, K=K, T=50.0, dt=1e-2,
                            save_every=100)
    r_pde = order_parameter(f.coeffs[-1, 0])
    gap = abs(r_pde - sup[2])
    ok = (all(r == 0.0 for r in sub) and sup[0] > 0 and all(np.diff(sup) > 0) and gap <= 1e-3
          and time.perf_counter() - start < 60)
    report(5, ok, f"r(pK > 1) = {[round(r, 5) for r in sup]}, |r_pde - r(2)| = {gap:.1e}", start)


def test_criterion_06_lln_trend():
    start = time.perf_counter()
    table, elapsed = experiment("lln")
    means = [table.value("lln_estimator", n=n) for n in (100, 400, 1600)]
    ok = means[0] > means[1] > means[2] and means[2] <= 0.5 * means[0] and elapsed < 600
    report(6, ok, f"estimator means {[round(m, 5) for m in means]}", start)


def test_criterion_07_holder_modulus():
    start = time.perf_counter()
    table, elapsed = experiment("holder")
    slope = table.value("holder_exponent")
    C = table.value("holder_constant")
    holds = True
    for row in table.select("field_distance"):
        delta = table.value("delta_cut", p=row.params["p"])
        holds &= row.value <= C * np.sqrt(delta) * (1 + 1e-12)
    ok = holds and slope >= 0.35 and elapsed < 300
    report(7, ok, f"fitted exponent {slope:.3f}, C = {C:.4f}, bound holds {holds}", start)


def test_criterion_08_chaos():
    start = time.perf_counter()
    table, elapsed = experiment("chaos")
    small = table.value("abs_covariance", n=50, f="cos")
    large = table.value("abs_covariance", n=800, f="cos")
    ok = large < small and large < 0.02 and elapsed < 600
    report(8, ok, f"|cov| n=50: {small:.2e}, n=800: {large:.2e}", start)


def test_criterion_09_random_meanfield():
    start = time.perf_counter()
    table, elapsed = experiment("random_meanfield")
    var = table.value("p_hat_variance")
    agree = table.value("classification_agreement")
    ok = var > 0 and agree >= 0.9 and elapsed < 600
    report(9, ok, f"var(p_hat) = {var:.3e}, agreement {agree:.3f}", start)


def test_criterion_10_annealed_gap():
    start = time.perf_counter()
    table, elapsed = experiment("annealed_gap")
    gaps = [r.value for r in table.select("w2_gap")]
    floor = table.value("noise_floor")
    ok = len(gaps) == 3 and all(np.diff(gaps) >= 0) and gaps[0] < floor and elapsed < 600
    report(10, ok, f"gaps {[round(g, 4) for g in gaps]}, noise floor {floor:.4f}", start)


def test_criterion_11_determinism():
    start = time.perf_counter()
    same = {}
    for name in ("lln", "holder", "chaos", "random_meanfield", "annealed_gap"):
        first = experiment(name)[0].to_csv().encode()
        again = run_experiment(ExperimentConfig.load(CONFIGS / f"{name}.yaml")).to_csv().encode()
        same[name] = first == again
    report(11, all(same.values()), f"byte-identical: {same}", start)
