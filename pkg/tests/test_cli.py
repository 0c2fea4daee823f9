import json
import math
import subprocess
import sys

import numpy as np
import pytest

from graphosc.cli.config import ExperimentConfig, config_hash, parse_yaml
from graphosc.cli.experiments import (
    derive_seed,
    exchangeable_covariance,
    pair_covariance,
    run_experiment,
    run_jobs,
)
from graphosc.cli.main import main
from graphosc.cli.results import ResultTable, mean_and_se, read_csv
from graphosc.errors import ConfigError, ContractError, FormatError
from graphosc.graphon import read_graph

KUR0 = {"preset": "kuramoto", "K": 0.0}


def run(experiment, seed=1, **parameters):
    return run_experiment(ExperimentConfig(experiment, seed, parameters))


# ---------------------------------------------------------------------------
# Config and results plumbing
# ---------------------------------------------------------------------------


def test_config_round_trip():
    text = """
experiment: lln
seed: 12
output: out/x
parameters:
  n_list: [4, 8]
  graph: {kind: erdos_renyi, p: 0.3}
  coupling: {preset: kuramoto, K: 1.5}
"""
    cfg = ExperimentConfig.loads(text)
    again = ExperimentConfig.loads(cfg.dumps())
    assert again == cfg
    assert again.dumps() == cfg.dumps()
    assert again.hash() == cfg.hash() == config_hash(cfg.to_dict())


@pytest.mark.parametrize("text", [
    "experiment: lln\nparameters: {}\n",  # no seed
    "experiment: nope\nseed: 1\nparameters: {}\n",
    "experiment: lln\nseed: -1\nparameters: {}\n",
    "experiment: lln\nseed: 1\nparameters: {}\nextra: 3\n",
    "experiment: lln\nseed: 1\nparameters: [1, 2]\n",
    "- just\n- a list\n",
    "experiment: [unclosed\n",
])
def test_bad_configs_rejected(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.loads(text)


def test_result_table_contract_and_csv(tmp_path):
    t = ResultTable("demo")
    t.add({"n": 4, "f": "cos"}, "stat", 0.1, 0.01, 5)
    t.add({}, "single", 1)
    with pytest.raises(ContractError):
        t.add({}, "bad", 0.5, None, 3)
    t.write(tmp_path / "r.csv")
    text = (tmp_path / "r.csv").read_text()
    assert text.splitlines()[1] == "demo,n=4;f=cos,stat,0.1,0.01,5"
    back = read_csv(tmp_path / "r.csv")
    assert back.value("stat", n="4") == 0.1 and back.rows[1].std_error is None
    (tmp_path / "bad.csv").write_text(text + "demo,x\n")
    with pytest.raises(FormatError) as info:
        read_csv(tmp_path / "bad.csv")
    assert info.value.line == 4


def test_mean_and_se():
    assert mean_and_se([2.0]) == (2.0, None)
    m, se = mean_and_se([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5 and se == pytest.approx(math.sqrt(5 / 3) / 2)


def test_seed_derivation_is_stable_and_distinct():
    assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2)
    seeds = {derive_seed(5, a, b) for a in range(5) for b in range(5)} | {derive_seed(6, 0, 0)}
    assert len(seeds) == 26
    assert 0 <= derive_seed(2 ** 64 - 1, 3) < 2 ** 64


def _square(x):
    return x * x


def test_run_jobs_merges_in_key_order():
    jobs = {(2,): (3,), (0,): (1,), (1,): (2,)}
    assert list(run_jobs(_square, jobs, workers=1).items()) == [((0,), 1), ((1,), 4), ((2,), 9)]
    assert run_jobs(_square, jobs, workers=2) == run_jobs(_square, jobs, workers=1)


def test_covariance_estimators():
    rng = np.random.default_rng(0)
    x = np.full((50, 6), 0.3)
    assert exchangeable_covariance(x)[0] == 0.0
    # replicas share a random offset: Cov = Var(offset) = 1
    y = rng.normal(size=(4000, 1)) + 0.5 * rng.normal(size=(4000, 5))
    cov, se = exchangeable_covariance(y)
    assert abs(cov - 1.0) < 4 * se
    cov01, se01 = pair_covariance(y)
    assert abs(cov01 - 1.0) < 4 * se01
    hand = np.cov(y[:, 0], y[:, 1])[0, 1]
    assert cov01 == pytest.approx(hand, rel=1e-12)


# ---------------------------------------------------------------------------
# Experiment examples
# ---------------------------------------------------------------------------


def test_lln_without_interaction_is_zero():
    t = run("lln", n_list=[16], replicas=1, graph={"kind": "complete"},
            limit={"kind": "constant", "p": 1.0}, coupling=KUR0, T=0.2, dt=0.01, K=4)
    assert t.value("lln_estimator", n=16) == 0.0
    t = run("lln", n_list=[10, 20], replicas=2, graph={"kind": "erdos_renyi", "p": 0.4},
            limit={"kind": "constant", "p": 0.4}, coupling={"drift": {}, "interaction": {}},
            T=0.2, dt=0.01, K=4)
    assert [r.value for r in t.select("lln_estimator")] == [0.0, 0.0]


def test_lln_with_step_limit_runs():
    t = run("lln", n_list=[8], replicas=2, graph={"kind": "w_random"},
            limit={"kind": "step", "blocks": [[0.8, 0.2], [0.2, 0.6]]}, M=2, K=4, T=0.1, dt=0.01,
            cut_distance=True)
    assert t.value("lln_estimator", n=8) > 0
    assert len(t.select("cut_distance")) == 1


def test_holder_trivial_pairs():
    t = run("holder", base=0.5, values=[0.2, 0.5, 0.8, 0.9], coupling=KUR0, K=4, T=0.2)
    assert t.value("delta_cut", p=0.5) == 0.0 and t.value("field_distance", p=0.5) == 0.0
    assert t.value("field_distance", p=0.2) == 0.0 and t.value("field_distance", p=0.8) == 0.0
    with pytest.raises(ConfigError):
        run("holder", values=[0.1, 0.2], K=4, T=0.1)


def test_holder_step_perturbations():
    t = run("holder", base=0.5, values=[0.3, 0.7], K=4, T=0.2, fp_dt=1e-2,
            coupling={"preset": "kuramoto", "K": 2.0},
            step_perturbations={"base_blocks": [[0.6, 0.3], [0.3, 0.5]],
                                "direction_blocks": [[1, 0], [0, -1]], "eps": [0.05, 0.1]})
    d1, d2 = t.value("delta_cut", eps=0.05), t.value("delta_cut", eps=0.1)
    assert 0 < d1 < d2


def test_chaos_examples():
    t = run("chaos", n_list=[2], replicas=200, graph={"kind": "complete"}, coupling=KUR0,
            T=0.3, dt=0.01)
    for f in ("cos", "sin"):
        row = t.select("covariance", n=2, f=f)[0]
        assert abs(row.value) <= 3 * row.std_error
    t = run("chaos", n_list=[3, 5], replicas=100, initial_law={"kind": "point_mass", "loc": 1.0},
            time=0.0, T=0.1, dt=0.01)
    assert all(r.value == 0.0 for r in t.select("covariance"))
    with pytest.raises(ConfigError):
        run("chaos", n_list=[4], replicas=50)


def test_random_meanfield_examples():
    t = run("random_meanfield", n=30, replicas=20, K=0.0, T=0.2, dt=0.05)
    assert all(r.value == 0.0 for r in t.select("r_selfconsistent"))
    t = run("random_meanfield", n=30, replicas=20, K=3.0, T=0.2, dt=0.05, graph={"kind": "complete"})
    assert all(r.value == 1.0 for r in t.select("p_hat"))
    assert t.value("p_hat_variance") == 0.0
    with pytest.raises(ConfigError):
        run("random_meanfield", n=30, replicas=10)


def test_annealed_gap_examples():
    t = run("annealed_gap", n=20, replicas=3, variances=[0.0, 0.05], coupling=KUR0, T=0.2, dt=0.01)
    assert [r.value for r in t.select("w2_gap")] == [0.0, 0.0]
    assert t.value("noise_floor") > 0
    with pytest.raises(ConfigError):
        run("annealed_gap", n=10, variances=[0.3], replicas=2)
    with pytest.raises(ConfigError):
        run("annealed_gap", n=10, variances=[0.1, 0.0], replicas=2)


@pytest.mark.parametrize("n", [2, 5, 9])
def test_graph_convergence_complete_graph(n):
    # the W-random graph of W = 1 is complete but has an empty diagonal
    t = run("graph_convergence", graphon={"kind": "constant", "p": 1.0}, n_list=[n], replicas=2,
            mode="exact")
    assert t.value("cut_distance", n=n) == pytest.approx(1.0 / n, abs=1e-15)


def test_graph_convergence_single_vertex():
    t = run("graph_convergence", graphon={"kind": "step", "blocks": [[0.8, 0.2], [0.2, 0.4]]},
            n_list=[1], replicas=2, mode="exact")
    assert t.value("cut_distance", n=1) == pytest.approx(0.4, abs=1e-15)


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_graph_gen_and_cutnorm(tmp_path, capsys):
    cfg = _write(tmp_path, "g.yaml", "seed: 3\ngraph: {kind: erdos_renyi, n: 12, p: 0.5}\n")
    out = tmp_path / "g"
    assert main(["graph-gen", "--config", cfg, "--out", str(out)]) == 0
    g = read_graph(out / "graph.txt")
    assert g.n == 12
    meta = json.loads((out / "meta.json").read_text())
    assert meta["seed"] == 3 and len(meta["config_hash"]) == 64
    assert set(meta["versions"]) >= {"graphosc", "numpy"}
    np.savetxt(tmp_path / "m.csv", g.adj, delimiter=",")
    cfg2 = _write(tmp_path, "c.yaml", f"seed: 1\nmatrix: {tmp_path / 'm.csv'}\n")
    assert main(["cutnorm", "--config", cfg2, "--out", str(tmp_path / "c")]) == 0
    table = read_csv(tmp_path / "c" / "results.csv")
    assert table.value("cut_norm", method="exact") <= table.value("inf_to_one_norm", method="exact")


def test_cli_cutdist_simulate_fp(tmp_path):
    cfg = _write(tmp_path, "d.yaml", "seed: 1\nu: {kind: constant, p: 0.2}\nv: {kind: constant, p: 0.7}\n")
    assert main(["cutdist", "--config", cfg, "--out", str(tmp_path / "d")]) == 0
    assert read_csv(tmp_path / "d" / "results.csv").value("cut_distance") == pytest.approx(0.5)
    cfg = _write(tmp_path, "s.yaml", "seed: 4\nn: 6\nT: 0.1\ndt: 0.01\ngraph: {kind: complete}\n"
                                     "format: csv\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "ensemble.csv").exists()
    cfg = _write(tmp_path, "f.yaml", "seed: 4\ngraphon: {kind: constant, p: 0.5}\nK: 8\nT: 0.1\n"
                                     "dt: 0.01\n")
    assert main(["fp-solve", "--config", cfg, "--out", str(tmp_path / "f")]) == 0
    assert (tmp_path / "f" / "field.bin").exists() and (tmp_path / "f" / "order_parameter.csv").exists()


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["graph-gen", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert _error(capsys)["error"] == "ConfigError"
    cfg = _write(tmp_path, "bad.yaml", "seed: 1\ngraph: {kind: nope, n: 3}\n")
    assert main(["graph-gen", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    rec = _error(capsys)
    assert rec["exit_code"] == 2 and "nope" in rec["message"]
    (tmp_path / "broken.txt").write_text("n=3\n0 1 1\n0 9 1\n")
    cfg = _write(tmp_path, "cut.yaml", f"seed: 1\ngraph_file: {tmp_path / 'broken.txt'}\n")
    assert main(["cutnorm", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    rec = _error(capsys)
    assert rec["error"] == "FormatError" and rec["line"] == 3
    big = np.zeros((40, 40))
    np.savetxt(tmp_path / "big.csv", big, delimiter=",")
    cfg = _write(tmp_path, "big.yaml", f"seed: 1\nmatrix: {tmp_path / 'big.csv'}\nmethod: exact\n")
    assert main(["cutnorm", "--config", cfg, "--out", str(tmp_path / "o")]) == 4
    assert _error(capsys)["exit_code"] == 4
    cfg = _write(tmp_path, "num.yaml", "seed: 1\ngraphon: {kind: constant, p: 1.0}\nK: 2\nT: 1.0\n"
                                       "dt: 0.5\ncoupling: {preset: kuramoto, K: 400.0}\n"
                                       "integrator: integrating_factor\n"
                                       "initial_law: {kind: von_mises, loc: 0.0, concentration: 1.0}\n")
    assert main(["fp-solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    rec = _error(capsys)
    assert rec["exit_code"] == 3 and rec["step"] >= 1


def test_cli_seed_override_and_console_script(tmp_path):
    cfg = _write(tmp_path, "g.yaml", "graph: {kind: erdos_renyi, n: 10, p: 0.5}\n")
    assert main(["graph-gen", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "9"]) == 0
    assert main(["graph-gen", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "9"]) == 0
    assert (tmp_path / "a" / "graph.txt").read_bytes() == (tmp_path / "b" / "graph.txt").read_bytes()
    proc = subprocess.run([sys.executable, "-m", "graphosc.cli.main", "graph-gen", "--config", cfg],
                          capture_output=True, text=True, cwd=tmp_path)
    assert proc.returncode == 2 and json.loads(proc.stderr)["error"] == "ConfigError"


def test_cli_experiment_is_byte_reproducible(tmp_path):
    cfg = _write(tmp_path, "e.yaml", "experiment: graph_convergence\nseed: 5\nparameters:\n"
                                     "  graphon: {kind: constant, p: 0.5}\n  n_list: [4, 6]\n"
                                     "  replicas: 3\n  mode: exact\n")
    outs = []
    for name, workers in (("a", "1"), ("b", "2")):
        assert main(["experiment", "graph_convergence", "--config", cfg, "--out", str(tmp_path / name),
                     "--workers", workers]) == 0
        outs.append((tmp_path / name / "results.csv").read_bytes())
    assert outs[0] == outs[1]
    assert main(["experiment", "lln", "--config", cfg, "--out", str(tmp_path / "c")]) == 2


def test_parse_yaml_source_in_message():
    with pytest.raises(ConfigError, match="here.yaml"):
        parse_yaml("a: [", source="here.yaml")
