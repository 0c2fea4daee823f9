"""``graphosc`` command-line interface.

Every subcommand reads a YAML config (``--config``), writes its outputs
into ``--out`` and accepts ``--seed`` to override the config's seed.
Exit codes: 0 success, 2 config/format error, 3 numerical error,
4 size-cap error.  Failures print a one-line JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from .. import __version__
from ..dynamics import SimConfig, simulate_annealed, simulate_particle_system, write_ensemble, \
    write_ensemble_csv
from ..errors import ConfigError, GraphoscError
from ..fokker_planck import average_field, order_parameter, solve_labeled_fp, write_field, \
    write_order_parameter_csv
from ..graphon import Graphon, cut_distance_step, cut_norm_exact, cut_norm_heuristic, \
    inf_to_one_norm, read_graph, write_edge_list, EXACT_CUT_CAP
from ..graphs import GraphSpec, degree_stats, generate
from ..model import CouplingSpec, InitialLaw
from .config import EXPERIMENTS, ExperimentConfig, check_seed, config_hash, load_yaml
from .experiments import run_experiment
from .results import ResultTable

COMMANDS = ("graph-gen", "cutnorm", "cutdist", "simulate", "fp-solve", "experiment")


def _versions() -> dict:
    import scipy
    import yaml

    return {"graphosc": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "pyyaml": yaml.__version__, "python": platform.python_version()}


def _load(args) -> dict:
    data = load_yaml(args.config)
    if args.seed is not None:
        data["seed"] = args.seed
    if "seed" not in data:
        raise ConfigError("config must set 'seed' (or pass --seed)")
    check_seed(data["seed"])
    return data


def _require(data: dict, key: str):
    if key not in data:
        raise ConfigError(f"config is missing required key {key!r}")
    return data[key]


def _load_matrix(data: dict) -> np.ndarray:
    if "graph_file" in data:
        return read_graph(data["graph_file"]).adj
    if "matrix" in data:
        path = data["matrix"]
        try:
            return np.loadtxt(path, delimiter=",", ndmin=2)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read matrix {path}: {exc}") from None
    raise ConfigError("config needs 'matrix' (dense CSV) or 'graph_file'")


def _graphon_or_graph(spec) -> object:
    if isinstance(spec, dict) and "graph_file" in spec:
        return read_graph(spec["graph_file"])
    return Graphon.from_config(spec)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_graph_gen(data: dict, out: Path) -> ResultTable:
    spec = GraphSpec.from_config(_require(data, "graph"), seed=data["seed"])
    g = generate(spec)
    write_edge_list(g, out / "graph.txt")
    density, deg = degree_stats(g)
    table = ResultTable("graph-gen")
    params = {"kind": spec.kind, "n": g.n}
    table.add(params, "edge_density", density)
    table.add(params, "mean_degree", float(np.mean(deg)))
    table.add(params, "max_degree", float(np.max(deg)))
    return table


def cmd_cutnorm(data: dict, out: Path) -> ResultTable:
    a = _load_matrix(data)
    method = data.get("method", "auto")
    restarts = int(data.get("restarts", 50))
    table = ResultTable("cutnorm")
    n = a.shape[0]
    if method == "exact" or (method == "auto" and n <= EXACT_CUT_CAP):
        table.add({"n": n, "method": "exact"}, "cut_norm", cut_norm_exact(a))
        table.add({"n": n, "method": "exact"}, "inf_to_one_norm",
                  inf_to_one_norm(a, method="exact")[0])
    elif method in ("auto", "heuristic"):
        table.add({"n": n, "method": "heuristic"}, "cut_norm",
                  cut_norm_heuristic(a, restarts=restarts, seed=data["seed"])[0])
        table.add({"n": n, "method": "heuristic"}, "inf_to_one_norm",
                  inf_to_one_norm(a, restarts=restarts, seed=data["seed"], method="heuristic")[0])
    else:
        raise ConfigError(f"unknown cut norm method {method!r}")
    return table


def cmd_cutdist(data: dict, out: Path) -> ResultTable:
    u = _graphon_or_graph(_require(data, "u"))
    v = _graphon_or_graph(_require(data, "v"))
    mode = data.get("mode", "exact")
    res = cut_distance_step(u, v, mode=mode, seed=data["seed"], restarts=int(data.get("restarts", 20)))
    table = ResultTable("cutdist")
    params = {"mode": res.mode, "blocks": res.blocks, "resampled": res.resampled}
    table.add(params, "cut_distance", res.value)
    table.add(params, "slack", res.slack)
    (out / "permutation.json").write_text(json.dumps(list(res.permutation)) + "\n")
    return table


def cmd_simulate(data: dict, out: Path) -> ResultTable:
    seed = data["seed"]
    n = int(_require(data, "n"))
    system = data.get("system", "particle")
    graph = None
    if system == "particle":
        gspec = dict(_require(data, "graph"))
        gspec.setdefault("n", n)
        graph = GraphSpec.from_config(gspec)
    elif system != "annealed":
        raise ConfigError(f"system must be 'particle' or 'annealed', got {system!r}")
    try:
        cfg = SimConfig(n=n, T=float(data.get("T", 1.0)), dt=float(data.get("dt", 1e-2)), seed=seed,
                        initial_law=InitialLaw.from_config(data.get("initial_law")),
                        coupling=CouplingSpec.from_config(data.get("coupling", {"preset": "kuramoto",
                                                                                "K": 1.0})),
                        graph=graph, zero_noise=bool(data.get("zero_noise", False)),
                        interaction=data.get("interaction", "auto"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, GraphoscError):
            raise
        raise ConfigError(f"bad simulation config: {exc}") from None
    if system == "particle":
        ens = simulate_particle_system(cfg)
    else:
        ens = simulate_annealed(cfg, float(_require(data, "p")))
    fmt = data.get("format", "binary")
    if fmt == "binary":
        write_ensemble(ens, out / "ensemble.bin")
    elif fmt == "csv":
        write_ensemble_csv(ens, out / "ensemble.csv")
    else:
        raise ConfigError(f"format must be 'binary' or 'csv', got {fmt!r}")
    table = ResultTable("simulate")
    r = float(abs(np.mean(np.exp(1j * ens.angles[:, -1]))))
    table.add({"system": system, "n": n, "T": cfg.T}, "order_parameter_terminal", r)
    return table


def cmd_fp_solve(data: dict, out: Path) -> ResultTable:
    w = Graphon.from_config(_require(data, "graphon"))
    field = solve_labeled_fp(
        w, CouplingSpec.from_config(data.get("coupling", {"preset": "kuramoto", "K": 1.0})),
        InitialLaw.from_config(data.get("initial_law")), int(data.get("M", 1)),
        int(data.get("K", 32)), float(data.get("T", 1.0)), float(data.get("dt", 1e-3)),
        integrator=data.get("integrator", "etd"), save_every=int(data.get("save_every", 1)))
    write_field(field, out / "field.bin")
    write_order_parameter_csv(field, out / "order_parameter.csv")
    table = ResultTable("fp-solve")
    table.add({"M": field.M, "K": field.K, "T": float(field.time_grid[-1])},
              "order_parameter_terminal", order_parameter(average_field(field)[-1]))
    return table


def cmd_experiment(data: dict, out: Path, name: str, workers: int) -> ResultTable:
    data = dict(data)
    data.setdefault("experiment", name)
    if data["experiment"] != name:
        raise ConfigError(f"config is for experiment {data['experiment']!r}, not {name!r}")
    data.pop("output", None)
    cfg = ExperimentConfig.from_dict(data)
    return run_experiment(cfg, workers=workers)


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphosc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"graphosc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    for name, help_ in (("graph-gen", "generate a random graph"),
                        ("cutnorm", "cut norm and infinity-to-one norm of a matrix"),
                        ("cutdist", "cut distance between step graphons"),
                        ("simulate", "simulate the particle or annealed system"),
                        ("fp-solve", "solve the labelled Fokker-Planck system")):
        common(sub.add_parser(name, help=help_))
    exp = sub.add_parser("experiment", help="run an experiment")
    exp.add_argument("name", choices=EXPERIMENTS)
    common(exp)
    exp.add_argument("--workers", type=int, default=1, help="parallel replica workers")
    return parser


def _error_record(exc: BaseException, code: int) -> str:
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("path", "line", "step"):
        val = getattr(exc, attr, None)
        if val is not None:
            rec[attr] = str(val) if attr == "path" else val
    return json.dumps(rec)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        data = _load(args)
        out = Path(args.out or data.get("output") or f"out/{args.command}")
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "experiment":
            table = cmd_experiment(data, out, args.name, args.workers)
        else:
            handler = {"graph-gen": cmd_graph_gen, "cutnorm": cmd_cutnorm, "cutdist": cmd_cutdist,
                       "simulate": cmd_simulate, "fp-solve": cmd_fp_solve}[args.command]
            table = handler(data, out)
        table.write(out / "results.csv")
        meta = {
            "command": args.command if args.command != "experiment" else f"experiment {args.name}",
            "config": str(args.config),
            "config_hash": config_hash(data),
            "seed": data["seed"],
            "versions": _versions(),
            "wall_time_s": time.perf_counter() - start,
        }
        (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except GraphoscError as exc:
        print(_error_record(exc, exc.exit_code), file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # unexpected; still leave a machine-readable trace
        print(_error_record(exc, 1), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
