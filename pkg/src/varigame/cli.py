"""Command-line experiment runner.

Subcommands: fixation, trajectory, theory, optimize, oracle, sweep,
reproduce.  Configuration is a JSON file with topology / games / process /
sim / sweep / output blocks; every subcommand writes CSV with a header row
and 17 significant digits per float.

Simulation modules are imported lazily so that the thread count requested
via --threads or VARIGAME_THREADS can be installed before any compiled
kernel is loaded.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import time
from typing import Optional

import numpy as np

from .games import (DilemmaGame, DurationDistribution, GameDistribution,
                    GameProcess, stationary_distribution)
from .optimizer import ObjectiveKind, grid_verify, optimal_policy_two_games
from .rng import derive_run_seed  # noqa: F401  (public seeding contract)
from .theory import (PairApproxParams, cooperation_over_defection,
                     favors_cooperation, integrate_trajectory, rho_a, rho_b,
                     rho_ratio, selection_gradient, solve_threshold)

FLOAT_FMT = "%.17g"


def _fmt(value) -> str:
    if isinstance(value, float):
        return FLOAT_FMT % value
    return str(value)


def write_csv(path, header, rows, deterministic: bool):
    lines = []
    if not deterministic:
        lines.append("# generated %s" % time.strftime("%Y-%m-%dT%H:%M:%S"))
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# configuration


def _build_graph(topo: dict):
    from . import network
    kind = topo.get("kind")
    if kind == "von_neumann":
        return network.lattice_von_neumann(int(topo["side"]))
    if kind == "moore":
        return network.lattice_moore(int(topo["side"]))
    if kind == "complete":
        return network.complete_graph(int(topo["n"]))
    if kind == "random_regular":
        return network.random_regular(int(topo["n"]), int(topo["k"]),
                                      int(topo.get("graph_seed", 0)))
    raise ConfigError("topology.kind", f"unknown topology {kind!r}")


class ConfigError(ValueError):
    def __init__(self, key_path: str, message: str):
        super().__init__(f"{key_path}: {message}")
        self.key_path = key_path


def _build_duration(spec: dict, where: str) -> DurationDistribution:
    kind = spec.get("kind")
    try:
        if kind == "exponential":
            return DurationDistribution.exponential(float(spec["rate"]))
        if kind == "uniform":
            return DurationDistribution.uniform(float(spec["lower"]),
                                                float(spec["upper"]))
        if kind == "deterministic":
            return DurationDistribution.deterministic(float(spec["duration"]))
        if kind == "empirical":
            return DurationDistribution.empirical(
                [(float(d), float(p)) for d, p in spec["table"]])
    except KeyError as exc:
        raise ConfigError(f"{where}.{exc.args[0]}", "missing key") from exc
    raise ConfigError(f"{where}.kind", f"unknown duration kind {kind!r}")


def load_config(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def build_experiment(cfg: dict):
    """Resolve a config dict into (graph, process, distribution, sim dict)."""
    if "games" not in cfg or not cfg["games"]:
        raise ConfigError("games", "at least one game required")
    games = []
    for i, g in enumerate(cfg["games"]):
        try:
            games.append(DilemmaGame(dg=float(g["dg"]), dr=float(g["dr"])))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"games.{i}", str(exc)) from exc

    proc_cfg = cfg.get("process", {})
    has_dur = "durations" in proc_cfg
    has_pi = "pi" in proc_cfg
    if has_dur and has_pi:
        raise ConfigError("process", "give durations or pi, not both")
    if has_dur:
        durs = [_build_duration(d, f"process.durations.{i}")
                for i, d in enumerate(proc_cfg["durations"])]
        if len(durs) != len(games):
            raise ConfigError("process.durations",
                              f"{len(durs)} durations for {len(games)} games")
        process = GameProcess(games, durs)
        dist = stationary_distribution(process)
    else:
        if has_pi:
            pi = np.asarray(proc_cfg["pi"], dtype=float)
            if pi.size != len(games):
                raise ConfigError("process.pi",
                                  f"{pi.size} weights for {len(games)} games")
            dist = GameDistribution(pi)
        else:
            dist = GameDistribution(np.full(len(games), 1.0 / len(games)))
        # synthesize durations proportional to pi so renewal mode matches
        durs = [DurationDistribution.deterministic(max(100.0 * float(p), 1e-9))
                for p in dist.pi]
        process = GameProcess(games, durs)

    graph = _build_graph(cfg.get("topology", {}))
    return graph, process, dist, cfg.get("sim", {})


def _sim_config(sim: dict, seed_override, default_mode="iid_stationary"):
    from .engine import SimConfig
    return SimConfig(
        omega=float(sim.get("omega", 0.01)),
        game_mode=sim.get("game_mode", default_mode),
        fixed_index=int(sim.get("fixed_index", 0)),
        dt_per_event=float(sim.get("dt_per_event", 1.0)),
        seed=int(seed_override if seed_override is not None
                 else sim.get("seed", 0)),
        max_events=int(sim.get("max_events", 10 ** 8)),
    )


def _resolve_path(cfg: dict, path: str):
    """Return (container, final key) for a dotted config path; shorthand
    dgN / drN addresses games[N-1]."""
    if len(path) >= 3 and path[:2] in ("dg", "dr") and path[2:].isdigit():
        idx = int(path[2:]) - 1
        if not 0 <= idx < len(cfg.get("games", [])):
            raise ConfigError(path, "game index out of range")
        return cfg["games"][idx], path[:2]
    node = cfg
    parts = path.split(".")
    for part in parts[:-1]:
        if isinstance(node, list):
            node = node[int(part)]
        elif part in node:
            node = node[part]
        else:
            raise ConfigError(path, f"no key {part!r}")
    leaf = parts[-1]
    container = node
    probe = container[int(leaf)] if isinstance(container, list) \
        else container.get(leaf)
    if not isinstance(probe, (int, float)) or isinstance(probe, bool):
        raise ConfigError(path, "sweep target is not a numeric leaf")
    return container, leaf


def _sweep_values(spec) -> np.ndarray:
    if isinstance(spec, str):
        lo, hi, steps = spec.split(":")
        return np.linspace(float(lo), float(hi), int(steps) + 1)
    return np.linspace(float(spec["from"]), float(spec["to"]),
                       int(spec["steps"]) + 1)


# ---------------------------------------------------------------------------
# subcommands


def cmd_fixation(args) -> int:
    from .engine import estimate_fixation
    from .games import Strategy
    cfg = load_config(args.config)
    graph, process, dist, sim = build_experiment(cfg)
    config = _sim_config(sim, args.seed)
    runs = args.runs or int(sim.get("runs", 10 ** 4))
    invader = Strategy.A if cfg.get("invader", "A") == "A" else Strategy.B
    res = estimate_fixation(graph, process, config, invader, runs)
    write_csv(args.out,
              ["invader", "runs", "fixations", "non_absorbed", "estimate",
               "stderr"],
              [[invader.name, res.runs, res.fixations, res.non_absorbed,
                res.estimate, res.stderr]],
              args.deterministic)
    return 0


def cmd_trajectory(args) -> int:
    from .engine import simulate_trajectory
    from .rng import RandomStream
    cfg = load_config(args.config)
    graph, process, dist, sim = build_experiment(cfg)
    out_cfg = cfg.get("output", {})
    horizon = int(sim.get("horizon_events", 10 ** 5))
    sample_every = int(out_cfg.get("sample_every", max(1, horizon // 200)))
    n_seeds = args.runs or int(sim.get("runs", 10))
    p0 = float(sim.get("initial_coop_fraction", 0.5))
    base_seed = args.seed if args.seed is not None else int(sim.get("seed", 0))
    rows = []
    averaged = {}
    for s in range(n_seeds):
        config = _sim_config(sim, derive_run_seed(base_seed, s),
                             default_mode="renewal")
        rec = simulate_trajectory(graph, process, config, p0, horizon,
                                  sample_every,
                                  rng=RandomStream(config.seed))
        for t, p in zip(rec.times, rec.coop_fraction):
            rows.append([s, int(t), float(p)])
            averaged.setdefault(int(t), []).append(float(p))
    for t in sorted(averaged):
        vals = averaged[t]
        rows.append(["mean", t, float(np.mean(vals))])
    write_csv(args.out, ["seed", "events", "coop_fraction"], rows,
              args.deterministic)
    if args.svg:
        _plot_series(args.svg, averaged, "events", "cooperator fraction")
    return 0


def _theory_rows(cfg: dict, sweep_path: str, values: np.ndarray):
    rows = []
    for v in values:
        patched = copy.deepcopy(cfg)
        container, leaf = _resolve_path(patched, sweep_path)
        if isinstance(container, list):
            container[int(leaf)] = float(v)
        else:
            container[leaf] = float(v)
        graph, process, dist, sim = build_experiment(patched)
        params = PairApproxParams(k=graph.degree, n_pop=graph.n_nodes,
                                  omega=float(sim.get("omega", 0.01)))
        games = process.games
        ra = rho_a(params, dist, games)
        rb = rho_b(params, dist, games)
        ratio = rho_ratio(params, dist, games)
        grad_half = selection_gradient(0.5, params, dist, games)
        c1, m1 = favors_cooperation(params, dist, games)
        c2, m2 = cooperation_over_defection(params, dist, games)
        try:
            thr = solve_threshold("thm1", sweep_path if sweep_path[:2] in
                                  ("dg", "dr") else "dg1", params, dist, games)
        except ValueError:
            thr = math.nan
        rows.append([float(v), ra, rb, ratio, grad_half, int(c1), m1,
                     int(c2), m2, thr])
    return rows


def cmd_theory(args) -> int:
    cfg = load_config(args.config)
    if args.sweep:
        path, spec = args.sweep
        values = _sweep_values(spec)
    else:
        sweep = cfg.get("sweep")
        if not sweep:
            raise ConfigError("sweep", "no sweep given (flag or config block)")
        path = sweep["path"]
        values = _sweep_values(sweep)
    rows = _theory_rows(cfg, path, values)
    write_csv(args.out,
              [path, "rho_a", "rho_b", "rho_ratio", "gradient_at_half",
               "thm1_holds", "thm1_margin", "thm2_holds", "thm2_margin",
               "thm1_threshold"],
              rows, args.deterministic)
    if args.svg:
        series = {"rho_a": [(r[0], r[1]) for r in rows]}
        _plot_xy(args.svg, series, path, "value")
    return 0


def cmd_optimize(args) -> int:
    cfg = load_config(args.config)
    games = [DilemmaGame(dg=float(g["dg"]), dr=float(g["dr"]))
             for g in cfg["games"]]
    k = int(cfg.get("topology", {}).get("k", cfg.get("k", 4)))
    objective = ObjectiveKind(cfg.get("objective", "max_gradient"))
    policy = optimal_policy_two_games(objective, games, k)
    rows = []
    for (lo, hi), dist in policy.segments:
        rows.append([lo, hi] + [float(p) for p in dist.pi])
    write_csv(args.out, ["p_lo", "p_hi", "pi_1", "pi_2"], rows,
              args.deterministic)
    print(f"objective: {objective.value}")
    print(f"degenerate: {policy.degenerate}")
    print(f"breakpoints: {[FLOAT_FMT % b for b in policy.breakpoints]}")
    for (lo, hi), dist in policy.segments:
        print(f"  p in ({FLOAT_FMT % lo}, {FLOAT_FMT % hi}): "
              f"pi = {tuple(float(p) for p in dist.pi)}")
    if args.verify:
        report = grid_verify(objective, games, k,
                             int(cfg.get("grid_resolution", 200)))
        print(f"verify: violations={report.violations} "
              f"worst_gap={FLOAT_FMT % report.worst_gap} "
              f"empirical_switch={report.empirical_switch}")
        return 0 if report.violations == 0 else 1
    return 0


def cmd_oracle(args) -> int:
    from .games import effective_game
    from .oracle import exact_fixation
    cfg = load_config(args.config)
    graph, process, dist, sim = build_experiment(cfg)
    if graph.n_nodes > 20:
        raise ConfigError("topology", "oracle limited to 20 nodes")
    game = effective_game(dist, process.games)
    omega = float(sim.get("omega", 0.01))
    res = exact_fixation(graph, game, omega)
    rows = [["mean", res.fixation_prob, res.solver_residual]]
    if args.per_start:
        for i, v in enumerate(res.per_start):
            rows.append([f"start_{i}", float(v), res.solver_residual])
    write_csv(args.out, ["start", "fixation_prob", "residual"], rows,
              args.deterministic)
    return 0


def cmd_sweep(args) -> int:
    from .engine import estimate_fixation
    from .games import Strategy
    cfg = load_config(args.config)
    sweep = cfg.get("sweep")
    if not sweep:
        raise ConfigError("sweep", "sweep block required")
    path = sweep["path"]
    values = _sweep_values(sweep)
    runs = args.runs or int(cfg.get("sim", {}).get("runs", 10 ** 4))
    rows = []
    for gi, v in enumerate(values):
        patched = copy.deepcopy(cfg)
        container, leaf = _resolve_path(patched, path)
        if isinstance(container, list):
            container[int(leaf)] = float(v)
        else:
            container[leaf] = float(v)
        graph, process, dist, sim = build_experiment(patched)
        base = args.seed if args.seed is not None else int(sim.get("seed", 0))
        config = _sim_config(sim, derive_run_seed(base, gi))
        res = estimate_fixation(graph, process, config, Strategy.A, runs)
        params = PairApproxParams(k=graph.degree, n_pop=graph.n_nodes,
                                  omega=config.omega)
        rows.append([float(v), res.estimate, res.stderr,
                     rho_a(params, dist, process.games), res.non_absorbed])
    write_csv(args.out, [path, "rho_a_est", "stderr", "rho_a_theory",
                         "non_absorbed"], rows, args.deterministic)
    return 0


# ---------------------------------------------------------------------------
# reproduction recipes


def _recipe_base(side: int, kind: str) -> dict:
    return {
        "topology": {"kind": kind, "side": side},
        "games": [{"dg": 0.0, "dr": 0.0}, {"dg": 0.0, "dr": 0.0}],
        "process": {"pi": [0.5, 0.5]},
        "sim": {"omega": 0.01, "game_mode": "iid_stationary", "seed": 0},
    }


def _reproduce_fixation_sweep(args, dg1_values, pi1_values, dr1, runs):
    from .engine import estimate_fixation
    from .games import Strategy
    rows = []
    job = 0
    for kind, side in (("von_neumann", 10), ("moore", 10)):
        for pi1 in pi1_values:
            for dg1 in dg1_values:
                cfg = _recipe_base(side, kind)
                cfg["games"][0] = {"dg": float(dg1), "dr": dr1}
                cfg["process"] = {"pi": [pi1, 1.0 - pi1]}
                graph, process, dist, sim = build_experiment(cfg)
                base = args.seed if args.seed is not None else 0
                config = _sim_config(sim, derive_run_seed(base, job))
                job += 1
                res = estimate_fixation(graph, process, config, Strategy.A,
                                        runs)
                params = PairApproxParams(k=graph.degree,
                                          n_pop=graph.n_nodes,
                                          omega=config.omega)
                try:
                    thr = solve_threshold("thm1", "dg1", params, dist,
                                          process.games)
                except ValueError:
                    thr = math.nan
                rows.append([graph.degree, float(pi1), float(dg1),
                             res.estimate, res.stderr,
                             rho_a(params, dist, process.games), thr])
    return rows


def cmd_reproduce(args) -> int:
    runs = args.runs or 10 ** 5
    target = args.figure
    if target == "fig1":
        rows = _reproduce_fixation_sweep(
            args, dg1_values=np.linspace(0.0, 1.0, 11),
            pi1_values=(0.0, 0.5, 1.0), dr1=0.2, runs=runs)
        write_csv(args.out, ["k", "pi1", "dg1", "rho_c_est", "stderr",
                             "rho_c_theory", "thm1_threshold"], rows,
                  args.deterministic)
        return 0
    if target == "fig2":
        from .engine import estimate_fixation
        from .games import Strategy
        rows = []
        job = 0
        for kind, side in (("von_neumann", 10), ("moore", 10)):
            for dg1 in np.linspace(0.0, 1.0, 11):
                cfg = _recipe_base(side, kind)
                cfg["games"][0] = {"dg": float(dg1), "dr": 0.2}
                graph, process, dist, sim = build_experiment(cfg)
                base = args.seed if args.seed is not None else 0
                params = PairApproxParams(k=graph.degree,
                                          n_pop=graph.n_nodes, omega=0.01)
                ests = {}
                for inv in (Strategy.A, Strategy.B):
                    config = _sim_config(sim, derive_run_seed(base, job))
                    job += 1
                    ests[inv] = estimate_fixation(graph, process, config,
                                                  inv, runs)
                rows.append([graph.degree, float(dg1),
                             ests[Strategy.A].estimate,
                             ests[Strategy.B].estimate,
                             rho_a(params, dist, process.games),
                             rho_b(params, dist, process.games),
                             rho_ratio(params, dist, process.games)])
        write_csv(args.out, ["k", "dg1", "rho_c_est", "rho_d_est",
                             "rho_c_theory", "rho_d_theory",
                             "rho_ratio_theory"], rows, args.deterministic)
        return 0
    if target == "fig3":
        from .engine import simulate_trajectory
        from .rng import RandomStream
        cfg = {
            "topology": {"kind": "von_neumann", "side": 10},
            "games": [{"dg": 0.5, "dr": 0.3}, {"dg": 0.1, "dr": 0.3}],
            "process": {"durations": [
                {"kind": "exponential", "rate": 0.02},
                {"kind": "uniform", "lower": 50, "upper": 150}]},
            "sim": {"omega": 0.02, "game_mode": "renewal",
                    "dt_per_event": 1.0},
        }
        graph, process, dist, sim = build_experiment(cfg)
        horizon = 2 * 10 ** 5
        n_seeds = max(1, runs // 10 ** 4)
        rows = []
        base = args.seed if args.seed is not None else 0
        for s in range(n_seeds):
            config = _sim_config(sim, derive_run_seed(base, s),
                                 default_mode="renewal")
            rec = simulate_trajectory(graph, process, config, 0.5, horizon,
                                      horizon // 100,
                                      rng=RandomStream(config.seed))
            for t, p, qaa, qab in zip(rec.times, rec.coop_fraction,
                                      rec.q_a_given_a, rec.q_a_given_b):
                rows.append([s, int(t), float(p), float(qaa), float(qab)])
        write_csv(args.out, ["seed", "events", "coop_fraction",
                             "q_a_given_a", "q_a_given_b"], rows,
                  args.deterministic)
        return 0
    if target in ("fig4", "smfig1"):
        families = {
            "fig4": ((0.2, 0.0), (-0.3, 0.0)),
            "smfig1": ((-0.2, 0.0), (0.0, 0.3)),
        }[target]
        objective = ObjectiveKind.MAX_GRADIENT
    elif target in ("fig5", "smfig2"):
        families = {
            "fig5": ((0.0, 0.2), (0.5, 0.1)),
            "smfig2": ((0.3, 0.0), (0.4, 0.0)),
        }[target]
        objective = ObjectiveKind.MIN_FITNESS_DIFF
    else:
        raise ConfigError("figure", f"unknown reproduce target {target!r}")

    (dr1, dr2), (dg1, dg2) = families
    games = [DilemmaGame(dg=dg1, dr=dr1), DilemmaGame(dg=dg2, dr=dr2)]
    k = 4
    params = PairApproxParams(k=k, n_pop=100, omega=0.02)
    policy = optimal_policy_two_games(objective, games, k)
    t_end = 5.0 / (params.omega * 0.02)
    rows = []
    candidates = {"optimal": policy,
                  "vertex_1": GameDistribution(np.array([1.0, 0.0])),
                  "vertex_2": GameDistribution(np.array([0.0, 1.0])),
                  "even_mix": GameDistribution(np.array([0.5, 0.5]))}
    for name, pol in candidates.items():
        rec = integrate_trajectory(0.5, params, pol, games, t_end,
                                   step=1.0, sample_every=200)
        for t, p in zip(rec.times, rec.coop_fraction):
            rows.append([name, float(t), float(p)])
    write_csv(args.out, ["policy", "time", "coop_fraction"], rows,
              args.deterministic)
    return 0


# ---------------------------------------------------------------------------
# optional plotting (convenience only)


def _plot_xy(path, series, xlabel, ylabel):
    try:
        import matplotlib
        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("plotting requested but matplotlib is unavailable",
              file=sys.stderr)
        return
    fig, ax = plt.subplots()
    for name, pts in series.items():
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.plot(xs, ys, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.savefig(path)
    plt.close(fig)


def _plot_series(path, averaged, xlabel, ylabel):
    pts = [(t, float(np.mean(v))) for t, v in sorted(averaged.items())]
    _plot_xy(path, {"mean": pts}, xlabel, ylabel)


# ---------------------------------------------------------------------------
# entry point


def _install_threads(threads: Optional[int]):
    if threads is None:
        env = os.environ.get("VARIGAME_THREADS")
        threads = int(env) if env else None
    if threads is None:
        return
    if threads < 1:
        raise ValueError("thread count must be positive")
    # must land in the environment before any compiled kernel is imported
    os.environ["NUMBA_NUM_THREADS"] = str(threads)
    import numba
    numba.set_num_threads(threads)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="varigame",
        description="Evolutionary dynamics with time-varying games on "
                    "regular networks")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--runs", type=int, default=None)
        p.add_argument("--deterministic", action="store_true")
        p.add_argument("--svg", default=None)

    for name, fn in (("fixation", cmd_fixation),
                     ("trajectory", cmd_trajectory),
                     ("sweep", cmd_sweep)):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("theory")
    common(p)
    p.add_argument("--sweep", nargs=2, metavar=("PATH", "FROM:TO:STEPS"),
                   default=None)
    p.set_defaults(fn=cmd_theory)

    p = sub.add_parser("optimize")
    common(p)
    p.add_argument("--verify", action="store_true")
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("oracle")
    common(p)
    p.add_argument("--per-start", action="store_true")
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("reproduce")
    p.add_argument("figure", choices=["fig1", "fig2", "fig3", "fig4", "fig5",
                                      "smfig1", "smfig2"])
    common(p, config_required=False)
    p.set_defaults(fn=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _install_threads(args.threads)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
