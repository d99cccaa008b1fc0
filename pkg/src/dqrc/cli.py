"""Command-line surface: experiment runs, analysis sweeps and figure data.

Exit code 0 on success; on failure a machine-readable JSON error object is
printed to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqrc", description=__doc__)
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("run-task", help="run one benchmark task over the hyperparameter grid")
    _common_flags(p)
    p.set_defaults(func=cmd_run_task)

    p = sub.add_parser("sweep", help="run a task sweeping delay/order/sample count")
    _common_flags(p)
    p.set_defaults(func=cmd_run_task)  # the sweep block of the config drives the difference

    p = sub.add_parser("mixing-time", help="spectral mixing-time bound over the (h, gamma) grid")
    p.add_argument("--config", help="optional JSON config with n_values/h/gamma/realizations")
    p.add_argument("--n", type=int, nargs="+", default=[3, 4, 5], dest="n_values")
    p.add_argument("--realizations", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_mixing_time)

    p = sub.add_parser("esp-check", help="distance trace of two differently initialised runs")
    p.add_argument("--config", required=True, help="experiment JSON config (first grid cell is used)")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_esp_check)

    p = sub.add_parser("fn-approx", help="distance between erase-and-write and its strong-loss surrogate")
    p.add_argument("--n-qubits", type=int, default=3)
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--grid-min", type=float, default=0.1)
    p.add_argument("--grid-max", type=float, default=100.0)
    p.add_argument("--grid-points", type=int, default=13)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fn_approx)

    p = sub.add_parser("emit-plot", help="tidy per-figure CSV from result stores")
    p.add_argument("--figure", required=True)
    p.add_argument("--store", action="append", required=True, help="result directory (repeatable)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_emit_plot)

    return parser


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment JSON config")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--realizations", type=int, default=None, help="override the realization count")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")


def cmd_run_task(args) -> int:
    from .experiment import ExperimentConfig, run_task

    cfg = ExperimentConfig.from_json_file(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.realizations is not None:
        cfg.n_realizations = args.realizations
    store = run_task(cfg, workers=args.workers)
    store.save(args.out)
    n_err = sum(1 for row in store.cells if row.get("error"))
    print(f"wrote {len(store.cells)} rows ({n_err} failed cells) to {args.out}")
    return 0


def cmd_mixing_time(args) -> int:
    from .analysis import DEFAULT_MIXING_GAMMA, DEFAULT_MIXING_H, mixing_scaling_summary, mixing_time_sweep

    n_values = tuple(args.n_values)
    h_values, gamma_values = DEFAULT_MIXING_H, DEFAULT_MIXING_GAMMA
    realizations, seed = args.realizations, args.seed
    if args.config:
        with open(args.config) as fh:
            c = json.load(fh)
        n_values = tuple(c.get("n_values", n_values))
        h_values = tuple(c.get("h_values", h_values))
        gamma_values = tuple(c.get("gamma_values", gamma_values))
        realizations = c.get("n_realizations", realizations)
        seed = c.get("master_seed", seed)
    rows = mixing_time_sweep(
        n_values=n_values,
        h_values=h_values,
        gamma_values=gamma_values,
        n_realizations=realizations,
        master_seed=seed,
        workers=args.workers,
    )
    summary = mixing_scaling_summary(rows)
    os.makedirs(args.out, exist_ok=True)
    _write_csv(
        os.path.join(args.out, "mixing_time.csv"),
        ["n_qubits", "h", "gamma", "realization", "lambda1", "eta", "tau"],
        rows,
    )
    fig6 = [
        {
            "n_qubits": n,
            "tau_mix_max_mean": m,
            "tau_mix_std": s,
            "fit_slope": summary["fit_slope"],
        }
        for n, m, s in zip(summary["n_values"], summary["tau_max_mean"], summary["tau_max_std"])
    ]
    _write_csv(os.path.join(args.out, "fig6.csv"), ["n_qubits", "tau_mix_max_mean", "tau_mix_std", "fit_slope"], fig6)
    with open(os.path.join(args.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    print(
        "fit (bound in decay-time units): tau*gamma ~ "
        f"{summary['fit_slope']:.3f} * N + {summary['fit_intercept']:.3f} (R^2 = {summary['r_squared']:.3f})"
    )
    return 0


def cmd_esp_check(args) -> int:
    from .analysis import esp_trace
    from .dynamics import CDParams, FnParams, SpinNetworkParams, random_density_matrix
    from .experiment import ExperimentConfig, derive_seed

    cfg = ExperimentConfig.from_json_file(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    h, dt, gamma = cfg.cells[0]
    base = SpinNetworkParams.random(cfg.n_qubits, field_h=h, seed=derive_seed(cfg.master_seed, "couplings", 0))
    params = CDParams(base=base, gamma=gamma, dt_step=dt) if cfg.model == "cd" else FnParams(base=base, dt_step=dt)
    rng = np.random.default_rng(derive_seed(cfg.master_seed, "esp-states"))
    d = 2**cfg.n_qubits
    rho_a = random_density_matrix(d, rng)
    rho_b = random_density_matrix(d, rng)
    inputs = np.random.default_rng(derive_seed(cfg.master_seed, "input", 0)).uniform(0, 1, args.steps)
    trace = esp_trace(params, inputs, rho_a, rho_b)
    os.makedirs(args.out, exist_ok=True)
    _write_csv(
        os.path.join(args.out, "esp_trace.csv"),
        ["step", "distance"],
        [{"step": k + 1, "distance": float(v)} for k, v in enumerate(trace)],
    )
    print(f"distance after {args.steps} steps: {trace[-1]:.3e}")
    return 0


def cmd_fn_approx(args) -> int:
    from .analysis import fn_approx_distance_study

    grid = np.geomspace(args.grid_min, args.grid_max, args.grid_points)
    rows = fn_approx_distance_study(args.n_qubits, grid, n_pairs=args.pairs, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    _write_csv(os.path.join(args.out, "fn_approx.csv"), ["gamma_dt", "mean_distance", "std_distance"], rows)
    print(f"distance falls from {rows[0]['mean_distance']:.3e} to {rows[-1]['mean_distance']:.3e}")
    return 0


def cmd_emit_plot(args) -> int:
    from .experiment import ResultStore, emit_plot_data

    stores = [ResultStore.load(d) for d in args.store]
    cols, rows = emit_plot_data(stores, args.figure)
    _write_csv(args.out, cols, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k, "") for k in columns})


if __name__ == "__main__":
    sys.exit(main())
