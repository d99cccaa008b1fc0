"""Experiment orchestration: hyperparameter grids, deterministic seeding,
per-cell metric tables and tidy result persistence.

Within one grid cell all realizations are integrated as a single lockstep
batch; sweep values (delay, NARMA order, sample count) and sampling noise
reuse the same feature trajectories, so a sweep costs one reservoir run per
cell.  Couplings and input sequences are seeded per realization and shared
across cells and across the two models, which makes model comparisons paired.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .dynamics import CDParams, FnParams, SpinNetworkParams
from .engine import (
    MultiplexConfig,
    SamplingConfig,
    SegmentLengths,
    add_bias,
    apply_sampling_noise,
    make_engine,
    pauli_observables,
    run_features,
)
from .readout import LinearReadout, capacity, mse
from .tasks import TaskSpec, autonomous_rollout, narma_targets, parity_targets, stm_targets

SCHEMA_VERSION = 1

DEFAULT_GRID = (0.01, 0.1, 1.0, 10.0)


def derive_seed(master: int, *labels) -> int:
    """Deterministic, collision-resistant child seed.

    SHA-256 over the master seed and the label tuple rendered as text,
    truncated to 63 bits; any implementation of this recipe reproduces the
    same integer streams.
    """
    text = "dqrc-seed|" + "|".join([str(master)] + [repr(l) for l in labels])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass
class ExperimentConfig:
    """Full specification of a grid-search benchmark run."""

    model: str  # "cd" | "fn"
    n_qubits: int
    task: TaskSpec
    grid_h: tuple[float, ...] = DEFAULT_GRID
    grid_dt: tuple[float, ...] = DEFAULT_GRID
    grid_gamma: tuple[float, ...] = DEFAULT_GRID  # ignored by the FN model
    lengths: SegmentLengths = field(default_factory=SegmentLengths)
    mux: MultiplexConfig = field(default_factory=MultiplexConfig)
    n_samples: float | None = None
    n_realizations: int = 100
    master_seed: int = 0
    rcond: float = 1e-10
    sweep_param: str | None = None  # "delay" | "order" | "n_samples"
    sweep_values: tuple = ()

    def __post_init__(self) -> None:
        if self.model not in ("cd", "fn"):
            raise ValueError(f"model must be 'cd' or 'fn', got {self.model!r}")
        for g in (self.grid_h, self.grid_dt, self.grid_gamma):
            if any(v <= 0 for v in g):
                raise ValueError("grid values must be positive")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")
        if self.sweep_param not in (None, "delay", "order", "n_samples"):
            raise ValueError(f"unsupported sweep parameter {self.sweep_param!r}")
        if self.sweep_param and not self.sweep_values:
            raise ValueError("sweep_values must be non-empty when sweeping")

    @property
    def cells(self) -> list[tuple[float, float, float]]:
        """Grid cells as (h, dt, gamma); gamma is fixed to 0 for the FN model."""
        if self.model == "fn":
            return [(h, dt, 0.0) for h in self.grid_h for dt in self.grid_dt]
        return [(h, dt, g) for h in self.grid_h for dt in self.grid_dt for g in self.grid_gamma]

    @property
    def metric_kind(self) -> str:
        return "mse" if self.task.kind == "mackey_glass" else "capacity"

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "model": self.model,
            "n_qubits": self.n_qubits,
            "task": {
                "kind": self.task.kind,
                "delay": self.task.delay,
                "order": self.task.order,
                "forecast_steps": self.task.forecast_steps,
                "mg": asdict(self.task.mg),
            },
            "grid": {"h": list(self.grid_h), "dt": list(self.grid_dt), "gamma": list(self.grid_gamma)},
            "lengths": asdict(self.lengths),
            "multiplex": asdict(self.mux),
            "sampling": {"n_samples": self.n_samples},
            "n_realizations": self.n_realizations,
            "master_seed": self.master_seed,
            "rcond": self.rcond,
            "sweep": {"param": self.sweep_param, "values": list(self.sweep_values)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        from .tasks import MGConfig

        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema version {version}")
        t = dict(d.get("task", {}))
        mg = MGConfig(**t["mg"]) if "mg" in t else MGConfig()
        task = TaskSpec(
            kind=t.get("kind", "stm"),
            delay=t.get("delay", 1),
            order=t.get("order", 2),
            mg=mg,
            forecast_steps=t.get("forecast_steps", 150),
        )
        grid = d.get("grid", {})
        sweep = d.get("sweep", {}) or {}
        return cls(
            model=d["model"],
            n_qubits=d["n_qubits"],
            task=task,
            grid_h=tuple(grid.get("h", DEFAULT_GRID)),
            grid_dt=tuple(grid.get("dt", DEFAULT_GRID)),
            grid_gamma=tuple(grid.get("gamma", DEFAULT_GRID)),
            lengths=SegmentLengths(**d.get("lengths", {})),
            mux=MultiplexConfig(**d.get("multiplex", {})),
            n_samples=d.get("sampling", {}).get("n_samples"),
            n_realizations=d.get("n_realizations", 100),
            master_seed=d.get("master_seed", 0),
            rcond=d.get("rcond", 1e-10),
            sweep_param=sweep.get("param"),
            sweep_values=tuple(sweep.get("values", ())),
        )

    @classmethod
    def from_json_file(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def realization_seeds(cfg: ExperimentConfig, r: int) -> dict:
    """Input and coupling seeds, shared across grid cells and both models."""
    return {
        "input": derive_seed(cfg.master_seed, "input", r),
        "couplings": derive_seed(cfg.master_seed, "couplings", r),
    }


# ---------------------------------------------------------------------------
# single-cell execution
# ---------------------------------------------------------------------------


def _sweep_targets(cfg: ExperimentConfig, s: np.ndarray, v):
    if cfg.sweep_param == "delay" and cfg.task.kind == "stm":
        return stm_targets(s, int(v))
    if cfg.sweep_param == "delay" and cfg.task.kind == "parity":
        return parity_targets(s, int(v))
    if cfg.sweep_param == "order" and cfg.task.kind == "narma":
        return narma_targets(s, int(v))
    raise ValueError(f"sweep {cfg.sweep_param!r} does not apply to task {cfg.task.kind!r}")


def run_cell(cfg: ExperimentConfig, cell: tuple[float, float, float]) -> list[dict]:
    """All realizations and sweep values of one grid cell."""
    h, dt, gamma = cell
    L = cfg.lengths
    T = L.total
    sweep_values = cfg.sweep_values if cfg.sweep_param else (None,)
    forecasting = cfg.task.kind == "mackey_glass"

    inputs = np.empty((T, cfg.n_realizations))
    base_targets, continuations, seed_rows = [], [], []
    for r in range(cfg.n_realizations):
        seeds = realization_seeds(cfg, r)
        s, tgt, cont = cfg.task.build(T, seeds["input"])
        inputs[:, r] = s
        base_targets.append(tgt)
        continuations.append(cont)
        seed_rows.append(seeds)

    def build_params(copy: int) -> list:
        out = []
        for r in range(cfg.n_realizations):
            label = seed_rows[r]["couplings"] if copy == 0 else derive_seed(cfg.master_seed, "couplings", r, "copy", copy)
            base = SpinNetworkParams.random(cfg.n_qubits, field_h=h, seed=label)
            if cfg.model == "cd":
                out.append(CDParams(base=base, gamma=gamma, dt_step=dt))
            else:
                out.append(FnParams(base=base, dt_step=dt))
        return out

    if forecasting and cfg.mux.spatial_copies > 1:
        raise ValueError("closed-loop forecasting with spatial copies is not supported")

    obs = pauli_observables(cfg.n_qubits)
    n_wt = L.washout + L.train
    # spatial copies run independently on the same inputs; their feature
    # blocks concatenate (the first copy's engine drives any forecast phase)
    blocks, engine, rho_train = [], None, None
    for copy in range(cfg.mux.spatial_copies):
        eng = make_engine(build_params(copy), obs, cfg.mux.virtual_nodes)
        feats_wt, rho_t = run_features(eng, obs, inputs[:n_wt])
        feats_te, _ = run_features(eng, obs, inputs[n_wt:], rho0=rho_t.copy())
        blocks.append(np.concatenate([feats_wt, feats_te], axis=1))
        if copy == 0:
            engine, rho_train = eng, rho_t
    feats = np.concatenate(blocks, axis=2)

    rows = []
    for v in sweep_values:
        n_samples = float(v) if cfg.sweep_param == "n_samples" and v is not None else cfg.n_samples
        # zero weights keep a failed realization inert during the rollout
        weights = np.zeros((cfg.n_realizations, feats.shape[2] + 1))
        first_preds = np.zeros(cfg.n_realizations)
        for r in range(cfg.n_realizations):
            X = add_bias(feats[r])
            if n_samples is not None:
                noise_seed = derive_seed(cfg.master_seed, "noise", r, cfg.model, cell, n_samples)
                X = apply_sampling_noise(X, SamplingConfig(n_samples=n_samples, noise_seed=noise_seed))
            tgt = base_targets[r] if (v is None or cfg.sweep_param == "n_samples") else _sweep_targets(cfg, inputs[:, r], v)
            row = {
                "model": cfg.model,
                "n_qubits": cfg.n_qubits,
                "h": h,
                "dt": dt,
                "gamma": gamma,
                "sweep_param": cfg.sweep_param or "",
                "sweep_value": "" if v is None else v,
                "realization": r,
                "input_seed": seed_rows[r]["input"],
                "coupling_seed": seed_rows[r]["couplings"],
                "metric_kind": cfg.metric_kind,
            }
            try:
                rows_train = np.arange(L.washout, n_wt)
                rows_train = rows_train[tgt.valid[rows_train]]
                rows_test = np.arange(n_wt, T)
                rows_test = rows_test[tgt.valid[rows_test]]
                model = LinearReadout(rcond=cfg.rcond).fit(X[rows_train], tgt.values[rows_train])
                if forecasting:
                    weights[r] = model.weights_
                    first_preds[r] = float(model.predict(X[n_wt - 1 : n_wt])[0])
                    row["onestep_test_mse"] = mse(tgt.values[rows_test], model.predict(X[rows_test]))
                else:
                    row["value"] = capacity(tgt.values[rows_test], model.predict(X[rows_test]))
            except Exception as exc:  # cell failures are recorded, the run continues
                row["value"] = float("nan")
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)

        if forecasting:
            preds, n_clamped, _ = autonomous_rollout(
                engine, obs, weights, rho_train.copy(), first_preds, cfg.task.forecast_steps
            )
            for r in range(cfg.n_realizations):
                # prediction k forecasts the series value at index n_wt + k;
                # the generated inputs plus the continuation cover that range
                full = np.concatenate([inputs[:, r], continuations[r]])
                truth = full[n_wt : n_wt + cfg.task.forecast_steps]
                idx = len(rows) - cfg.n_realizations + r
                if "error" not in rows[idx]:
                    rows[idx]["value"] = mse(truth, preds[:, r])
                    rows[idx]["n_clamped"] = n_clamped
    return rows


# ---------------------------------------------------------------------------
# result store
# ---------------------------------------------------------------------------


CELL_COLUMNS = [
    "model",
    "n_qubits",
    "h",
    "dt",
    "gamma",
    "sweep_param",
    "sweep_value",
    "realization",
    "input_seed",
    "coupling_seed",
    "metric_kind",
    "value",
    "n_clamped",
    "onestep_test_mse",
    "error",
]


@dataclass
class ResultStore:
    manifest: dict
    cells: list[dict]
    summary: list[dict]

    def save(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(self.manifest, fh, indent=2, sort_keys=True)
        _write_csv(os.path.join(out_dir, "cells.csv"), CELL_COLUMNS, self.cells)
        if self.summary:
            _write_csv(os.path.join(out_dir, "summary.csv"), list(self.summary[0].keys()), self.summary)

    @classmethod
    def load(cls, out_dir: str) -> "ResultStore":
        with open(os.path.join(out_dir, "manifest.json")) as fh:
            manifest = json.load(fh)
        cells = _read_csv(os.path.join(out_dir, "cells.csv"))
        summary_path = os.path.join(out_dir, "summary.csv")
        summary = _read_csv(summary_path) if os.path.exists(summary_path) else []
        return cls(manifest=manifest, cells=cells, summary=summary)


def _write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k, "")) for k in columns})


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _read_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh)]


def summarize(cfg: ExperimentConfig, rows: list[dict]) -> list[dict]:
    """Per-(sweep value, cell) mean and std, with the optimal cell flagged.

    Optimality is the argmax of the mean capacity (argmin of the mean MSE);
    ties break to the lexicographically smallest (h, dt, gamma).
    """
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        if row.get("error") or row.get("value") is None:
            continue
        key = (row["sweep_value"], row["h"], row["dt"], row["gamma"])
        groups.setdefault(key, []).append(float(row["value"]))
    maximize = cfg.metric_kind == "capacity"
    out = []
    best: dict = {}
    for key in sorted(groups, key=lambda k: (str(k[0]), k[1], k[2], k[3])):
        sweep_value, h, dt, gamma = key
        vals = groups[key]
        mean = float(np.mean(vals))
        entry = {
            "model": cfg.model,
            "n_qubits": cfg.n_qubits,
            "sweep_param": cfg.sweep_param or "",
            "sweep_value": sweep_value,
            "h": h,
            "dt": dt,
            "gamma": gamma,
            "mean": mean,
            "std": float(np.std(vals)),
            "n_points": len(vals),
            "optimal": 0,
        }
        out.append(entry)
        cur = best.get(sweep_value)
        if cur is None or (mean > cur["mean"] if maximize else mean < cur["mean"]):
            best[sweep_value] = entry
    for entry in best.values():
        entry["optimal"] = 1
    return out


def run_task(cfg: ExperimentConfig, workers: int = 1) -> ResultStore:
    """Execute the full (grid x realizations x sweep) table for one model.

    A cell that fails outright is recorded as error rows with diagnostics;
    the remaining cells still run.
    """
    cells = cfg.cells
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_run_cell_job, [(cfg.to_dict(), c) for c in cells]))
    else:
        chunks = [_run_cell_job((cfg.to_dict(), c)) for c in cells]
    rows = [row for chunk in chunks for row in chunk]
    summary = summarize(cfg, rows)
    manifest = {"config": cfg.to_dict(), "version": SCHEMA_VERSION}
    return ResultStore(manifest=manifest, cells=rows, summary=summary)


def _run_cell_job(args: tuple[dict, tuple[float, float, float]]) -> list[dict]:
    cfg_dict, cell = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    try:
        return run_cell(cfg, cell)
    except Exception as exc:
        h, dt, gamma = cell
        return [
            {
                "model": cfg.model,
                "n_qubits": cfg.n_qubits,
                "h": h,
                "dt": dt,
                "gamma": gamma,
                "sweep_param": cfg.sweep_param or "",
                "sweep_value": "",
                "realization": r,
                "metric_kind": cfg.metric_kind,
                "value": float("nan"),
                "error": f"{type(exc).__name__}: {exc}",
            }
            for r in range(cfg.n_realizations)
        ]


# ---------------------------------------------------------------------------
# figure data
# ---------------------------------------------------------------------------

FIGURES = ("fig2a", "fig2b", "fig2c", "fig3", "fig4", "fig6", "fig7")


def emit_plot_data(stores: list[ResultStore], figure: str) -> tuple[list[str], list[dict]]:
    """Tidy per-figure rows ready for external plotting.

    fig2a/fig2c: capacity vs delay; fig2b: capacity vs NARMA order;
    fig3: forecast MSE per model; fig4: capacity vs sample count;
    fig7: capacity vs network size.  fig6 (mixing-time scaling) is produced
    by the mixing-time pipeline, not from task stores.
    """
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; choose from {FIGURES}")
    if figure == "fig6":
        raise ValueError("fig6 is emitted by the mixing-time command, not from task stores")
    needed_sweep = {"fig2a": "delay", "fig2b": "order", "fig2c": "delay", "fig4": "n_samples"}.get(figure)
    if needed_sweep is not None:
        for store in stores:
            have = (store.manifest.get("config", {}).get("sweep") or {}).get("param")
            if have != needed_sweep:
                raise ValueError(f"{figure} needs a {needed_sweep!r} sweep; store has {have!r}")
    rows = []
    if figure in ("fig2a", "fig2b", "fig2c"):
        xcol = "order" if figure == "fig2b" else "tau"
        cols = [xcol, "capacity_mean", "capacity_std", "model"]
        for store in stores:
            for e in _optimal_rows(store):
                rows.append(
                    {
                        xcol: e["sweep_value"],
                        "capacity_mean": e["mean"],
                        "capacity_std": e["std"],
                        "model": e["model"],
                    }
                )
    elif figure == "fig3":
        cols = ["model", "mse_mean", "mse_std"]
        for store in stores:
            for e in _optimal_rows(store):
                rows.append({"model": e["model"], "mse_mean": e["mean"], "mse_std": e["std"]})
    elif figure == "fig4":
        cols = ["n_samples", "tau", "capacity_mean", "capacity_std", "model"]
        for store in stores:
            tau = store.manifest["config"]["task"]["delay"]
            for e in _optimal_rows(store):
                rows.append(
                    {
                        "n_samples": e["sweep_value"],
                        "tau": tau,
                        "capacity_mean": e["mean"],
                        "capacity_std": e["std"],
                        "model": e["model"],
                    }
                )
    else:  # fig7
        cols = ["n_qubits", "capacity_mean", "capacity_std", "model"]
        for store in stores:
            for e in _optimal_rows(store):
                rows.append(
                    {
                        "n_qubits": e["n_qubits"],
                        "capacity_mean": e["mean"],
                        "capacity_std": e["std"],
                        "model": e["model"],
                    }
                )
    return cols, rows


def _optimal_rows(store: ResultStore) -> list[dict]:
    out = []
    for e in store.summary:
        if int(e.get("optimal", 0)) == 1:
            out.append(
                {
                    "model": e["model"],
                    "n_qubits": int(e["n_qubits"]),
                    "sweep_value": e["sweep_value"],
                    "mean": float(e["mean"]),
                    "std": float(e["std"]),
                }
            )
    return out
