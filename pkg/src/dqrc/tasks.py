"""Benchmark task generators and the closed-loop forecasting harness.

All generators are pure and deterministic per seed.  Targets are returned
aligned index-for-index with the input sequence together with a validity
mask; warm-up entries (e.g. the first tau entries of a delay task) are
flagged invalid and must be excluded from training and metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import PropagationError


@dataclass
class TargetSeries:
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.shape != self.valid.shape:
            raise ValueError("values and valid mask must have equal length")


def gen_uniform_inputs(length: int, seed: int) -> np.ndarray:
    """I.i.d. uniform input sequence on [0, 1]."""
    if length < 1:
        raise ValueError("length must be >= 1")
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=length)


def gen_binary_inputs(length: int, seed: int) -> np.ndarray:
    """I.i.d. fair binary input sequence on {0, 1}."""
    if length < 1:
        raise ValueError("length must be >= 1")
    return np.random.default_rng(seed).integers(0, 2, size=length).astype(float)


def stm_targets(s: np.ndarray, tau: int) -> TargetSeries:
    """Short-term memory: y_k = s_{k - tau}."""
    s = np.asarray(s, dtype=float)
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau >= len(s):
        raise ValueError(f"tau={tau} is not smaller than the sequence length {len(s)}")
    y = np.zeros_like(s)
    valid = np.zeros(len(s), dtype=bool)
    if tau == 0:
        y[:] = s
        valid[:] = True
    else:
        y[tau:] = s[:-tau]
        valid[tau:] = True
    return TargetSeries(values=y, valid=valid)


def narma_targets(s: np.ndarray, order: int) -> TargetSeries:
    """NARMA(n) recursion on inputs rescaled to [0, 0.02].

    y_k = 0.3 y_{k-1} + 0.05 y_{k-1} sum_{j=1..n} y_{k-j}
          + 1.5 s'_{k-n} s'_{k-1} + 0.1,   s' = 0.02 s,
    with zero history (y_k = 0, s'_k = 0 for k < 0).
    """
    s = np.asarray(s, dtype=float)
    if order < 1:
        raise ValueError("order must be >= 1")
    sp = 0.02 * s
    T = len(s)
    y = np.zeros(T)
    for k in range(T):
        prev = y[k - 1] if k >= 1 else 0.0
        window = y[max(0, k - order) : k]
        s_n = sp[k - order] if k >= order else 0.0
        s_1 = sp[k - 1] if k >= 1 else 0.0
        y[k] = 0.3 * prev + 0.05 * prev * window.sum() + 1.5 * s_n * s_1 + 0.1
        if abs(y[k]) > 10.0:
            raise PropagationError(f"NARMA({order}) diverged at step {k}: y={y[k]:.3g}")
    return TargetSeries(values=y, valid=np.ones(T, dtype=bool))


def parity_targets(s: np.ndarray, tau: int) -> TargetSeries:
    """Parity check: y_k = (s_{k-1} + ... + s_{k-tau}) mod 2 for binary inputs."""
    s = np.asarray(s, dtype=float)
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if not np.all((s == 0.0) | (s == 1.0)):
        raise ValueError("parity task needs a binary input sequence")
    T = len(s)
    y = np.zeros(T)
    valid = np.zeros(T, dtype=bool)
    csum = np.concatenate([[0.0], np.cumsum(s)])
    for k in range(tau, T):
        y[k] = (csum[k] - csum[k - tau]) % 2.0
        valid[k] = True
    return TargetSeries(values=y, valid=valid)


def one_step_targets(s: np.ndarray) -> TargetSeries:
    """One-step-ahead prediction: y_k = s_{k+1}, final entry invalid."""
    s = np.asarray(s, dtype=float)
    if len(s) < 2:
        raise ValueError("need at least two points")
    y = np.zeros_like(s)
    y[:-1] = s[1:]
    valid = np.ones(len(s), dtype=bool)
    valid[-1] = False
    return TargetSeries(values=y, valid=valid)


# ---------------------------------------------------------------------------
# Mackey-Glass series
# ---------------------------------------------------------------------------


@dataclass
class MGConfig:
    """Delay differential equation ds/dt = -0.1 s + 0.2 s_tau / (1 + s_tau^10).

    delay=17 puts the dynamics in the chaotic regime; the solution is sampled
    every ``sample_resolution`` time units after discarding a transient.
    """

    delay: float = 17.0
    sample_resolution: float = 3.0
    integration_step: float = 0.1
    transient_discard: float = 1000.0
    history_value: float = 1.1

    def __post_init__(self) -> None:
        if self.delay <= 0:
            raise ValueError("delay must be > 0")
        ratio = self.sample_resolution / self.integration_step
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("sample_resolution must be a multiple of integration_step")


def _mg_rhs(x: float, x_delayed: float) -> float:
    return -0.1 * x + 0.2 * x_delayed / (1.0 + x_delayed**10)


def mackey_glass_series(cfg: MGConfig, length: int, seed: int | None = None) -> np.ndarray:
    """Integrate the delay equation and return ``length`` samples in [0, 1].

    Fixed-step RK4 with cubic interpolation of the delayed value from the
    stored trajectory; constant initial history (jittered slightly when a
    seed is given, so different seeds land on decorrelated stretches of the
    attractor); min-max rescaling over the returned window.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    dt = cfg.integration_step
    stride = int(round(cfg.sample_resolution / dt))
    n_transient = int(round(cfg.transient_discard / dt))
    n_steps = n_transient + stride * length
    lag = cfg.delay / dt

    h0 = cfg.history_value
    if seed is not None:
        h0 = h0 + 0.05 * np.random.default_rng(seed).uniform(-1.0, 1.0)

    n_hist = int(np.ceil(lag)) + 3
    traj = np.empty(n_hist + n_steps + 1)
    traj[:n_hist] = h0  # constant history for t <= 0
    base = n_hist - 1  # index of t = 0

    def delayed(idx_float: float) -> float:
        # cubic Lagrange interpolation on the 4 grid points around the query
        j = int(np.floor(idx_float))
        u = idx_float - j
        if u < 1e-12:
            return traj[j]
        p = traj[j - 1 : j + 3]
        return float(
            p[0] * (-u * (u - 1) * (u - 2) / 6.0)
            + p[1] * ((u + 1) * (u - 1) * (u - 2) / 2.0)
            + p[2] * (-(u + 1) * u * (u - 2) / 2.0)
            + p[3] * ((u + 1) * u * (u - 1) / 6.0)
        )

    x = h0
    for k in range(n_steps):
        i = base + k
        xd0 = delayed(i - lag)
        xdh = delayed(i + 0.5 - lag)
        xd1 = delayed(i + 1.0 - lag)
        k1 = _mg_rhs(x, xd0)
        k2 = _mg_rhs(x + 0.5 * dt * k1, xdh)
        k3 = _mg_rhs(x + 0.5 * dt * k2, xdh)
        k4 = _mg_rhs(x + dt * k3, xd1)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.isfinite(x):
            raise PropagationError(f"Mackey-Glass integration became non-finite at step {k}")
        traj[i + 1] = x

    samples = traj[base + n_transient :: stride][:length]
    lo, hi = samples.min(), samples.max()
    if hi - lo < 1e-12:
        raise PropagationError("Mackey-Glass trajectory collapsed to a constant")
    return (samples - lo) / (hi - lo)


# ---------------------------------------------------------------------------
# closed-loop (autonomous) evaluation
# ---------------------------------------------------------------------------


def autonomous_rollout(
    engine,
    obs,
    weights: np.ndarray,
    rho: np.ndarray,
    first_prediction: np.ndarray,
    n_steps: int,
    forced_inputs: np.ndarray | None = None,
) -> tuple[np.ndarray, int, np.ndarray]:
    """Evolve reservoirs on their own one-step-ahead predictions.

    ``engine`` is a batched stepper (CDEngine or FNEngine), ``rho`` the state
    at the end of the training phase, ``weights`` the trained readout of
    shape (batch, n_features + 1) and ``first_prediction`` the readout output
    on the final training row.  Each subsequent prediction, clamped to
    [0, 1], is injected as the next input.  ``forced_inputs`` of shape
    (n_steps - 1, batch) overrides the feedback (teacher forcing), in which
    case the outputs reproduce the open-loop prediction sequence.

    Returns (predictions (n_steps, batch), number of clamping events,
    final state).
    """
    batch = rho.shape[0]
    weights = np.atleast_2d(weights)
    preds = np.empty((n_steps, batch))
    if n_steps == 0:
        return preds, 0, rho
    preds[0] = np.broadcast_to(np.asarray(first_prediction, dtype=float), (batch,))
    n_clamped = 0
    for k in range(1, n_steps):
        if forced_inputs is not None:
            s = np.asarray(forced_inputs[k - 1], dtype=float)
        else:
            s = preds[k - 1]
            clip = np.clip(s, 0.0, 1.0)
            n_clamped += int(np.sum(clip != s))
            s = clip
        if np.any(~np.isfinite(s)):
            raise PropagationError(f"non-finite prediction fed back at rollout step {k}")
        rho, row = engine.step(rho, s, obs)
        feats = np.concatenate([row, np.ones((batch, 1))], axis=1)
        preds[k] = np.einsum("bf,bf->b", feats, weights)
    return preds, n_clamped, rho


# ---------------------------------------------------------------------------
# task specification used by the experiment layer
# ---------------------------------------------------------------------------


@dataclass
class TaskSpec:
    """A benchmark task with its parameters and data-generation recipe."""

    kind: str  # "stm" | "narma" | "parity" | "mackey_glass"
    delay: int = 1
    order: int = 2
    mg: MGConfig = field(default_factory=MGConfig)
    forecast_steps: int = 150

    KINDS = ("stm", "narma", "parity", "mackey_glass")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")

    def build(self, length: int, input_seed: int) -> tuple[np.ndarray, TargetSeries, np.ndarray | None]:
        """Generate (inputs, targets, ground-truth continuation or None)."""
        if self.kind == "stm":
            s = gen_uniform_inputs(length, input_seed)
            return s, stm_targets(s, self.delay), None
        if self.kind == "narma":
            s = gen_uniform_inputs(length, input_seed)
            return s, narma_targets(s, self.order), None
        if self.kind == "parity":
            s = gen_binary_inputs(length, input_seed)
            return s, parity_targets(s, self.delay), None
        series = mackey_glass_series(self.mg, length + 1 + self.forecast_steps, seed=input_seed)
        s = series[:length]
        y = TargetSeries(values=series[1 : length + 1], valid=np.ones(length, dtype=bool))
        return s, y, series[length : length + 1 + self.forecast_steps]
