"""Reservoir execution: drives a spin network through an input sequence and
harvests the observable layer, with time/spatial multiplexing, finite-sampling
noise and washout/train/test segmentation.

The batched runners advance a stack of independent realizations in lockstep
(one realization per batch row), which amortises numpy call overhead across
the grid sweeps; a single run is a batch of one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse as sp

from . import linalg
from .dynamics import (
    CDParams,
    FnParams,
    PropagationError,
    build_ising_hamiltonian,
    cd_substep_count,
    drive_operator,
    local_loss_dissipator,
    pauli_string_operator,
)


@dataclass
class ObservableSet:
    """Pauli-string readout operators as sparse rows over flattened states."""

    labels: list[str]
    matrix: sp.csr_matrix  # (n_obs, d*d), row k holds vec(P_k^T) in C order
    n_qubits: int

    def __len__(self) -> int:
        return len(self.labels)


def pauli_observables(n_qubits: int) -> ObservableSet:
    """All single-site <P_i> plus same-letter two-site <P_i P_j>, i < j.

    Ordering: X1..XN, Y1..YN, Z1..ZN, then X1X2..X(N-1)XN, same for Y and Z;
    3N + 3N(N-1)/2 operators in total (45 for five qubits).
    """
    rows, labels = [], []
    for name in ("X", "Y", "Z"):
        for i in range(n_qubits):
            rows.append(pauli_string_operator({i: name}, n_qubits))
            labels.append(f"{name}{i + 1}")
    for name in ("X", "Y", "Z"):
        for i in range(n_qubits):
            for j in range(i + 1, n_qubits):
                rows.append(pauli_string_operator({i: name, j: name}, n_qubits))
                labels.append(f"{name}{i + 1}{name}{j + 1}")
    # Tr(P rho) = vec(P.T) . vec(rho) for C-order flattening
    M = sp.csr_matrix(np.stack([r.T.reshape(-1) for r in rows]))
    return ObservableSet(labels=labels, matrix=M, n_qubits=n_qubits)


def expectation(rho: np.ndarray, op: np.ndarray, imag_tol: float = 1e-10) -> float:
    """Tr(op @ rho); the imaginary part is checked against imag_tol, then dropped."""
    if rho.shape != op.shape:
        raise ValueError(f"shape mismatch: state {rho.shape}, operator {op.shape}")
    val = np.trace(op @ rho)
    if abs(val.imag) > imag_tol:
        raise PropagationError(f"expectation has imaginary part {val.imag:.3e} (corrupted state?)")
    return float(val.real)


@dataclass
class MultiplexConfig:
    """Time multiplexing (V recording times k*dt/V) and spatial copies."""

    virtual_nodes: int = 1
    spatial_copies: int = 1

    def __post_init__(self) -> None:
        if self.virtual_nodes < 1 or self.spatial_copies < 1:
            raise ValueError("multiplex counts must be >= 1")


@dataclass
class SamplingConfig:
    """Finite measurement ensemble; None means ideal (infinite) sampling."""

    n_samples: float | None = None
    noise_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples is not None and self.n_samples < 1:
            raise ValueError("n_samples must be >= 1 when finite")


@dataclass
class SegmentLengths:
    washout: int = 1000
    train: int = 1000
    test: int = 1000

    @property
    def total(self) -> int:
        return self.washout + self.train + self.test


# ---------------------------------------------------------------------------
# batched steppers
# ---------------------------------------------------------------------------


class CDEngine:
    """Lockstep integrator for a batch of continuous-dissipation reservoirs.

    All realizations in the batch share (h, dt, gamma, V) and differ in their
    couplings and, optionally, their per-step inputs.
    """

    def __init__(
        self,
        params_list: list[CDParams],
        obs: ObservableSet,
        virtual_nodes: int = 1,
        substeps: int | None = None,
    ):
        p0 = params_list[0]
        for p in params_list:
            if (p.gamma, p.dt_step, p.base.field_h, p.base.n_qubits) != (
                p0.gamma,
                p0.dt_step,
                p0.base.field_h,
                p0.base.n_qubits,
            ):
                raise ValueError("batched realizations must share hyperparameters")
        self.n_qubits = p0.base.n_qubits
        self.dim = 2**self.n_qubits
        self.h = p0.base.field_h
        self.dt = p0.dt_step
        self.gamma = p0.gamma
        self.v_nodes = virtual_nodes
        self.batch = len(params_list)
        self.h0 = np.stack([build_ising_hamiltonian(p.base) for p in params_list])
        self.x_drive = drive_operator(self.n_qubits)
        self.dissipator = local_loss_dissipator(self.n_qubits, self.gamma)
        n_sub = substeps if substeps is not None else cd_substep_count(p0)
        self.n_sub = int(np.ceil(n_sub / virtual_nodes)) * virtual_nodes
        self.sub_dt = self.dt / self.n_sub
        self._per_record = self.n_sub // virtual_nodes

    def initial_state(self) -> np.ndarray:
        rho = np.zeros((self.batch, self.dim, self.dim), dtype=complex)
        rho[:, 0, 0] = 1.0
        return rho

    def _rhs(self, hk: np.ndarray, rho: np.ndarray) -> np.ndarray:
        d = self.dim
        out = -1j * (hk @ rho - rho @ hk)
        out += (self.dissipator @ rho.reshape(self.batch, d * d).T).T.reshape(self.batch, d, d)
        return out

    def step(self, rho: np.ndarray, s: np.ndarray, obs: ObservableSet) -> tuple[np.ndarray, np.ndarray]:
        """One input interval; returns (state, features (batch, V*n_obs))."""
        s = np.broadcast_to(np.asarray(s, dtype=float), (self.batch,))
        hk = self.h0 + (self.h * (s + 1.0))[:, None, None] * self.x_drive
        dt6 = self.sub_dt / 6.0
        half = self.sub_dt / 2.0
        blocks = []
        for _ in range(self.v_nodes):
            for _ in range(self._per_record):
                k1 = self._rhs(hk, rho)
                k2 = self._rhs(hk, rho + half * k1)
                k3 = self._rhs(hk, rho + half * k2)
                k4 = self._rhs(hk, rho + self.sub_dt * k3)
                rho = rho + dt6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            blocks.append(self._observe(rho, obs))
        return rho, np.concatenate(blocks, axis=1)

    def _observe(self, rho: np.ndarray, obs: ObservableSet) -> np.ndarray:
        return _real_expectations(obs, rho, self.batch, self.dim)


class FNEngine:
    """Lockstep stepper for a batch of erase-and-write reservoirs.

    With time multiplexing the V recording times lie inside the unitary
    segment that follows the injection (k*dt/V, endpoint included), never
    immediately after the injection itself.
    """

    def __init__(self, params_list: list[FnParams], obs: ObservableSet, virtual_nodes: int = 1):
        p0 = params_list[0]
        for p in params_list:
            if (p.dt_step, p.base.field_h, p.base.n_qubits) != (p0.dt_step, p0.base.field_h, p0.base.n_qubits):
                raise ValueError("batched realizations must share hyperparameters")
        self.n_qubits = p0.base.n_qubits
        self.dim = 2**self.n_qubits
        self.dt = p0.dt_step
        self.v_nodes = virtual_nodes
        self.batch = len(params_list)
        seg = self.dt / virtual_nodes
        self.u_seg = np.stack(
            [linalg.expm(-1j * build_ising_hamiltonian(p.base) * seg) for p in params_list]
        )
        self.u_seg_dag = self.u_seg.conj().transpose(0, 2, 1)

    def initial_state(self) -> np.ndarray:
        rho = np.zeros((self.batch, self.dim, self.dim), dtype=complex)
        rho[:, 0, 0] = 1.0
        return rho

    def step(self, rho: np.ndarray, s: np.ndarray, obs: ObservableSet) -> tuple[np.ndarray, np.ndarray]:
        s = np.broadcast_to(np.asarray(s, dtype=float), (self.batch,))
        d = self.dim
        half = d // 2
        psi = np.stack([np.sqrt(1.0 - s), np.sqrt(s)]).astype(complex).T  # (batch, 2)
        proj = psi[:, :, None] * psi[:, None, :].conj()
        rest = np.einsum("raiaj->rij", rho.reshape(self.batch, 2, half, 2, half))
        rho = np.einsum("rab,rij->raibj", proj, rest).reshape(self.batch, d, d)
        blocks = []
        for _ in range(self.v_nodes):
            rho = self.u_seg @ rho @ self.u_seg_dag
            blocks.append(_real_expectations(obs, rho, self.batch, d))
        return rho, np.concatenate(blocks, axis=1)


def _real_expectations(obs: ObservableSet, rho: np.ndarray, batch: int, dim: int, imag_tol: float = 1e-8) -> np.ndarray:
    vals = (obs.matrix @ rho.reshape(batch, dim * dim).T).T
    worst = float(np.max(np.abs(vals.imag)))
    if worst > imag_tol:
        raise PropagationError(f"observable expectations have imaginary part {worst:.3e} (corrupted state?)")
    return vals.real


def make_engine(params_list: list[CDParams] | list[FnParams], obs: ObservableSet, virtual_nodes: int = 1, substeps: int | None = None):
    if isinstance(params_list[0], CDParams):
        return CDEngine(params_list, obs, virtual_nodes, substeps)
    return FNEngine(params_list, obs, virtual_nodes)


def run_features(
    engine: CDEngine | FNEngine,
    obs: ObservableSet,
    inputs: np.ndarray,
    rho0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Drive a batch through an input sequence.

    ``inputs`` has shape (T,) for shared inputs or (T, batch) for
    per-realization sequences.  Returns (features (batch, T, V*n_obs),
    final state); no bias column is added here.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None] * np.ones((1, engine.batch))
    if inputs.min() < 0.0 or inputs.max() > 1.0:
        raise ValueError("inputs must lie in [0, 1]")
    T = inputs.shape[0]
    rho = engine.initial_state() if rho0 is None else rho0
    feats = np.empty((engine.batch, T, engine.v_nodes * len(obs)))
    for k in range(T):
        rho, row = engine.step(rho, inputs[k], obs)
        if not np.all(np.isfinite(row)):
            raise PropagationError(f"non-finite features at input step {k}")
        feats[:, k, :] = row
    return feats, rho


def add_bias(features: np.ndarray) -> np.ndarray:
    """Append the constant bias column of ones (last column)."""
    shape = features.shape[:-1] + (1,)
    return np.concatenate([features, np.ones(shape)], axis=-1)


def run_reservoir(
    params: CDParams | FnParams,
    inputs: np.ndarray,
    obs: ObservableSet | None = None,
    mux: MultiplexConfig | None = None,
    substeps: int | None = None,
) -> np.ndarray:
    """Single-reservoir feature matrix, bias column included.

    With spatial copies the same parameters are replicated; independent
    copies are obtained by calling :func:`run_spatial` with distinct
    parameter sets.
    """
    mux = mux or MultiplexConfig()
    if mux.spatial_copies > 1:
        return run_spatial([params] * mux.spatial_copies, inputs, obs=obs, virtual_nodes=mux.virtual_nodes, substeps=substeps)
    obs = obs or pauli_observables(params.base.n_qubits)
    engine = make_engine([params], obs, mux.virtual_nodes, substeps)
    feats, _ = run_features(engine, obs, inputs)
    return add_bias(feats[0])


def run_spatial(
    params_list: list[CDParams] | list[FnParams],
    inputs: np.ndarray,
    obs: ObservableSet | None = None,
    virtual_nodes: int = 1,
    substeps: int | None = None,
) -> np.ndarray:
    """Concatenate feature blocks of independent reservoir copies, one bias."""
    blocks = []
    for p in params_list:
        o = obs or pauli_observables(p.base.n_qubits)
        engine = make_engine([p], o, virtual_nodes, substeps)
        feats, _ = run_features(engine, o, inputs)
        blocks.append(feats[0])
    return add_bias(np.concatenate(blocks, axis=1))


# ---------------------------------------------------------------------------
# sampling noise, segmentation, serialization
# ---------------------------------------------------------------------------


def apply_sampling_noise(features: np.ndarray, sc: SamplingConfig) -> np.ndarray:
    """Gaussian finite-ensemble surrogate: entry + N(0, 1/sqrt(N_s)), i.i.d.

    The bias column (last) is untouched; noised entries may leave [-1, 1]
    (no clipping).  Ideal mode returns the input unchanged.
    """
    if sc.n_samples is None:
        return features
    sigma = 1.0 / np.sqrt(sc.n_samples)
    rng = np.random.default_rng(sc.noise_seed)
    out = features.copy()
    out[..., :-1] += rng.normal(0.0, sigma, size=features[..., :-1].shape)
    return out


def segment(features: np.ndarray, lengths: SegmentLengths) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Contiguous washout/train/test views over the leading (time) axis."""
    if features.shape[0] < lengths.total:
        raise ValueError(f"run of {features.shape[0]} rows cannot hold segments totalling {lengths.total}")
    w, t = lengths.washout, lengths.train
    return (
        features[:w],
        features[w : w + t],
        features[w + t : lengths.total],
    )


def feature_labels(obs: ObservableSet, mux: MultiplexConfig | None = None) -> list[str]:
    """Column labels matching the feature layout, bias last."""
    mux = mux or MultiplexConfig()
    labels = []
    for c in range(mux.spatial_copies):
        for v in range(mux.virtual_nodes):
            for name in obs.labels:
                lab = name
                if mux.virtual_nodes > 1:
                    lab += f"@v{v + 1}"
                if mux.spatial_copies > 1:
                    lab = f"c{c + 1}:" + lab
                labels.append(lab)
    labels.append("bias")
    return labels


def features_to_csv(features: np.ndarray, labels: list[str], path: str) -> None:
    """Write a (rows, columns) feature matrix with a label header."""
    if features.ndim != 2 or features.shape[1] != len(labels):
        raise ValueError("features must be 2-D with one label per column")
    with open(path, "w") as fh:
        fh.write(",".join(labels) + "\n")
        for row in features:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


@dataclass
class RunRecord:
    """Everything needed to reproduce one reservoir run."""

    model: str
    n_qubits: int
    hyperparams: dict
    seeds: dict
    lengths: SegmentLengths
    mux: MultiplexConfig
    sampling: SamplingConfig
    inputs: np.ndarray = field(repr=False)
    features: np.ndarray = field(repr=False)

    def manifest(self) -> dict:
        return {
            "model": self.model,
            "n_qubits": self.n_qubits,
            "hyperparams": self.hyperparams,
            "seeds": self.seeds,
            "lengths": asdict(self.lengths),
            "multiplex": asdict(self.mux),
            "sampling": {"n_samples": self.sampling.n_samples, "noise_seed": self.sampling.noise_seed},
        }

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), indent=2, sort_keys=True)

    def segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Washout/train/test views of the stored feature matrix."""
        if self.features.shape[0] != self.inputs.shape[0]:
            raise ValueError("features and inputs disagree on the number of steps")
        return segment(self.features, self.lengths)
