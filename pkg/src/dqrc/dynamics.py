"""Spin-network Hamiltonians, GKLS generators and one-input-step propagators.

Two reservoir maps are implemented:

* the erase-and-write map: qubit 1 is replaced by the input-encoded pure
  state ``sqrt(1-s)|0> + sqrt(s)|1>`` and the network then evolves unitarily
  for one input interval;
* the continuous-dissipation map: the input enters as a transverse drive of
  amplitude ``h*(s+1)`` while every qubit decays at a uniform rate ``gamma``,
  integrated over one input interval.

Basis conventions (frozen, see module tests): ``sigma_z = diag(1, -1)`` with
``|0>`` the +1 eigenstate, ``sigma_minus = (sigma_x - i sigma_y)/2 = |1><0|``,
so uniform losses relax the network toward the all-``|1>`` product state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linalg

SI = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SMINUS = np.array([[0, 0], [1, 0]], dtype=complex)

PAULI = {"I": SI, "X": SX, "Y": SY, "Z": SZ}

MAX_QUBITS_SUPEROP = 6  # memory guard for dense 4^N x 4^N operators


class PropagationError(RuntimeError):
    """Raised when a propagation step cannot be carried out as requested."""


def site_operator(op: np.ndarray, site: int, n_qubits: int) -> np.ndarray:
    """Embed a single-qubit operator at ``site`` (0-based) into n qubits."""
    out = np.array([[1.0 + 0j]])
    for k in range(n_qubits):
        out = np.kron(out, op if k == site else SI)
    return out


def pauli_string_operator(spec: dict[int, str], n_qubits: int) -> np.ndarray:
    """Dense operator for a Pauli string given as {site: letter}."""
    out = np.array([[1.0 + 0j]])
    for k in range(n_qubits):
        out = np.kron(out, PAULI[spec.get(k, "I")])
    return out


@dataclass
class SpinNetworkParams:
    """Static network parameters in units of the coupling scale."""

    n_qubits: int
    couplings: np.ndarray  # symmetric (N, N), entries in [-coupling_scale, coupling_scale]
    field_h: float
    coupling_scale: float = 1.0

    def __post_init__(self) -> None:
        J = np.asarray(self.couplings, dtype=float)
        if J.shape != (self.n_qubits, self.n_qubits):
            raise ValueError(f"couplings must be ({self.n_qubits}, {self.n_qubits})")
        if not np.allclose(J, J.T):
            raise ValueError("couplings must be symmetric")
        if np.max(np.abs(J[np.triu_indices(self.n_qubits, 1)]), initial=0.0) > self.coupling_scale + 1e-12:
            raise ValueError("|J_ij| must not exceed the coupling scale")
        self.couplings = J

    @classmethod
    def random(cls, n_qubits: int, field_h: float, seed: int, coupling_scale: float = 1.0) -> "SpinNetworkParams":
        """Draw each i<j coupling once from uniform[-scale, scale]."""
        rng = np.random.default_rng(seed)
        J = np.zeros((n_qubits, n_qubits))
        iu = np.triu_indices(n_qubits, 1)
        J[iu] = rng.uniform(-coupling_scale, coupling_scale, size=len(iu[0]))
        J = J + J.T
        return cls(n_qubits=n_qubits, couplings=J, field_h=field_h, coupling_scale=coupling_scale)


@dataclass
class CDParams:
    """Continuous-dissipation reservoir: uniform decay rate and input interval."""

    base: SpinNetworkParams
    gamma: float
    dt_step: float

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.dt_step <= 0:
            raise ValueError("dt_step must be > 0")


@dataclass
class FnParams:
    """Erase-and-write reservoir: only the input interval is free."""

    base: SpinNetworkParams
    dt_step: float

    def __post_init__(self) -> None:
        if self.dt_step <= 0:
            raise ValueError("dt_step must be > 0")


@dataclass
class FnApproxParams:
    """Strong loss on qubit 1 followed by a local rotation (erase-and-write surrogate)."""

    base: SpinNetworkParams
    gamma_first: float
    dt_dissipate: float

    def __post_init__(self) -> None:
        if self.gamma_first <= 0:
            raise ValueError("gamma_first must be > 0")


@dataclass
class Liouvillian:
    """Dense vectorised generator for one input value (column-stacking)."""

    dim: int
    matrix: np.ndarray
    input_value: float
    n_qubits: int = field(default=0)
    gamma: float = field(default=0.0)


def build_ising_hamiltonian(p: SpinNetworkParams) -> np.ndarray:
    """H = sum_{i<j} J_ij X_i X_j + h sum_i Z_i."""
    n = p.n_qubits
    d = 2**n
    H = np.zeros((d, d), dtype=complex)
    xs = [site_operator(SX, i, n) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if p.couplings[i, j] != 0.0:
                H += p.couplings[i, j] * (xs[i] @ xs[j])
        H += p.field_h * site_operator(SZ, i, n)
    return H


def drive_operator(n_qubits: int) -> np.ndarray:
    """sum_i X_i, the operator multiplying the input-dependent drive."""
    d = 2**n_qubits
    X = np.zeros((d, d), dtype=complex)
    for i in range(n_qubits):
        X += site_operator(SX, i, n_qubits)
    return X


def build_driven_hamiltonian(p: CDParams, s: float) -> np.ndarray:
    """H' = H + h*(s+1) * sum_i X_i for an input s in [0, 1]."""
    _check_input(s)
    H = build_ising_hamiltonian(p.base)
    return H + p.base.field_h * (s + 1.0) * drive_operator(p.base.n_qubits)


def lowering_operators(n_qubits: int) -> list[np.ndarray]:
    """Local sigma^- on every site."""
    return [site_operator(SMINUS, i, n_qubits) for i in range(n_qubits)]


def gkls_rhs(
    rho: np.ndarray,
    h_matrix: np.ndarray,
    gammas: list[float] | np.ndarray,
    jumps: list[np.ndarray],
) -> np.ndarray:
    """-i[H, rho] + sum_i gamma_i (L rho L^dag - {L^dag L, rho}/2)."""
    if len(gammas) != len(jumps):
        raise ValueError("one rate per jump operator required")
    if any(g < 0 for g in gammas):
        raise ValueError("decay rates must be >= 0")
    out = -1j * (h_matrix @ rho - rho @ h_matrix)
    for g, L in zip(gammas, jumps):
        if g == 0.0:
            continue
        LdL = L.conj().T @ L
        out = out + g * (L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def local_loss_dissipator(n_qubits: int, gamma: float) -> sp.csr_matrix:
    """Sparse superoperator of the uniform local-loss dissipator.

    Built in the column-stacking convention; because every jump operator is
    real with a symmetric L^dag L, the same matrix is valid for row-stacked
    (C-order flattened) density matrices, which the batched integrator uses.
    """
    d = 2**n_qubits
    I = sp.identity(d, dtype=complex, format="csr")
    D = sp.csr_matrix((d * d, d * d), dtype=complex)
    for i in range(n_qubits):
        L = sp.csr_matrix(site_operator(SMINUS, i, n_qubits))
        LdL = (L.conj().T @ L).tocsr()
        D = D + sp.kron(L.conj(), L, format="csr") \
            - 0.5 * sp.kron(I, LdL, format="csr") \
            - 0.5 * sp.kron(LdL.T, I, format="csr")
    return (gamma * D).tocsr()


def first_qubit_loss_dissipator(n_qubits: int, gamma: float) -> sp.csr_matrix:
    """Sparse superoperator with loss on qubit 1 only."""
    d = 2**n_qubits
    I = sp.identity(d, dtype=complex, format="csr")
    L = sp.csr_matrix(site_operator(SMINUS, 0, n_qubits))
    LdL = (L.conj().T @ L).tocsr()
    D = sp.kron(L.conj(), L, format="csr") \
        - 0.5 * sp.kron(I, LdL, format="csr") \
        - 0.5 * sp.kron(LdL.T, I, format="csr")
    return (gamma * D).tocsr()


def build_liouvillian(p: CDParams, s: float) -> Liouvillian:
    """Dense 4^N x 4^N generator of the continuous-dissipation map at input s."""
    _check_input(s)
    n = p.base.n_qubits
    if n > MAX_QUBITS_SUPEROP:
        raise MemoryError(f"dense superoperators are capped at {MAX_QUBITS_SUPEROP} qubits")
    d = 2**n
    H = build_driven_hamiltonian(p, s)
    I = np.eye(d)
    M = -1j * (np.kron(I, H) - np.kron(H.T, I)) + local_loss_dissipator(n, p.gamma).toarray()
    return Liouvillian(dim=d * d, matrix=M, input_value=s, n_qubits=n, gamma=p.gamma)


# ---------------------------------------------------------------------------
# fixed-step RK4 integration of the continuous-dissipation map
# ---------------------------------------------------------------------------


def cd_substep_count(p: CDParams, dt: float | None = None) -> int:
    """Default number of RK4 substeps for one interval of length dt.

    Conservative rate-based rule; accuracy against the superoperator
    exponential is ~1e-10 for moderate parameters and degrades towards
    ~1e-4 at the stiffest weakly damped corner of the hyperparameter grid
    (large h and dt with tiny gamma), which is ample for reservoir runs.
    """
    dt = p.dt_step if dt is None else dt
    return max(200, int(np.ceil(20.0 * (p.gamma + 4.0 * p.base.field_h + p.base.n_qubits) * dt)))


def _rk4_segment(rho: np.ndarray, H: np.ndarray, dsup: sp.csr_matrix, duration: float, n_sub: int) -> np.ndarray:
    """Advance (..., d, d) states under a fixed generator with n_sub RK4 steps.

    The dissipator acts through a sparse matvec on C-order flattened states;
    see local_loss_dissipator for why no reordering is needed.
    """
    d = rho.shape[-1]
    batch = rho.shape[:-2]
    h = duration / n_sub

    def rhs(r: np.ndarray) -> np.ndarray:
        out = -1j * (H @ r - r @ H)
        out += (dsup @ r.reshape(*batch, d * d).T).T.reshape(*batch, d, d)
        return out

    for _ in range(n_sub):
        k1 = rhs(rho)
        k2 = rhs(rho + (h / 2) * k1)
        k3 = rhs(rho + (h / 2) * k2)
        k4 = rhs(rho + h * k3)
        rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


def propagate_cd(
    rho: np.ndarray,
    p: CDParams,
    s: float,
    record_times: list[float] | None = None,
    substeps: int | None = None,
) -> list[np.ndarray]:
    """Integrate one continuous-dissipation input step, recording snapshots.

    ``record_times`` is a sorted list of times in (0, dt] ending at dt (the
    default records the final state only).  ``substeps`` overrides the total
    RK4 substep count of :func:`cd_substep_count`.
    """
    _check_input(s)
    dt = p.dt_step
    if record_times is None:
        record_times = [dt]
    times = list(record_times)
    if not times or abs(times[-1] - dt) > 1e-12 * max(1.0, dt):
        raise ValueError("record_times must end at dt_step")
    if any(t2 <= t1 for t1, t2 in zip(times, times[1:])) or times[0] <= 0:
        raise ValueError("record_times must be strictly increasing within (0, dt]")

    n = p.base.n_qubits
    H = build_driven_hamiltonian(p, s)
    dsup = local_loss_dissipator(n, p.gamma)
    n_total = substeps if substeps is not None else cd_substep_count(p)

    out = []
    t_prev = 0.0
    for t in times:
        seg = t - t_prev
        n_seg = max(1, int(np.ceil(n_total * seg / dt)))
        rho = _rk4_segment(rho, H, dsup, seg, n_seg)
        if not np.all(np.isfinite(rho)):
            raise PropagationError(f"non-finite state while integrating to t={t}")
        out.append(rho)
        t_prev = t
    return out


# ---------------------------------------------------------------------------
# erase-and-write map
# ---------------------------------------------------------------------------


def encoding_state(s: float) -> np.ndarray:
    """Input-encoded qubit state sqrt(1-s)|0> + sqrt(s)|1>."""
    _check_input(s)
    return np.array([np.sqrt(1.0 - s), np.sqrt(s)], dtype=complex)


def encoding_rotation_angle(s: float) -> float:
    """Bloch angle theta = arccos(sqrt(1-s)) that prepares the encoding state."""
    _check_input(s)
    return float(np.arccos(np.sqrt(1.0 - s)))


def inject_first_qubit(rho: np.ndarray, s: float) -> np.ndarray:
    """Replace qubit 1 by the encoding state: |psi_s><psi_s| (x) Tr_1(rho)."""
    d = rho.shape[-1]
    half = d // 2
    psi = encoding_state(s)
    P = np.outer(psi, psi.conj())
    rest = np.einsum("aiaj->ij", rho.reshape(2, half, 2, half))
    return np.einsum("ab,ij->aibj", P, rest).reshape(d, d)


def fn_step(
    rho: np.ndarray,
    p: FnParams,
    s: float,
    u_cached: np.ndarray | None = None,
    record_times: list[float] | None = None,
) -> list[np.ndarray]:
    """One erase-and-write update: inject, then evolve unitarily over dt.

    ``u_cached`` must equal ``expm(-i H dt)`` for the network Hamiltonian;
    it is recomputed when omitted.  Intermediate states are returned at
    ``record_times`` (default: final time only; pass [] with dt == 0 handled
    by a single zero-length segment).
    """
    dt = p.dt_step
    if record_times is None:
        record_times = [dt]
    rho = inject_first_qubit(rho, s)
    if record_times == [dt] and u_cached is not None:
        return [u_cached @ rho @ u_cached.conj().T]
    times = list(record_times)
    if not times or abs(times[-1] - dt) > 1e-12 * max(1.0, dt):
        raise ValueError("record_times must end at dt_step")
    H = build_ising_hamiltonian(p.base)
    out = []
    t_prev = 0.0
    for t in times:
        U = linalg.expm(-1j * H * (t - t_prev))
        rho = U @ rho @ U.conj().T
        out.append(rho)
        t_prev = t
    return out


# ---------------------------------------------------------------------------
# strong-loss approximation of the erase-and-write injection
# ---------------------------------------------------------------------------


def _amplitude_damp_first(rho: np.ndarray, gamma_t: float) -> np.ndarray:
    """Exact e^{D_1 t} for loss on qubit 1 only (closed-form channel)."""
    d = rho.shape[-1]
    half = d // 2
    r = rho.reshape(2, half, 2, half).copy()
    decay = np.exp(-gamma_t)
    coher = np.exp(-gamma_t / 2.0)
    r00 = r[0, :, 0, :]
    r[1, :, 1, :] += (1.0 - decay) * r00
    r[0, :, 0, :] = decay * r00
    r[0, :, 1, :] *= coher
    r[1, :, 0, :] *= coher
    return r.reshape(d, d)


def injection_rotation(s: float) -> np.ndarray:
    """Real rotation taking the loss fixed point |1> to the encoding state.

    Parametrised by the encoding angle theta = arccos(sqrt(1-s)); the second
    column is (cos theta, sin theta) so R|1> = sqrt(1-s)|0> + sqrt(s)|1>.
    """
    th = encoding_rotation_angle(s)
    return np.array([[np.sin(th), np.cos(th)], [-np.cos(th), np.sin(th)]])


def fn_approx_step(rho: np.ndarray, p: FnApproxParams, s: float) -> np.ndarray:
    """Strong loss on qubit 1 (Hamiltonian off) followed by the local rotation.

    Approaches the exact injection ``|psi_s><psi_s| (x) Tr_1(rho)`` as
    gamma_first * dt_dissipate grows.
    """
    _check_input(s)
    n = p.base.n_qubits
    rho = _amplitude_damp_first(rho, p.gamma_first * p.dt_dissipate)
    R = site_operator(injection_rotation(s).astype(complex), 0, n)
    return R @ rho @ R.conj().T


# ---------------------------------------------------------------------------
# state utilities
# ---------------------------------------------------------------------------


def hs_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Hilbert-Schmidt distance sqrt(Tr[(a-b)^dag (a-b)])."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def ground_state_density(n_qubits: int) -> np.ndarray:
    """All-|0> pure initial state."""
    d = 2**n_qubits
    rho = np.zeros((d, d), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def random_density_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Full-rank random mixed state (Wishart construction)."""
    G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def density_matrix_checks(rho: np.ndarray) -> dict[str, float]:
    """Deviation of a state from Hermitian, unit-trace, positive."""
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    tr = float(abs(np.trace(rho) - 1.0))
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    return {"hermiticity": herm, "trace_dev": tr, "min_eigenvalue": min_eig}


def _check_input(s: float) -> None:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"input value must lie in [0, 1], got {s}")
