"""Numerical verification of the reservoir-computing preconditions.

Covers echo-state/contractivity of the one-step map, uniqueness and input
separation of stationary states, the fading-memory Lipschitz bound, the
per-site stationary necessary condition, and the spectral mixing-time
estimate with its size-scaling sweep.
"""

from __future__ import annotations

import functools
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .dynamics import (
    CDParams,
    FnParams,
    Liouvillian,
    SpinNetworkParams,
    build_liouvillian,
    drive_operator,
    fn_approx_step,
    FnApproxParams,
    hs_distance,
    inject_first_qubit,
    pauli_string_operator,
    random_density_matrix,
)
from .engine import make_engine, pauli_observables


class AnalysisError(RuntimeError):
    """A numerically verified precondition failed."""


# ---------------------------------------------------------------------------
# stationary states
# ---------------------------------------------------------------------------


@dataclass
class StationaryReport:
    input_s: float
    rho_ss: np.ndarray = field(repr=False)
    kernel_dim: int
    residual: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "input_s": self.input_s,
                "kernel_dim": self.kernel_dim,
                "residual": self.residual,
                "rho_ss_real": self.rho_ss.real.tolist(),
                "rho_ss_imag": self.rho_ss.imag.tolist(),
            },
            indent=2,
        )


def stationary_state(L: Liouvillian, kernel_rtol: float = 1e-10) -> StationaryReport:
    """Unique fixed point of the generator, from the SVD null space.

    The kernel dimension is the number of singular values below
    ``kernel_rtol * sigma_max``; anything other than one is a uniqueness
    violation and raises.
    """
    M = L.matrix
    _, svals, vh = np.linalg.svd(M)
    kernel_dim = int(np.sum(svals < kernel_rtol * svals[0]))
    v = vh[-1].conj()
    rho = linalg.devectorize(v)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise AnalysisError("null-space vector is traceless; cannot normalise to a state")
    rho = rho / tr
    residual = float(np.linalg.norm(M @ linalg.vectorize(rho)))
    if kernel_dim != 1:
        raise AnalysisError(f"kernel dimension {kernel_dim} != 1: stationary state not unique")
    return StationaryReport(input_s=L.input_value, rho_ss=rho, kernel_dim=kernel_dim, residual=residual)


def separation_check(p: CDParams, s: float, u: float, min_distance: float = 1e-8) -> float:
    """Distance between the stationary states of two different inputs.

    Returns the Hilbert-Schmidt distance; a value below ``min_distance``
    for s != u contradicts input separability and raises.
    """
    if p.gamma <= 0:
        raise ValueError("separation requires gamma > 0")
    if s == u:
        return 0.0
    rho_s = stationary_state(build_liouvillian(p, s)).rho_ss
    rho_u = stationary_state(build_liouvillian(p, u)).rho_ss
    dist = hs_distance(rho_s, rho_u)
    if dist <= min_distance:
        raise AnalysisError(f"stationary states for s={s} and u={u} coincide (distance {dist:.3e})")
    return dist


def stationary_necessary_condition(report: StationaryReport, p: CDParams, s: float) -> np.ndarray:
    """Per-site residual of the stationary balance identity.

    With alpha taken as normalised Pauli-expansion coefficients
    ``alpha = Tr(P rho_ss) / 2^N`` (the convention that closes the identity
    exactly on the analytic single-qubit case), a stationary state satisfies

        gamma*alpha_i^z + gamma/2^N
            - 2 sum_{j != i} J_ij alpha_{ij}^{yx}
            - 2 h (s+1) alpha_i^y  = 0        for every site i.
    """
    n = p.base.n_qubits
    norm = 2.0**n
    rho = report.rho_ss
    J = p.base.couplings
    h = p.base.field_h
    res = np.empty(n)
    for i in range(n):
        a_z = np.trace(pauli_string_operator({i: "Z"}, n) @ rho).real / norm
        a_y = np.trace(pauli_string_operator({i: "Y"}, n) @ rho).real / norm
        coupling = 0.0
        for j in range(n):
            if j == i:
                continue
            a_yx = np.trace(pauli_string_operator({i: "Y", j: "X"}, n) @ rho).real / norm
            coupling += J[i, j] * 2.0 * a_yx
        res[i] = p.gamma * a_z + p.gamma / norm - coupling - 2.0 * h * (s + 1.0) * a_y
    return res


# ---------------------------------------------------------------------------
# contractivity and the echo state property
# ---------------------------------------------------------------------------


@dataclass
class ContractivityReport:
    input_s: float
    dt: float
    contraction_factor: float
    esp_trace: np.ndarray | None = None

    def to_json(self) -> str:
        payload = {
            "input_s": self.input_s,
            "dt": self.dt,
            "contraction_factor": self.contraction_factor,
        }
        if self.esp_trace is not None:
            payload["esp_trace"] = list(map(float, self.esp_trace))
        return json.dumps(payload, indent=2)


@functools.lru_cache(maxsize=4)
def traceless_hermitian_basis(n_qubits: int) -> np.ndarray:
    """Orthonormal basis of the traceless Hermitian subspace, as vec columns.

    Normalised non-identity Pauli strings; shape (4^N, 4^N - 1).  Cached per
    size; treat the returned array as read-only.
    """
    d = 2**n_qubits
    cols = []
    for letters in itertools.product("IXYZ", repeat=n_qubits):
        if all(c == "I" for c in letters):
            continue
        spec = {i: c for i, c in enumerate(letters) if c != "I"}
        P = pauli_string_operator(spec, n_qubits) / np.sqrt(d)
        cols.append(linalg.vectorize(P))
    return np.stack(cols, axis=1)


def restrict_to_traceless(L: Liouvillian) -> np.ndarray:
    """Generator matrix restricted to the traceless Hermitian subspace.

    The restriction is real in the Hermitian string basis (the map preserves
    Hermiticity); the stationary direction is projected out, so all
    eigenvalues of the result have strictly negative real part when the
    fixed point is unique.
    """
    B = traceless_hermitian_basis(L.n_qubits)
    M = B.conj().T @ L.matrix @ B
    if np.max(np.abs(M.imag)) > 1e-9 * max(1.0, np.max(np.abs(M.real))):
        raise AnalysisError("restriction is not real in the Hermitian basis")
    return M.real


def contraction_factor(L: Liouvillian, dt: float) -> ContractivityReport:
    """Operator 2-norm of e^{L dt} restricted to traceless Hermitian matrices.

    The restricted map is strictly contractive iff the returned factor is
    below one; dt = 0 gives exactly one.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    # the traceless Hermitian subspace is invariant, so restricting the
    # generator before exponentiating gives the restricted map directly
    M = linalg.expm(restrict_to_traceless(L) * dt)
    r = float(np.linalg.svd(M, compute_uv=False)[0])
    return ContractivityReport(input_s=L.input_value, dt=dt, contraction_factor=r)


def esp_trace(
    params: CDParams | FnParams,
    inputs: np.ndarray,
    rho_a: np.ndarray,
    rho_b: np.ndarray,
) -> np.ndarray:
    """Hilbert-Schmidt distance of two differently initialised runs, per step."""
    obs = pauli_observables(params.base.n_qubits)
    engine = make_engine([params, params], obs, virtual_nodes=1)
    rho = np.stack([rho_a, rho_b]).astype(complex)
    inputs = np.asarray(inputs, dtype=float)
    out = np.empty(len(inputs))
    for k, s in enumerate(inputs):
        rho, _ = engine.step(rho, np.array([s, s]), obs)
        out[k] = hs_distance(rho[0], rho[1])
    return out


def fading_lipschitz_check(
    p: CDParams,
    n_trials: int,
    seed: int = 0,
    slack: float = 1e-9,
) -> float:
    """Max of ||(L(s) - L(u)) rho||_2 / |s - u| over random trials.

    The generator difference is the drive commutator alone, so the ratio is
    bounded by 2 N h; the asserted bound 2 N presumes a unit-bounded field
    (h <= 1), matching the normalisation in which it is quoted.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    n = p.base.n_qubits
    h = p.base.field_h
    if h > 1.0:
        raise ValueError("the 2N bound applies for field_h <= 1")
    d = 2**n
    X = drive_operator(n)
    rng = np.random.default_rng(seed)
    bound = 2.0 * n
    worst = 0.0
    for _ in range(n_trials):
        rho = random_density_matrix(d, rng)
        s, u = rng.uniform(0.0, 1.0, size=2)
        if s == u:
            continue
        diff = -1j * h * (s - u) * (X @ rho - rho @ X)
        ratio = float(np.linalg.norm(diff)) / abs(s - u)
        worst = max(worst, ratio)
        if ratio > bound + slack:
            raise AnalysisError(f"Lipschitz ratio {ratio:.6f} exceeds 2N = {bound}")
    return worst


# ---------------------------------------------------------------------------
# mixing-time estimate
# ---------------------------------------------------------------------------


@dataclass
class MixingTimeReport:
    n_qubits: int
    gamma: float
    field_h: float
    lambda1_real: float
    eta: float
    tau_mix_bound: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)


def mixing_time_estimate(L: Liouvillian, n_qubits: int, defect_tol: float = 1e-8) -> MixingTimeReport:
    """Spectral upper-bound estimate tau = (N + eta) / |Re lambda_1|.

    The generator is restricted to the traceless Hermitian subspace (where
    the dual-basis expansion of its exponential lives), so the stationary
    mode drops out and all remaining eigenvalues must have negative real
    part.  lambda_1 is the largest of those; eta = ln max_i |c_i| with
    c_i = 1 / <l_i|r_i> over normalised left/right eigenvectors, computed
    from the inverse of the right-eigenvector matrix.  Raises when a second
    eigenvalue sits at zero (degenerate fixed point, e.g. gamma = 0) or an
    eigenpair is near-defective.
    """
    M = restrict_to_traceless(L)
    w, R = np.linalg.eig(M)
    scale = max(np.max(np.abs(w)), 1.0)
    lambda1 = float(np.max(w.real))
    if lambda1 >= -1e-10 * scale:
        raise AnalysisError(
            f"restricted generator has a mode with real part {lambda1:.3e}; "
            "the zero eigenvalue is degenerate (is gamma > 0?)"
        )
    duals = np.linalg.inv(R)
    c = np.linalg.norm(duals, axis=1)  # |1 / <l_i|r_i>| for unit eigenvectors
    if np.any(1.0 / c < defect_tol):
        raise AnalysisError("near-defective eigenpair: dual-basis expansion is ill-conditioned")
    eta = float(np.log(np.max(c)))
    tau = (n_qubits + eta) / abs(lambda1)
    return MixingTimeReport(
        n_qubits=n_qubits,
        gamma=L.gamma,
        field_h=np.nan,
        lambda1_real=lambda1,
        eta=eta,
        tau_mix_bound=tau,
    )


def _mixing_cell(args: tuple[int, float, float, float, int]) -> dict:
    n, h, gamma, s, seed = args
    base = SpinNetworkParams.random(n, field_h=h, seed=seed)
    p = CDParams(base=base, gamma=gamma, dt_step=1.0)
    rep = mixing_time_estimate(build_liouvillian(p, s), n)
    return {
        "n_qubits": n,
        "h": h,
        "gamma": gamma,
        "seed": seed,
        "lambda1": rep.lambda1_real,
        "eta": rep.eta,
        "tau": rep.tau_mix_bound,
    }


DEFAULT_MIXING_H = (0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0)
DEFAULT_MIXING_GAMMA = (0.01, 0.1, 1.0, 10.0)


def mixing_time_sweep(
    n_values: tuple[int, ...] = (3, 4, 5),
    h_values: tuple[float, ...] = DEFAULT_MIXING_H,
    gamma_values: tuple[float, ...] = DEFAULT_MIXING_GAMMA,
    n_realizations: int = 10,
    master_seed: int = 0,
    input_s: float = 0.0,
    workers: int = 1,
) -> list[dict]:
    """Mixing-time bound over the (h, gamma) grid, per realization.

    The input is held at s = 0; each realization redraws the couplings.
    Returns one row per (N, h, gamma, realization).
    """
    from .experiment import derive_seed

    cells = [
        (n, h, g, input_s, derive_seed(master_seed, "mixing", n, h, g, r))
        for n in n_values
        for h in h_values
        for g in gamma_values
        for r in range(n_realizations)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_mixing_cell, cells, chunksize=4))
    else:
        rows = [_mixing_cell(c) for c in cells]
    for k, row in enumerate(rows):  # realization is the innermost loop index
        row["realization"] = k % n_realizations
    return rows


def mixing_scaling_summary(rows: list[dict]) -> dict:
    """Max-over-grid average mixing bound per N, plus the linear fit in N.

    The bound is aggregated in units of the decay time, i.e. as tau * gamma
    (the raw bound scales like N / gamma, so the worst grid cell is otherwise
    always the smallest gamma and its realization scatter swamps the size
    dependence).  For each N the per-cell mean over realizations is computed
    and the maximum across the (h, gamma) grid retained (the worst case
    bounds the mixing time).  Returns the per-N values, fit slope/intercept
    and the coefficient of determination.
    """
    byn: dict[int, dict[tuple[float, float], list[float]]] = {}
    for r in rows:
        byn.setdefault(r["n_qubits"], {}).setdefault((r["h"], r["gamma"]), []).append(r["tau"] * r["gamma"])
    ns, taus, stds = [], [], []
    for n in sorted(byn):
        cell_means = {cell: float(np.mean(v)) for cell, v in byn[n].items()}
        argmax_cell = max(cell_means, key=cell_means.get)
        ns.append(n)
        taus.append(cell_means[argmax_cell])
        stds.append(float(np.std(byn[n][argmax_cell])))
    ns_arr = np.array(ns, dtype=float)
    taus_arr = np.array(taus)
    slope, intercept = np.polyfit(ns_arr, taus_arr, 1)
    fitted = slope * ns_arr + intercept
    ss_res = float(np.sum((taus_arr - fitted) ** 2))
    ss_tot = float(np.sum((taus_arr - taus_arr.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {
        "n_values": ns,
        "tau_max_mean": taus,
        "tau_max_std": stds,
        "fit_slope": float(slope),
        "fit_intercept": float(intercept),
        "r_squared": r2,
    }


# ---------------------------------------------------------------------------
# erase-and-write approximation study
# ---------------------------------------------------------------------------


def fn_approx_distance_study(
    n_qubits: int,
    gamma_dt_values: np.ndarray,
    n_pairs: int = 100,
    seed: int = 0,
) -> list[dict]:
    """Mean distance between the exact injection and its strong-loss surrogate.

    For each product gamma*dt_d, the exact replacement of qubit 1 by the
    encoding state is compared with dissipation-then-rotation on ``n_pairs``
    random (state, input) pairs, immediately after the injection stage.
    """
    d = 2**n_qubits
    rng = np.random.default_rng(seed)
    pairs = [(random_density_matrix(d, rng), rng.uniform()) for _ in range(n_pairs)]
    rows = []
    for gdt in gamma_dt_values:
        p = FnApproxParams(
            base=SpinNetworkParams(n_qubits=n_qubits, couplings=np.zeros((n_qubits, n_qubits)), field_h=0.0),
            gamma_first=1.0,
            dt_dissipate=float(gdt),
        )
        dists = [
            hs_distance(fn_approx_step(rho, p, s), inject_first_qubit(rho, s))
            for rho, s in pairs
        ]
        rows.append(
            {
                "gamma_dt": float(gdt),
                "mean_distance": float(np.mean(dists)),
                "std_distance": float(np.std(dists)),
            }
        )
    return rows
