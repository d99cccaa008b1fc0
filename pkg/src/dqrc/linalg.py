"""Dense complex linear algebra primitives shared by the whole package.

All matrices are plain ``numpy.ndarray`` of ``complex128`` in C (row-major)
memory order.  Vectorisation of operators uses the column-stacking convention
``vec(rho) = rho.ravel(order="F")`` so that ``vec(A @ rho @ B) ==
kron(B.T, A) @ vec(rho)`` holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


class LinalgError(ValueError):
    """Raised when a decomposition fails its residual check."""


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, dimensions (ra*rb) x (ca*cb)."""
    return np.kron(a, b)


def kron_all(*mats: np.ndarray) -> np.ndarray:
    """Left-associated Kronecker product of several matrices."""
    out = np.asarray(mats[0], dtype=complex)
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential via scipy's scaling-and-squaring Pade approximant."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise LinalgError(f"expm needs a square matrix, got shape {a.shape}")
    return sla.expm(a)


@dataclass
class SpectralDecomposition:
    """Eigenvalues with right and left eigenvectors (as matrix columns).

    Columns satisfy ``A @ right[:, i] = eigenvalues[i] * right[:, i]`` and
    ``left[:, i].conj() @ A = eigenvalues[i] * left[:, i].conj()`` up to the
    residual tolerance checked at construction time.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray


def eig_general(a: np.ndarray, rtol: float = 1e-8) -> SpectralDecomposition:
    """Full non-symmetric eigendecomposition with a residual check.

    Raises LinalgError when any right-eigenvector residual
    ``|A r - lambda r|`` exceeds ``rtol * |A|_2`` (this also flags
    numerically defective inputs, which cannot be expanded in a dual basis).
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise LinalgError(f"eig_general needs a square matrix, got shape {a.shape}")
    w, vl, vr = sla.eig(a, left=True, right=True)
    scale = np.linalg.norm(a, 2)
    if scale == 0.0:
        scale = 1.0
    res = np.linalg.norm(a @ vr - vr * w[None, :], axis=0)
    worst = float(res.max() / scale)
    if worst > rtol:
        raise LinalgError(f"eigendecomposition residual {worst:.3e} exceeds {rtol:.1e}")
    return SpectralDecomposition(eigenvalues=w, right=vr, left=vl)


def svd_lstsq(a: np.ndarray, b: np.ndarray, rcond: float = 1e-10) -> np.ndarray:
    """Minimum-norm least-squares solution of ``a @ x = b`` via SVD.

    Singular values below ``rcond * sigma_max`` are treated as zero.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise LinalgError("svd_lstsq got an empty system")
    if a.shape[0] != b.shape[0]:
        raise LinalgError(f"row mismatch: a has {a.shape[0]}, b has {b.shape[0]}")
    if rcond < 0:
        raise LinalgError("rcond must be >= 0")
    x, _, _, _ = np.linalg.lstsq(a, b, rcond=rcond)
    return x


def partial_trace_first(rho: np.ndarray, n_qubits: int) -> np.ndarray:
    """Trace out the first qubit of an ``n_qubits``-qubit operator."""
    rho = np.asarray(rho)
    d = 2**n_qubits
    if rho.shape != (d, d):
        raise LinalgError(f"expected shape {(d, d)} for {n_qubits} qubits, got {rho.shape}")
    if n_qubits < 2:
        raise LinalgError("partial_trace_first needs at least 2 qubits")
    half = d // 2
    r = rho.reshape(2, half, 2, half)
    return np.einsum("aiaj->ij", r)


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Column-stacking vectorisation of a square matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise LinalgError(f"vectorize needs a square matrix, got shape {rho.shape}")
    return rho.ravel(order="F")


def devectorize(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    v = np.asarray(v)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise LinalgError(f"vector of length {v.size} is not a stacked square matrix")
    return v.reshape(d, d, order="F")
