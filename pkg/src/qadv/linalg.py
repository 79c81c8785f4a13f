"""Dense complex-matrix algebra for small Hilbert-space dimensions.

Hermitian eigendecomposition with deterministic conventions, norms, tensor
structure, Bloch geometry and the unitary families used by the discrimination
constructions. Everything here is a pure function over immutable arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLS, Tolerances
from .errors import InvalidInput, UnsupportedDimension

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def dagger(M: np.ndarray) -> np.ndarray:
    return M.conj().T


def as_matrix(M, square: bool = True) -> np.ndarray:
    """Coerce to a finite complex ndarray, rejecting NaN/Inf entries."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2:
        raise InvalidInput(f"expected a matrix, got array of ndim {A.ndim}")
    if square and A.shape[0] != A.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A.real)) or not np.all(np.isfinite(A.imag)):
        raise InvalidInput("matrix contains non-finite entries")
    return A


def hermitian_part(M: np.ndarray) -> np.ndarray:
    return (M + dagger(M)) / 2


def assert_hermitian(M, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Validate Hermiticity and return the symmetrized matrix."""
    A = as_matrix(M)
    scale = 1.0 + np.abs(A).max(initial=0.0)
    dev = np.abs(A - dagger(A)).max(initial=0.0)
    if dev > tols.hermiticity * scale:
        raise InvalidInput(f"matrix is not Hermitian (deviation {dev:.3e})")
    return hermitian_part(A)


def assert_unitary(U, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    A = as_matrix(U)
    dev = np.abs(dagger(A) @ A - np.eye(A.shape[0])).max()
    if dev > tols.unitarity:
        raise InvalidInput(f"matrix is not unitary (deviation {dev:.3e})")
    return A


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in ascending order, eigenvectors as matching columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ dagger(V)


def _canonical_subspace_basis(P: np.ndarray, r: int) -> np.ndarray:
    """Deterministic orthonormal basis of the range of projector P (rank r).

    Projects the standard basis vectors in index order and Gram-Schmidt
    orthogonalizes, so the result depends only on the subspace.
    """
    d = P.shape[0]
    basis: list[np.ndarray] = []
    for j in range(d):
        v = P[:, j].copy()
        for b in basis:
            v -= b * (b.conj() @ v)
        n = np.linalg.norm(v)
        if n > 1e-6:
            basis.append(v / n)
        if len(basis) == r:
            break
    if len(basis) < r:  # fall back: re-project accumulated residuals
        for j in range(d):
            v = P @ np.eye(d)[:, j]
            for b in basis:
                v -= b * (b.conj() @ v)
            n = np.linalg.norm(v)
            if n > 1e-12:
                basis.append(v / n)
            if len(basis) == r:
                break
    return np.stack(basis, axis=1)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the first largest-modulus entry is real >= 0."""
    idx = int(np.argmax(np.abs(v)))
    a = v[idx]
    if np.abs(a) < 1e-300:
        return v
    return v * (a.conjugate() / np.abs(a))


def _lex_key(v: np.ndarray) -> tuple:
    out = []
    for z in v:
        out.append(round(float(z.real), 12))
        out.append(round(float(z.imag), 12))
    return tuple(out)


def eig_hermitian(H, tols: Tolerances = DEFAULT_TOLS) -> SpectralDecomposition:
    """Hermitian eigendecomposition with deterministic output conventions.

    Eigenvalues ascend. Each eigenvector's first largest-modulus component is
    made real nonnegative. Within a degenerate cluster (adjacent gap below
    ``tols.degenerate_gap``) the subspace basis is canonicalized from the
    cluster projector and ordered lexicographically by components, so repeated
    calls agree regardless of how the backend resolved the degeneracy.
    """
    A = assert_hermitian(H, tols)
    w, V = np.linalg.eigh(A)
    d = A.shape[0]
    # group indices into degenerate clusters
    clusters: list[list[int]] = [[0]] if d else []
    for i in range(1, d):
        if w[i] - w[i - 1] < tols.degenerate_gap:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    cols = []
    for cluster in clusters:
        if len(cluster) == 1:
            cols.append(_fix_phase(V[:, cluster[0]]))
            continue
        Vc = V[:, cluster]
        P = Vc @ dagger(Vc)
        B = _canonical_subspace_basis(P, len(cluster))
        vecs = [_fix_phase(B[:, j]) for j in range(B.shape[1])]
        vecs.sort(key=_lex_key)
        cols.extend(vecs)
    W = np.stack(cols, axis=1) if cols else np.zeros((d, 0), dtype=complex)
    return SpectralDecomposition(eigenvalues=w.copy(), eigenvectors=W)


def eigvals_hermitian(H, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    return np.linalg.eigvalsh(assert_hermitian(H, tols))


def min_eig(H) -> float:
    """Smallest eigenvalue of the Hermitian part (no validation)."""
    return float(np.linalg.eigvalsh(hermitian_part(as_matrix(H)))[0])


def trace_norm(H, tols: Tolerances = DEFAULT_TOLS) -> float:
    """Sum of absolute eigenvalues of a Hermitian operator."""
    w = eigvals_hermitian(H, tols)
    return float(np.abs(w).sum())


def operator_norm(H, tols: Tolerances = DEFAULT_TOLS) -> float:
    w = eigvals_hermitian(H, tols)
    return float(np.abs(w).max(initial=0.0))


def project_psd(H: np.ndarray) -> np.ndarray:
    """Frobenius projection onto the positive semidefinite cone."""
    A = hermitian_part(H)
    w, V = np.linalg.eigh(A)
    w = np.maximum(w, 0.0)
    return (V * w) @ dagger(V)


def partial_transpose(M, dim_a: int, dim_b: int) -> np.ndarray:
    """Transpose the second tensor factor of a dim_a*dim_b square matrix."""
    A = as_matrix(M)
    d = dim_a * dim_b
    if A.shape != (d, d):
        raise InvalidInput(
            f"matrix of shape {A.shape} does not match dimensions {dim_a}x{dim_b}"
        )
    T = A.reshape(dim_a, dim_b, dim_a, dim_b)
    return T.transpose(0, 3, 2, 1).reshape(d, d)


def kron(A, B) -> np.ndarray:
    """Tensor product, row-major consistent with :func:`partial_transpose`."""
    return np.kron(as_matrix(A, square=False), as_matrix(B, square=False))


@dataclass(frozen=True)
class BlochFrame:
    """Bloch vector of a qubit operator plus its polar frame.

    ``axis`` is the rotation axis (sin(phi), -cos(phi), 0) that tilts the +z
    pole onto the (theta, phi) direction.
    """

    bloch: np.ndarray
    theta: float
    phi: float
    axis: np.ndarray


def to_bloch(rho, tols: Tolerances = DEFAULT_TOLS) -> BlochFrame:
    """Bloch coordinates (x, y, z) of a qubit density matrix."""
    A = assert_hermitian(rho, tols)
    if A.shape[0] != 2:
        raise UnsupportedDimension("Bloch geometry is defined for qubits only")
    x = float(np.real(np.trace(A @ PAULI_X)))
    y = float(np.real(np.trace(A @ PAULI_Y)))
    z = float(np.real(np.trace(A @ PAULI_Z)))
    r = np.array([x, y, z])
    nrm = float(np.linalg.norm(r))
    theta = float(np.arccos(np.clip(z / nrm, -1.0, 1.0))) if nrm > 1e-15 else 0.0
    phi = float(np.arctan2(y, x)) % (2 * np.pi) if nrm > 1e-15 else 0.0
    axis = np.array([np.sin(phi), -np.cos(phi), 0.0])
    return BlochFrame(bloch=r, theta=theta, phi=phi, axis=axis)


def from_bloch(bloch, tols: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Qubit density matrix (I + r . sigma) / 2 from a Bloch vector."""
    r = np.asarray(bloch, dtype=float).reshape(3)
    if np.linalg.norm(r) > 1.0 + tols.state_psd:
        raise InvalidInput(f"Bloch vector has norm {np.linalg.norm(r):.6f} > 1")
    return (PAULI_I + r[0] * PAULI_X + r[1] * PAULI_Y + r[2] * PAULI_Z) / 2


def rotation_unitary(axis, angle: float) -> np.ndarray:
    """Qubit rotation exp(-i angle/2 n.sigma) about a unit axis n."""
    n = np.asarray(axis, dtype=float).reshape(3)
    nrm = np.linalg.norm(n)
    if not np.isclose(nrm, 1.0, atol=1e-12):
        raise InvalidInput("rotation axis must be a unit vector")
    ns = n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z
    return np.cos(angle / 2) * PAULI_I - 1j * np.sin(angle / 2) * ns


def pauli_family(d: int) -> list[np.ndarray]:
    """Heisenberg-Weyl family {X^a Z^b} of d^2 unitaries.

    X|j> = |j+1 mod d>, Z|j> = zeta^j |j> with zeta = exp(2 pi i / d). The
    family twirls any operator to Tr(M) I / d, which is the only property the
    constructions rely on; for d = 2 the conjugation action matches I, X, Y, Z.
    """
    if d < 2:
        raise InvalidInput("Heisenberg-Weyl family needs dimension >= 2")
    zeta = np.exp(2j * np.pi / d)
    X = np.zeros((d, d), dtype=complex)
    for j in range(d):
        X[(j + 1) % d, j] = 1.0
    Z = np.diag(zeta ** np.arange(d))
    out = []
    for a in range(d):
        for b in range(d):
            out.append(np.linalg.matrix_power(X, a) @ np.linalg.matrix_power(Z, b))
    return out


def fourier_matrix(d: int) -> np.ndarray:
    """Discrete Fourier unitary with entries zeta^(kj) / sqrt(d)."""
    if d < 2:
        raise InvalidInput("Fourier matrix needs dimension >= 2")
    k = np.arange(d)
    zeta = np.exp(2j * np.pi / d)
    return zeta ** np.outer(k, k) / np.sqrt(d)


def shift_unitaries(basis, tols: Tolerances = DEFAULT_TOLS) -> list[np.ndarray]:
    """Cyclic-shift unitaries U_l = sum_j |e_{j+l}><e_j| for a given basis.

    ``basis`` holds the orthonormal vectors e_j as columns. The returned
    family satisfies sum_l U_l |e_j><e_j| U_l^+ = I for every j.
    """
    B = as_matrix(basis)
    d = B.shape[0]
    dev = np.abs(dagger(B) @ B - np.eye(d)).max()
    if dev > tols.orthonormality:
        raise InvalidInput(f"basis is not orthonormal (deviation {dev:.3e})")
    out = []
    for l in range(d):
        U = np.zeros((d, d), dtype=complex)
        for j in range(d):
            U += np.outer(B[:, (j + l) % d], B[:, j].conj())
        out.append(U)
    return out
