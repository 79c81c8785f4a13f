"""Quantum states, the named-state registry and random sampling helpers.

The registry is the single source for the special states used throughout the
constructions and the CLI, so tests and command-line runs share definitions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOLS, Tolerances
from .errors import InvalidInput
from .linalg import as_matrix, assert_hermitian, dagger


def ket(amplitudes) -> np.ndarray:
    """Normalized state vector from a sequence of amplitudes."""
    v = np.asarray(amplitudes, dtype=complex).reshape(-1)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise InvalidInput("state vector has (near) zero norm")
    return v / n


def dm(vector) -> np.ndarray:
    """Density matrix |v><v| of a state vector."""
    v = ket(vector)
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class QuantumState:
    """Trace-one positive semidefinite operator with its dimension."""

    matrix: np.ndarray
    dim: int = 0
    purity_hint: bool = False

    def __post_init__(self):
        object.__setattr__(self, "matrix", as_matrix(self.matrix))
        if self.dim == 0:
            object.__setattr__(self, "dim", self.matrix.shape[0])

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


def as_state(rho, tols: Tolerances = DEFAULT_TOLS, purity_hint: bool = False) -> QuantumState:
    """Validate trace one and positivity, returning a QuantumState."""
    if isinstance(rho, QuantumState):
        rho = rho.matrix
    A = assert_hermitian(rho, tols)
    tr = float(np.real(np.trace(A)))
    if abs(tr - 1.0) > tols.state_trace:
        raise InvalidInput(f"state trace {tr:.12f} is not 1")
    lo = float(np.linalg.eigvalsh(A)[0])
    if lo < -tols.state_psd:
        raise InvalidInput(f"state has negative eigenvalue {lo:.3e}")
    return QuantumState(matrix=A, purity_hint=purity_hint)


def state_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, QuantumState) else as_matrix(rho)


# ---------------------------------------------------------------------------
# named registry


def t_state_vector() -> np.ndarray:
    return ket([1.0, np.exp(1j * np.pi / 4)])


def t_bar_state_vector() -> np.ndarray:
    return ket([1.0, -np.exp(1j * np.pi / 4)])


def uniform_superposition(d: int) -> np.ndarray:
    return ket(np.ones(d))


def max_entangled_vector(d: int) -> np.ndarray:
    v = np.zeros(d * d, dtype=complex)
    for i in range(d):
        v[i * d + i] = 1.0
    return v / np.sqrt(d)


def maximally_mixed(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex) / d


_REGISTRY = {
    "zero": lambda: dm([1, 0]),
    "one": lambda: dm([0, 1]),
    "plus": lambda: dm([1, 1]),
    "minus": lambda: dm([1, -1]),
    "T": lambda: dm(t_state_vector()),
    "Tbar": lambda: dm(t_bar_state_vector()),
    "bell": lambda: dm(max_entangled_vector(2)),
}


def named_state(name: str) -> QuantumState:
    """Resolve a registry name like 'T', 'plus', 'w3', 'bell', 'phi_plus_3'
    or 'maximally_mixed_4' into a validated state."""
    key = name.strip()
    if key in _REGISTRY:
        return as_state(_REGISTRY[key](), purity_hint=key != "maximally_mixed")
    m = re.fullmatch(r"w(\d+)", key)
    if m:
        return as_state(dm(uniform_superposition(int(m.group(1)))), purity_hint=True)
    m = re.fullmatch(r"phi_plus(?:_(\d+))?", key)
    if m:
        d = int(m.group(1)) if m.group(1) else 2
        return as_state(dm(max_entangled_vector(d)), purity_hint=True)
    m = re.fullmatch(r"maximally_mixed(?:_(\d+))?", key)
    if m:
        d = int(m.group(1)) if m.group(1) else 2
        return as_state(maximally_mixed(d))
    m = re.fullmatch(r"basis(\d+)_(\d+)", key)
    if m:
        k, d = int(m.group(1)), int(m.group(2))
        if k >= d:
            raise InvalidInput(f"basis index {k} out of range for dimension {d}")
        v = np.zeros(d)
        v[k] = 1.0
        return as_state(dm(v), purity_hint=True)
    raise InvalidInput(f"unknown state name {name!r}")


def known_state_names() -> list[str]:
    return sorted(_REGISTRY) + ["w<d>", "phi_plus_<d>", "maximally_mixed_<d>", "basis<k>_<d>"]


# ---------------------------------------------------------------------------
# seeded sampling


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R).copy()
    ph /= np.abs(ph)
    return Q * ph.conj()


def random_pure_state(d: int, rng: np.random.Generator) -> QuantumState:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return as_state(dm(v), purity_hint=True)


def random_mixed_state(d: int, rng: np.random.Generator) -> QuantumState:
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = G @ dagger(G)
    return as_state(rho / np.trace(rho).real)


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * (G + dagger(G)) / 2
