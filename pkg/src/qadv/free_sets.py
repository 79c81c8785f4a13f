"""Convex free-state sets and the two queries every construction needs.

A free set is either an explicit-vertex polytope (incoherent states,
single- and two-qubit stabilizer hulls, user polytopes) or the PPT-characterized
separable set for small bipartitions. The module answers support-value and
membership queries; robustness itself lives in :mod:`qadv.robustness`.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.optimize import nnls

from . import ppt
from .config import DEFAULT_TOLS, Tolerances
from .errors import InvalidInput, NoFullRankFreeState
from .linalg import PAULI_I, PAULI_X, PAULI_Y, PAULI_Z, from_bloch, hermitian_part, kron
from .states import QuantumState, as_state, maximally_mixed, state_matrix

POLYTOPE_KINDS = ("polytope", "incoherent", "stabilizer_qubit", "stabilizer_two_qubit")


@dataclass(frozen=True)
class FreeSet:
    kind: str
    dim: int
    vertices: np.ndarray | None = None          # (m, d, d) for polytope kinds
    dims: tuple[int, int] | None = None         # bipartition for separable_ppt

    @property
    def is_polytope(self) -> bool:
        return self.kind in POLYTOPE_KINDS

    def describe(self) -> str:
        if self.kind == "separable_ppt":
            return f"separable_ppt({self.dims[0]}x{self.dims[1]})"
        n = 0 if self.vertices is None else len(self.vertices)
        return f"{self.kind}(d={self.dim}, {n} vertices)"


@dataclass(frozen=True)
class MeasurementClass:
    """POVM restriction: unconstrained, free, or rank-one free elements."""

    kind: str = "unconstrained"
    free_set: FreeSet | None = None

    def __post_init__(self):
        if self.kind not in ("unconstrained", "free", "rank_one_free"):
            raise InvalidInput(f"unknown measurement class {self.kind!r}")
        if self.kind != "unconstrained" and self.free_set is None:
            raise InvalidInput("constrained measurement classes need a free set")


UNCONSTRAINED = MeasurementClass()


def _stabilizer_qubit_vertices() -> np.ndarray:
    corners = [
        (1, 0, 0), (-1, 0, 0),
        (0, 1, 0), (0, -1, 0),
        (0, 0, 1), (0, 0, -1),
    ]
    return np.stack([from_bloch(c) for c in corners])


def _pauli_basis_two_qubit() -> list[np.ndarray]:
    singles = [PAULI_I, PAULI_X, PAULI_Y, PAULI_Z]
    return [kron(a, b) for a, b in product(singles, repeat=2)]


def _stabilizer_two_qubit_vertices() -> np.ndarray:
    """Common eigenstates of the maximal abelian two-qubit Pauli subgroups.

    Brute force over commuting pairs of nontrivial Paulis and the four sign
    choices of their generators, deduplicated by state fidelity.
    """
    basis = _pauli_basis_two_qubit()
    nontrivial = list(range(1, 16))
    groups: set[frozenset[int]] = set()
    pairs: dict[frozenset[int], tuple[int, int]] = {}
    for i in nontrivial:
        for j in nontrivial:
            if j <= i:
                continue
            Pi, Pj = basis[i], basis[j]
            if np.abs(Pi @ Pj - Pj @ Pi).max() > 1e-12:
                continue
            prod_mat = Pi @ Pj
            k = next(
                k for k in nontrivial
                if abs(abs(np.trace(basis[k].conj().T @ prod_mat)) - 4.0) < 1e-9
            )
            key = frozenset((i, j, k))
            if key not in groups:
                groups.add(key)
                pairs[key] = (i, j)
    states: list[np.ndarray] = []
    I4 = np.eye(4, dtype=complex)
    for key in sorted(groups, key=sorted):
        i, j = pairs[key]
        for s1, s2 in product((1, -1), repeat=2):
            proj = (I4 + s1 * basis[i]) @ (I4 + s2 * basis[j]) / 4
            proj = hermitian_part(proj)
            if abs(np.trace(proj).real - 1.0) > 1e-9:
                continue
            if not any(abs(np.trace(proj @ s).real - 1.0) < 1e-10 for s in states):
                states.append(proj)
    return np.stack(states)


def polytope_weights(vertices: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, float]:
    """Nonnegative mixture weights reproducing ``target``, via least squares.

    Returns (weights, residual); the residual is the Frobenius distance of the
    best convex combination (weights renormalized to unit sum) from the target.
    """
    m = len(vertices)
    cols = [np.concatenate([v.real.ravel(), v.imag.ravel(), [1.0]]) for v in vertices]
    A = np.stack(cols, axis=1)
    b = np.concatenate([target.real.ravel(), target.imag.ravel(), [1.0]])
    w, _ = nnls(A, b)
    s = w.sum()
    if s > 1e-12:
        w = w / s
    mix = np.einsum("k,kij->ij", w, vertices)
    residual = float(np.linalg.norm(mix - target))
    return w, residual


def make_free_set(
    kind: str,
    dim: int | None = None,
    dims: tuple[int, int] | None = None,
    vertices=None,
    tols: Tolerances = DEFAULT_TOLS,
) -> FreeSet:
    """Construct a free set of the given kind.

    kinds: 'incoherent' (needs dim), 'stabilizer_qubit', 'stabilizer_two_qubit',
    'separable_ppt' (needs dims, product <= 6), 'polytope' (needs vertices).
    """
    if kind == "incoherent":
        if dim is None or dim < 2:
            raise InvalidInput("incoherent set needs a dimension >= 2")
        verts = np.stack([np.diag(np.eye(dim)[i]).astype(complex) for i in range(dim)])
    elif kind == "stabilizer_qubit":
        verts = _stabilizer_qubit_vertices()
        dim = 2
    elif kind == "stabilizer_two_qubit":
        verts = _stabilizer_two_qubit_vertices()
        dim = 4
    elif kind == "separable_ppt":
        if dims is None:
            raise InvalidInput("separable_ppt needs the bipartition dims")
        da, db = int(dims[0]), int(dims[1])
        if da * db > 6:
            raise InvalidInput(
                "separable_ppt supports products up to 6 (PPT equals separability "
                "only for 2x2 and 2x3)"
            )
        return FreeSet(kind="separable_ppt", dim=da * db, dims=(da, db))
    elif kind == "polytope":
        if vertices is None or len(vertices) < 1:
            raise InvalidInput("polytope needs at least one vertex")
        verts = np.stack([as_state(v, tols).matrix for v in vertices])
        dim = verts.shape[1]
    else:
        raise InvalidInput(f"unknown free-set kind {kind!r}")

    for v in verts:
        as_state(v, tols)
    _, residual = polytope_weights(verts, maximally_mixed(dim))
    if residual > 1e-8:
        raise NoFullRankFreeState(
            "free set must contain the maximally mixed state "
            f"(best mixture misses it by {residual:.3e})"
        )
    return FreeSet(kind=kind, dim=dim, vertices=verts)


def support_value(F: FreeSet, X, tols: Tolerances = DEFAULT_TOLS) -> float:
    """max Tr(sigma X) over the free set.

    Exact vertex maximum for polytopes; bisection with alternating-projection
    feasibility for the PPT set.
    """
    Xm = hermitian_part(np.asarray(X, dtype=complex))
    if Xm.shape[0] != F.dim:
        raise InvalidInput(
            f"observable dimension {Xm.shape[0]} does not match free set dim {F.dim}"
        )
    if F.is_polytope:
        vals = np.einsum("kij,ji->k", F.vertices, Xm).real
        return float(vals.max())
    return ppt.ppt_support_value(Xm, F.dims, tols)


def membership(F: FreeSet, rho, tol: float | None = None, tols: Tolerances = DEFAULT_TOLS) -> bool:
    """True iff the generalized robustness of rho with respect to F is <= tol."""
    from .robustness import generalized_robustness

    if tol is None:
        tol = tols.membership
    if tol <= 0:
        raise InvalidInput("membership tolerance must be positive")
    rho_m = state_matrix(rho)
    if F.is_polytope:
        _, residual = polytope_weights(F.vertices, rho_m)
        if residual <= tols.combination_residual * (1 + np.abs(rho_m).max()):
            return True
    elif ppt.is_ppt_state(rho_m, F.dims):
        return True
    cert = generalized_robustness(as_state(rho_m, tols), F, tols)
    return cert.value <= tol


def incoherent(dim: int) -> FreeSet:
    return make_free_set("incoherent", dim=dim)


def stabilizer_qubit() -> FreeSet:
    return make_free_set("stabilizer_qubit")


def stabilizer_two_qubit() -> FreeSet:
    return make_free_set("stabilizer_two_qubit")


def separable_ppt(da: int = 2, db: int = 2) -> FreeSet:
    return make_free_set("separable_ppt", dims=(da, db))


def free_set_summary(F: FreeSet) -> dict:
    out = {"kind": F.kind, "dim": F.dim}
    if F.dims is not None:
        out["dims"] = list(F.dims)
    if F.vertices is not None:
        out["num_vertices"] = int(len(F.vertices))
    return out
