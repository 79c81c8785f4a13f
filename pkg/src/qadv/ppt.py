"""Feasibility machinery for the positive-partial-transpose state set.

Bisection plus Dykstra alternating projections drive three queries used by the
solver and the entanglement construction: membership-style feasibility at a
mixing level, the support value max Tr(sigma X) over PPT states, and the
largest scale at which a direction can be certified as a valid witness via the
complementary linear matrix inequality y*D + G^(T_B) <= I with G >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLS, Tolerances
from .errors import InvalidInput
from .linalg import dagger, hermitian_part, partial_transpose, project_psd


def _pt(M: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    return partial_transpose(M, dims[0], dims[1])


def is_ppt_state(rho: np.ndarray, dims: tuple[int, int], tol: float = 1e-10) -> bool:
    if np.linalg.eigvalsh(hermitian_part(rho))[0] < -tol:
        return False
    return np.linalg.eigvalsh(hermitian_part(_pt(rho, dims)))[0] >= -tol


def clean_ppt_state(sigma: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """Blend with the maximally mixed state until exactly PPT-feasible."""
    d = sigma.shape[0]
    s = hermitian_part(sigma)
    tr = float(np.real(np.trace(s)))
    if tr <= 0:
        return np.eye(d, dtype=complex) / d
    s = s / tr
    lam = min(
        float(np.linalg.eigvalsh(s)[0]),
        float(np.linalg.eigvalsh(hermitian_part(_pt(s, dims)))[0]),
        0.0,
    )
    if lam < 0:
        beta = min(1.0, (-lam * d) / (1.0 - lam * d) * 1.5 + 1e-15)
        s = (1 - beta) * s + beta * np.eye(d) / d
    return s


@dataclass
class DykstraResult:
    feasible: bool
    point: np.ndarray
    violation: float
    cycles: int


def dykstra_feasibility(
    x0: np.ndarray,
    projections,
    violations,
    tols: Tolerances = DEFAULT_TOLS,
    feas_tol: float = 1e-9,
    max_cycles: int | None = None,
) -> DykstraResult:
    """Dykstra alternating projections with stall-based emptiness detection.

    ``projections`` is a list of exact Frobenius projections onto convex sets,
    ``violations`` a matching list of scalar infeasibility measures. When the
    intersection is empty the iterate distance stalls; after
    ``tols.dykstra_stall_rounds`` cycles without progress above
    ``tols.dykstra_stall`` the set is declared empty.
    """
    x = x0.copy()
    incs = [np.zeros_like(x0) for _ in projections]
    best = np.inf
    stall = 0
    max_cycles = max_cycles or tols.dykstra_max_cycles
    for cycle in range(1, max_cycles + 1):
        for i, proj in enumerate(projections):
            y = proj(x + incs[i])
            incs[i] = x + incs[i] - y
            x = y
        viol = max(v(x) for v in violations)
        if viol <= feas_tol:
            return DykstraResult(True, x, viol, cycle)
        if viol < best - tols.dykstra_stall:
            best = viol
            stall = 0
        else:
            stall += 1
            if stall >= tols.dykstra_stall_rounds and best > tols.dykstra_stall:
                return DykstraResult(False, x, viol, cycle)
    return DykstraResult(False, x, best, max_cycles)


def _proj_trace_one(s: np.ndarray) -> np.ndarray:
    d = s.shape[0]
    s = hermitian_part(s)
    return s - (np.trace(s).real - 1.0) / d * np.eye(d)


def feasibility_at_ppt(
    rho: np.ndarray,
    s: float,
    dims: tuple[int, int],
    tols: Tolerances = DEFAULT_TOLS,
    start: np.ndarray | None = None,
    max_cycles: int | None = None,
) -> DykstraResult:
    """Is there a PPT state sigma with (1+s) sigma - rho >= 0?"""
    d = rho.shape[0]
    x0 = start if start is not None else np.eye(d, dtype=complex) / d

    def proj_shift(x):
        return (project_psd((1 + s) * x - rho) + rho) / (1 + s)

    def proj_ppt(x):
        return _pt(project_psd(_pt(x, dims)), dims)

    projections = [proj_shift, proj_ppt, _proj_trace_one]
    violations = [
        lambda x: max(0.0, -float(np.linalg.eigvalsh(hermitian_part((1 + s) * x - rho))[0])),
        lambda x: max(0.0, -float(np.linalg.eigvalsh(hermitian_part(_pt(x, dims)))[0])),
        lambda x: abs(float(np.trace(x).real) - 1.0),
    ]
    return dykstra_feasibility(x0, projections, violations, tols, max_cycles=max_cycles)


def ppt_support_value(
    X: np.ndarray,
    dims: tuple[int, int],
    tols: Tolerances = DEFAULT_TOLS,
    max_cycles_per_level: int = 800,
) -> float:
    """max Tr(sigma X) over PPT states, by bisection on the achieved level.

    Returns the highest level certified by an explicit (cleaned) PPT state;
    the bracket is tightened to ``tols.ppt_support_width``.
    """
    X = hermitian_part(X)
    d = X.shape[0]
    if d != dims[0] * dims[1]:
        raise InvalidInput("observable dimension does not match the bipartition")

    def value_of(sigma):
        return float(np.real(np.trace(clean_ppt_state(sigma, dims) @ X)))

    lo = value_of(np.eye(d) / d)
    hi = float(np.linalg.eigvalsh(X)[-1])
    if hi - lo <= tols.ppt_support_width:
        return lo
    nX2 = float(np.real(np.trace(X @ X)))
    sigma_start = np.eye(d, dtype=complex) / d
    while hi - lo > tols.ppt_support_width:
        lam = (lo + hi) / 2

        def proj_half(x, lam=lam):
            gap = lam - float(np.real(np.trace(x @ X)))
            return x + (gap / nX2) * X if gap > 0 else x

        def proj_ppt(x):
            return _pt(project_psd(_pt(x, dims)), dims)

        projections = [proj_half, lambda x: project_psd(x), proj_ppt, _proj_trace_one]
        violations = [
            lambda x, lam=lam: max(0.0, lam - float(np.real(np.trace(x @ X)))),
            lambda x: max(0.0, -float(np.linalg.eigvalsh(hermitian_part(x))[0])),
            lambda x: max(0.0, -float(np.linalg.eigvalsh(hermitian_part(_pt(x, dims)))[0])),
            lambda x: abs(float(np.trace(x).real) - 1.0),
        ]
        res = dykstra_feasibility(
            sigma_start, projections, violations, tols, max_cycles=max_cycles_per_level
        )
        achieved = value_of(res.point)
        lo = max(lo, achieved)
        if res.feasible:
            sigma_start = res.point
            lo = max(lo, lam)
        else:
            hi = lam
        if hi <= lo:
            break
    return lo


def seesaw_product_max(
    X: np.ndarray,
    dims: tuple[int, int],
    rng: np.random.Generator,
    starts: int = 8,
    iters: int = 200,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Best product-state overlap max <ab|X|ab> via alternating eigenvector
    ascent from several random starts. Returns (value, a, b)."""
    dA, dB = dims
    X4 = hermitian_part(X).reshape(dA, dB, dA, dB)
    best = (-np.inf, None, None)
    for _ in range(starts):
        a = rng.standard_normal(dA) + 1j * rng.standard_normal(dA)
        b = rng.standard_normal(dB) + 1j * rng.standard_normal(dB)
        a /= np.linalg.norm(a)
        b /= np.linalg.norm(b)
        prev = -np.inf
        for _ in range(iters):
            Ma = np.einsum("ikjl,k,l->ij", X4, b.conj(), b)
            w, V = np.linalg.eigh(hermitian_part(Ma))
            a = V[:, -1]
            Mb = np.einsum("ikjl,i,j->kl", X4, a.conj(), a)
            w, V = np.linalg.eigh(hermitian_part(Mb))
            b = V[:, -1]
            val = float(w[-1])
            if val - prev < 1e-14:
                break
            prev = val
        if prev > best[0]:
            best = (prev, a.copy(), b.copy())
    return best


def witness_scale_lmi(
    D: np.ndarray,
    dims: tuple[int, int],
    tols: Tolerances = DEFAULT_TOLS,
    width: float = 1e-7,
    max_cycles: int = 600,
) -> tuple[float, np.ndarray]:
    """Largest y with a certificate G >= 0 such that y*D + G^(T_B) <= I.

    y*D is then a PPT witness scaled to support value <= 1 exactly (after the
    final rescale). Returns (y, G).
    """
    D = hermitian_part(D)
    d = D.shape[0]
    I = np.eye(d)
    y_lo, G_lo = 0.0, np.zeros((d, d), dtype=complex)
    y_hi = dims[0] * dims[1] / max(float(np.real(np.trace(D))), 1e-12) + 1.0

    def feasible(y, G_start):
        B = I - y * D

        def proj_psd_g(G):
            return project_psd(G)

        def proj_lmi(G):
            # project G^(T_B) onto {Z <= B}, then transpose back
            Z = _pt(G, dims)
            Z = B - project_psd(B - Z)
            return _pt(Z, dims)

        violations = [
            lambda G: max(0.0, -float(np.linalg.eigvalsh(hermitian_part(G))[0])),
            lambda G: max(
                0.0, -float(np.linalg.eigvalsh(hermitian_part(B - _pt(G, dims)))[0])
            ),
        ]
        return dykstra_feasibility(
            G_start, [proj_psd_g, proj_lmi], violations, tols, max_cycles=max_cycles
        )

    while y_hi - y_lo > width:
        y = (y_lo + y_hi) / 2
        res = feasible(y, G_lo)
        if res.feasible:
            y_lo, G_lo = y, res.point
        else:
            y_hi = y
    # exact rescale so the inequality holds with no slack
    G = project_psd(G_lo)
    if y_lo <= 0:
        return 0.0, np.zeros((d, d), dtype=complex)
    top = float(np.linalg.eigvalsh(hermitian_part(y_lo * D + _pt(G, dims)))[-1])
    if top > 1.0:
        return y_lo / top, G / top
    return y_lo, G


def ppt_dual_ascent(
    rho: np.ndarray,
    dims: tuple[int, int],
    target: float,
    tols: Tolerances = DEFAULT_TOLS,
    X0: np.ndarray | None = None,
    G0: np.ndarray | None = None,
    outer_iters: int = 150,
    cycles: int = 60,
) -> tuple[float, np.ndarray, np.ndarray, int]:
    """Projected supergradient ascent of Tr(rho X) over the PPT-witness set.

    Variables (X, G, S) live on the affine slice X + G^(T_B) + S = I with all
    three positive semidefinite; Polyak-sized steps aim at ``target``. Returns
    the best exactly-feasibilized value with its (X, G) pair and the iteration
    count.
    """
    d = rho.shape[0]
    I = np.eye(d)
    X = X0.copy() if X0 is not None else I / 2
    G = G0.copy() if G0 is not None else np.zeros((d, d), dtype=complex)
    S = I - X - _pt(G, dims)
    nrho2 = float(np.real(np.trace(rho @ rho)))
    best_val, best_X, best_G = -np.inf, X.copy(), G.copy()
    iterations = 0

    def proj_affine(z):
        x, g, s = z
        corr = (x + _pt(g, dims) + s - I) / 3
        return (x - corr, g - _pt(corr, dims), s - corr)

    def proj_cones(z):
        return tuple(project_psd(m) for m in z)

    for _ in range(outer_iters):
        cur = float(np.real(np.trace(rho @ X)))
        if cur >= target - 1e-10 and best_val >= target - 1e-10:
            break
        step = max(1e-4, target - cur) / max(nrho2, 1e-12)
        X = X + step * rho
        # two-set Dykstra on the product space: affine slice vs PSD^3
        z = (X, G, S)
        p_aff = tuple(np.zeros((d, d), dtype=complex) for _ in range(3))
        p_psd = tuple(np.zeros((d, d), dtype=complex) for _ in range(3))
        for _ in range(cycles):
            iterations += 1
            shifted = tuple(a + b for a, b in zip(z, p_aff))
            y = proj_affine(shifted)
            p_aff = tuple(a - b for a, b in zip(shifted, y))
            z = y
            shifted = tuple(a + b for a, b in zip(z, p_psd))
            y = proj_cones(shifted)
            p_psd = tuple(a - b for a, b in zip(shifted, y))
            z = y
        X, G, S = z
        # exact feasibilization of the current pair for value tracking
        Xc, Gc = project_psd(X), project_psd(G)
        top = float(np.linalg.eigvalsh(hermitian_part(Xc + _pt(Gc, dims)))[-1])
        scale = max(1.0, top)
        val = float(np.real(np.trace(rho @ Xc))) / scale
        if val > best_val:
            best_val, best_X, best_G = val, Xc / scale, Gc / scale
        if best_val >= target - 1e-9:
            break
    return best_val, best_X, best_G, iterations
