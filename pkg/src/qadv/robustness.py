"""Generalized robustness solver with certified primal and dual bounds.

The primal side brackets the minimal mixing weight s by bisection, deciding
feasibility at each level with Frank-Wolfe ascent of the concave map
sigma -> lambda_min((1+s) sigma - rho) over the free polytope (alternating
projections for the PPT set). Every Frank-Wolfe iterate doubles as a bound
generator: minimal eigenvectors yield exactly-feasible dual witnesses, and
feasible mixtures yield exact upper bounds on s. A complementarity polish on
the kernel of the optimal slack operator then closes the interval to well
below the reported duality-gap tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from . import ppt
from .config import DEFAULT_TOLS, Tolerances
from .errors import InvalidInput, NonConvergence
from .free_sets import FreeSet, polytope_weights
from .linalg import hermitian_part, project_psd
from .states import QuantumState, as_state, maximally_mixed, state_matrix


@dataclass(frozen=True)
class WitnessOperator:
    """Feasible dual witness: X >= 0 with support value at most one on F."""

    X: np.ndarray
    scale: float
    support_value_on_F: float


@dataclass
class RobustnessCertificate:
    value: float                      # certified upper bound on R (the reported robustness)
    primal_value: float               # same scale as value
    dual_value: float                 # certified lower bound on R
    gap: float
    witness: WitnessOperator
    optimal_sigma: QuantumState
    optimal_tau: QuantumState | None
    iterations: int
    tolerance_used: float
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# shared helpers


def _s_needed(rho: np.ndarray, sigma: np.ndarray, cut: float = 1e-12) -> float:
    """Exact minimal s with (1+s) sigma >= rho, or inf if unsupported."""
    w, U = np.linalg.eigh(hermitian_part(sigma))
    top = float(w[-1])
    if top <= 0:
        return np.inf
    keep = w > cut * top
    rho_t = U.conj().T @ rho @ U
    if not np.all(keep):
        off = rho_t[:, ~keep]
        if np.abs(off).max(initial=0.0) > 1e-9:
            return np.inf
    wk = w[keep]
    B = rho_t[np.ix_(keep, keep)] / np.sqrt(np.outer(wk, wk))
    s = max(float(np.linalg.eigvalsh(hermitian_part(B))[-1]) - 1.0, 0.0)
    # verify and nudge until the shifted operator is numerically PSD
    for _ in range(6):
        lam = float(np.linalg.eigvalsh(hermitian_part((1 + s) * sigma - rho))[0])
        if lam >= -1e-12:
            return s
        s = s * (1 + 1e-12) + 10 * (-lam) / max(top, 1e-12)
    return np.inf


def _recover_tau(rho, sigma, s, tols: Tolerances):
    if s <= 1e-9:
        return None
    A = hermitian_part(((1 + s) * sigma - rho) / s)
    w, V = np.linalg.eigh(A)
    clipped = float(-w[w < 0].sum())
    if clipped > tols.tau_clip_mass or w.min(initial=0.0) < -tols.tau_clip * 10:
        if clipped > tols.tau_clip_mass:
            return None
    w = np.maximum(w, 0.0)
    tau = (V * w) @ V.conj().T
    tr = float(np.trace(tau).real)
    if tr <= 0:
        return None
    return as_state(tau / tr, tols)


# ---------------------------------------------------------------------------
# polytope machinery


@dataclass
class _FWOutcome:
    status: str                      # "feasible" | "infeasible" | "undecided"
    sigma: np.ndarray
    weights: np.ndarray
    best_lambda: float
    iterations: int
    dual_value: float                # best exactly-feasible dual value seen
    dual_direction: np.ndarray | None


def _fw_feasibility(
    rho: np.ndarray,
    V: np.ndarray,
    s: float,
    tols: Tolerances,
    sigma0: np.ndarray | None = None,
    weights0: np.ndarray | None = None,
    budget: int | None = None,
) -> _FWOutcome:
    """Frank-Wolfe ascent of lambda_min((1+s) sigma - rho) over conv(V).

    Stops early with a certificate on either side: an iterate with
    lambda_min >= -slack proves feasibility, while a minimal eigenvector u
    with u.rho.u > (1+s) max_k u.v_k.u proves emptiness (and is itself a
    scaled dual witness).
    """
    m, d, _ = V.shape
    budget = budget or tols.fw_max_iter
    if sigma0 is None:
        weights = np.full(m, 1.0 / m)
        sigma = V.mean(axis=0)
    else:
        sigma = sigma0.copy()
        weights = weights0.copy() if weights0 is not None else np.full(m, 1.0 / m)
    best_dual, best_u = -np.inf, None
    best_lam = -np.inf
    for k in range(budget):
        A = (1 + s) * sigma - rho
        w_eigs, vecs = np.linalg.eigh(hermitian_part(A))
        lam = float(w_eigs[0])
        if lam > best_lam:
            best_lam = lam
        if lam >= -tols.feasibility_slack:
            return _FWOutcome("feasible", sigma, weights, lam, k + 1, best_dual, best_u)
        u = vecs[:, 0]
        g = np.einsum("kij,j,i->k", V, u, u.conj()).real
        maxg = float(g.max())
        j = int(np.argmax(g))  # ties resolve to the lowest vertex index
        uru = float(np.real(u.conj() @ rho @ u))
        val = uru / maxg
        if val > best_dual:
            best_dual, best_u = val, u.copy()
        if val > (1 + s) * (1 + 1e-14):
            return _FWOutcome("infeasible", sigma, weights, lam, k + 1, best_dual, best_u)
        gamma = 2.0 / (k + 2.0)
        sigma = (1 - gamma) * sigma + gamma * V[j]
        weights *= 1 - gamma
        weights[j] += gamma
    return _FWOutcome("undecided", sigma, weights, best_lam, budget, best_dual, best_u)


def _dual_ascent_polytope(
    rho: np.ndarray,
    V: np.ndarray,
    target: float,
    tols: Tolerances,
    Y0: np.ndarray | None = None,
    outer_iters: int = 120,
    cycles: int = 25,
    trace_values: list | None = None,
) -> tuple[float, np.ndarray, int]:
    """Projected supergradient ascent of Tr(rho X) over the witness set.

    Feasible set: {X >= 0} intersected with the per-vertex halfspaces
    Tr(v_k X) <= 1; Dykstra cycles provide the projection, Polyak-sized steps
    aim at ``target``. Iterates are exactly feasibilized (PSD clip and support
    rescale) before their values are recorded, so every reported value is a
    true lower bound.
    """
    m, d, _ = V.shape
    X = Y0.copy() if Y0 is not None else np.eye(d, dtype=complex)
    norms2 = np.einsum("kij,kij->k", V, V.conj()).real
    nrho2 = float(np.real(np.trace(rho @ rho)))
    iterations = 0

    def feasibilize(M):
        Mc = project_psd(M)
        sup = float(np.einsum("kij,ji->k", V, Mc).real.max())
        if sup > 1.0:
            Mc = Mc / sup
        return Mc

    Xc = feasibilize(X)
    best_val = float(np.real(np.trace(rho @ Xc)))
    best_X = Xc
    if trace_values is not None:
        trace_values.append(best_val)
    for _ in range(outer_iters):
        cur = float(np.real(np.trace(rho @ X)))
        step = max(1e-4, target - cur) / max(nrho2, 1e-12)
        X = X + step * rho
        incs = [np.zeros((d, d), dtype=complex) for _ in range(m + 1)]
        for _ in range(cycles):
            iterations += 1
            shifted = X + incs[0]
            Xn = project_psd(shifted)
            incs[0] = shifted - Xn
            X = Xn
            for k in range(m):
                shifted = X + incs[k + 1]
                ex = float(np.real(np.trace(V[k] @ shifted))) - 1.0
                Xn = shifted - (ex / norms2[k]) * V[k] if ex > 0 else shifted
                incs[k + 1] = shifted - Xn
                X = Xn
        Xc = feasibilize(X)
        val = float(np.real(np.trace(rho @ Xc)))
        if trace_values is not None and len(trace_values) < 512:
            trace_values.append(val)
        if val > best_val:
            best_val, best_X = val, Xc
        if best_val >= target - 1e-10:
            break
    return best_val, best_X, iterations


def _reduced_dual_ascent(rho_r, V_r, target, tols, outer_iters=80, cycles=15, Y0=None):
    """Same ascent restricted to the kernel subspace of the primal slack."""
    return _dual_ascent_polytope(rho_r, V_r, target, tols, Y0, outer_iters, cycles)


def _polish_dual_polytope(rho, V, A_hat, hi, tols, X_warm=None):
    """Dual candidates from the kernel structure of the slack operator.

    At the optimum the witness is supported on ker((1+R) sigma* - rho); a
    one-dimensional kernel gives a closed-form rank-one witness, otherwise a
    short ascent runs inside the kernel subspace. All candidates are exactly
    feasible by construction.
    """
    w, U = np.linalg.eigh(hermitian_part(A_hat))
    scale = 1.0 + abs(float(w[-1]))
    candidates = []
    iters = 0
    thresholds = (1e-8, 1e-6, 1e-4, 1e-2, 5e-2)
    ranks = sorted({int(np.sum(w <= thr * scale)) for thr in thresholds})
    for r in ranks:
        if r < 1 or r > A_hat.shape[0]:
            continue
        Q = U[:, :r]
        if r == 1:
            u = Q[:, 0]
            g = np.einsum("kij,j,i->k", V, u, u.conj()).real
            maxg = float(g.max())
            if maxg <= 1e-14:
                continue
            X = np.outer(u, u.conj()) / maxg
            candidates.append((float(np.real(u.conj() @ rho @ u)) / maxg, X))
        else:
            rho_r = Q.conj().T @ rho @ Q
            V_r = np.einsum("ai,kab,bj->kij", Q.conj(), V, Q)
            Y0 = None
            if X_warm is not None:
                Y0 = Q.conj().T @ X_warm @ Q
            val, Y, it = _reduced_dual_ascent(rho_r, V_r, 1.0 + hi, tols, Y0=Y0)
            iters += it
            X = Q @ Y @ Q.conj().T
            candidates.append((val, X))
    if not candidates:
        return -np.inf, None, iters
    val, X = max(candidates, key=lambda t: t[0])
    return val, X, iters


def _hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal real basis of the d x d Hermitian matrices."""
    out = []
    for i in range(d):
        B = np.zeros((d, d), dtype=complex)
        B[i, i] = 1.0
        out.append(B)
    s = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            B = np.zeros((d, d), dtype=complex)
            B[i, j] = B[j, i] = s
            out.append(B)
            B = np.zeros((d, d), dtype=complex)
            B[i, j] = -1j * s
            B[j, i] = 1j * s
            out.append(B)
    return np.stack(out)


def _kkt_newton(rho, V, S, X0, mu0, w_identity, tols, iters=12, depth=0):
    """Gauss-Newton solve of the optimality system on an active vertex set.

    Unknowns are the mixture weights mu on S and a Hermitian witness X; the
    equations are complementary slackness (sum mu_k v_k - rho) X = 0 and
    tightness Tr(v_k X) = 1 on S. Returns exactly certified
    (primal_bound, sigma, weights, dual_bound, X) or None if verification
    fails.
    """
    d = rho.shape[0]
    m = len(V)
    t = len(S)
    if t == 0:
        return None
    basis = _hermitian_basis(d)
    nb = len(basis)
    Vs = V[S]
    x = np.einsum("bij,ji->b", basis, X0).real.copy()
    mu = mu0[S].astype(float).copy() if mu0 is not None else np.full(t, 1.0 / t)

    tight_rows = np.einsum("kij,bji->kb", Vs, basis).real  # d Tr(v_k X)/dx
    for _ in range(iters):
        X = np.einsum("b,bij->ij", x, basis)
        A = np.einsum("k,kij->ij", mu, Vs) - rho
        R1 = A @ X
        R2 = np.einsum("kij,ji->k", Vs, X).real - 1.0
        res = np.concatenate([R1.real.ravel(), R1.imag.ravel(), R2])
        if np.linalg.norm(res) < 1e-14:
            break
        Jmu = np.stack(
            [np.concatenate([(Vs[k] @ X).real.ravel(), (Vs[k] @ X).imag.ravel(),
                             np.zeros(t)]) for k in range(t)], axis=1)
        Jx = np.stack(
            [np.concatenate([(A @ basis[b]).real.ravel(), (A @ basis[b]).imag.ravel(),
                             tight_rows[:, b]]) for b in range(nb)], axis=1)
        J = np.concatenate([Jmu, Jx], axis=1)
        delta, *_ = np.linalg.lstsq(J, -res, rcond=None)
        mu += delta[:t]
        x += delta[t:]

    # certification: clip, correct, verify both sides exactly
    X = np.einsum("b,bij->ij", x, basis)
    X = project_psd(X)
    sup = float(np.einsum("kij,ji->k", V, X).real.max())
    if sup <= 1e-12:
        return None
    X = X / sup
    dual_bound = float(np.real(np.trace(rho @ X))) - 1.0

    mu = np.maximum(mu, 0.0)
    mu_full = np.zeros(m)
    mu_full[S] = mu
    A = np.einsum("k,kij->ij", mu_full, V) - rho
    lam = float(np.linalg.eigvalsh(hermitian_part(A))[0])
    certified = lam >= -1e-5
    if certified and lam < 0:
        mu_full = mu_full + (-lam) * d * w_identity
        A = np.einsum("k,kij->ij", mu_full, V) - rho
        certified = float(np.linalg.eigvalsh(hermitian_part(A))[0]) >= -1e-11
    total = float(mu_full.sum())
    if certified and total < 1.0 - 1e-9:
        certified = False
    if not certified:
        # a forced tie on a truly inactive vertex poisons the system; retry
        # on the subset that actually carries weight
        keep = S[mu > 1e-9 * max(mu.max(initial=0.0), 1e-30)]
        if 0 < len(keep) < t and depth < 2:
            return _kkt_newton(rho, V, keep, X0, mu0, w_identity, tols, iters, depth + 1)
        return None
    sigma = np.einsum("k,kij->ij", mu_full, V) / total
    return total - 1.0, sigma, mu_full / total, dual_bound, X


def _refine_primal_polytope(rho, V, X_best, w_identity, tols):
    """Primal certificate from complementary slackness.

    Vertices active on the witness carry the optimal mixture; the kernel
    condition (sum_k mu_k v_k) Q = rho Q pins the weights via nonnegative
    least squares. Any residual negativity is absorbed by adding a multiple of
    the identity decomposition, so the returned bound is exactly certified.
    """
    d = rho.shape[0]
    wX, UX = np.linalg.eigh(hermitian_part(X_best))
    r = int(np.sum(wX > 1e-7 * max(1.0, wX[-1])))
    if r == 0:
        return None
    Q = UX[:, -r:]
    vals = np.einsum("kij,ji->k", V, X_best).real
    for act_tol in (1e-6, 1e-4, 1e-2):
        S = np.nonzero(vals >= 1.0 - act_tol)[0]
        if len(S) == 0:
            continue
        cols = []
        for k in S:
            M = V[k] @ Q
            cols.append(np.concatenate([M.real.ravel(), M.imag.ravel()]))
        B = rho @ Q
        b = np.concatenate([B.real.ravel(), B.imag.ravel()])
        mu_s, res = nnls(np.stack(cols, axis=1), b)
        if res > 1e-7 * (1 + np.linalg.norm(b)):
            continue
        mu = np.zeros(len(V))
        mu[S] = mu_s
        A = np.einsum("k,kij->ij", mu, V) - rho
        lam = float(np.linalg.eigvalsh(hermitian_part(A))[0])
        if lam < -1e-5:
            continue
        if lam < 0:
            mu = mu + (-lam) * d * w_identity
            A = np.einsum("k,kij->ij", mu, V) - rho
            lam = float(np.linalg.eigvalsh(hermitian_part(A))[0])
            if lam < -1e-11:
                continue
        total = float(mu.sum())
        if total < 1.0 - 1e-9:
            continue
        sigma = np.einsum("k,kij->ij", mu, V) / total
        return max(total - 1.0, 0.0), sigma, mu / total
    return None


def _solve_polytope(rho_m, F: FreeSet, tols: Tolerances):
    V = F.vertices
    d = F.dim
    m = len(V)
    diagnostics: dict = {}
    iterations = 0

    w_free, res_free = polytope_weights(V, rho_m)
    if res_free <= tols.combination_residual * (1 + np.abs(rho_m).max()):
        X = np.eye(d, dtype=complex)
        witness = WitnessOperator(X=X, scale=1.0, support_value_on_F=1.0)
        sigma = np.einsum("k,kij->ij", w_free, V)
        return RobustnessCertificate(
            value=0.0, primal_value=0.0, dual_value=0.0, gap=0.0,
            witness=witness, optimal_sigma=as_state(sigma, tols), optimal_tau=None,
            iterations=0, tolerance_used=tols.duality_gap,
            diagnostics={"free_combination_residual": res_free},
        )

    w_identity, res_identity = polytope_weights(V, maximally_mixed(d))
    w_identity = w_identity  # unit-sum weights of I/d

    # certified upper bound from mixing toward the maximally mixed state
    hi = _s_needed(rho_m, maximally_mixed(d))
    lo = 0.0
    sigma_best = maximally_mixed(d)
    weights_best = w_identity.copy()
    dual_best, X_dual = 0.0, None
    soft_lo, soft_hi = lo, hi

    ascent_values: list[float] = []

    def absorb(outcome: _FWOutcome, level: float):
        nonlocal hi, lo, dual_best, X_dual, sigma_best, weights_best, iterations
        iterations += outcome.iterations
        if outcome.dual_value > dual_best + 1e-15 and outcome.dual_direction is not None:
            u = outcome.dual_direction
            g = np.einsum("kij,j,i->k", V, u, u.conj()).real
            maxg = float(g.max())
            if maxg > 1e-14:
                dual_best = outcome.dual_value
                X_dual = np.outer(u, u.conj()) / maxg
                lo = max(lo, dual_best - 1.0)
        if outcome.status == "feasible":
            sn = _s_needed(rho_m, outcome.sigma)
            if sn < hi:
                hi = sn
                sigma_best = outcome.sigma
                weights_best = outcome.weights

    # coarse bisection with early-exit certificates and warm starts; the
    # complementarity polish below carries the interval to full accuracy
    warm_sigma, warm_weights = None, None
    budget = 150
    rounds = 0
    while (hi - lo > 3e-3 or soft_hi - soft_lo > 3e-3) and rounds < 25:
        rounds += 1
        mid = (max(lo, soft_lo) + min(hi, soft_hi)) / 2
        out = _fw_feasibility(rho_m, V, mid, tols, warm_sigma, warm_weights, budget)
        absorb(out, mid)
        if out.status == "feasible":
            soft_hi = min(soft_hi, mid)
            warm_sigma, warm_weights = out.sigma, out.weights
        else:
            soft_lo = max(soft_lo, mid)
        soft_hi = min(soft_hi, hi)
        soft_lo = max(soft_lo, lo)
        if soft_hi <= soft_lo:
            soft_lo, soft_hi = lo, hi
        budget = min(600, budget + 150)

    # complementarity polish, then one more bisection pass if needed
    weights_refined = False
    attempts = 6 if m > 20 else 4
    stagnant = 0
    prev_gap = np.inf
    for attempt in range(attempts):
        if hi - lo > 0.9 * prev_gap:
            stagnant += 1
            if stagnant >= 2:
                break
        else:
            stagnant = 0
        prev_gap = hi - lo
        A_hat = (1 + hi) * sigma_best - rho_m
        val, X_cand, it = _polish_dual_polytope(rho_m, V, A_hat, hi, tols, X_warm=X_dual)
        iterations += it
        if X_cand is not None and val > dual_best:
            dual_best, X_dual = val, X_cand
            lo = max(lo, dual_best - 1.0)
        if X_dual is not None and hi - lo > 1e-7:
            # cheap first shot: active sets read off the mixture weights alone
            for tau_w in (1e-2, 1e-3, 1e-4):
                Sw = tuple(int(k) for k in np.nonzero(weights_best > tau_w)[0])
                if not Sw:
                    continue
                got = _kkt_newton(
                    rho_m, V, np.array(Sw), X_dual, weights_best * (1 + hi),
                    w_identity, tols,
                )
                iterations += 1
                if got is None:
                    continue
                p_cand, sig_cand, wts_cand, d_cand, X_new = got
                if p_cand < hi:
                    hi, sigma_best, weights_best = p_cand, sig_cand, wts_cand
                    weights_refined = True
                if d_cand + 1.0 > dual_best:
                    dual_best, X_dual = d_cand + 1.0, X_new
                lo = max(lo, dual_best - 1.0)
                if hi - lo <= 1e-9:
                    break
        if X_dual is not None and hi - lo > 5e-5:
            # degenerate optima (many active vertices) need the full-structure
            # ascent before active sets can be read off reliably
            big = m > 20
            val, X_asc, it = _dual_ascent_polytope(
                rho_m, V, 1.0 + hi, tols, X_dual,
                outer_iters=80 if big else 40, cycles=20 if big else 15,
            )
            iterations += it
            if val > dual_best:
                dual_best, X_dual = val, X_asc
                lo = max(lo, dual_best - 1.0)
        if X_dual is not None:
            refined = _refine_primal_polytope(rho_m, V, X_dual, w_identity, tols)
            if refined is not None and refined[0] < hi:
                hi, sigma_best, weights_best = refined
                weights_refined = True
            # Gauss-Newton on the optimality system over candidate active sets;
            # vertices carrying primal weight must be active by complementarity
            # (trustworthy only once the weights come from the refinement)
            vals = np.einsum("kij,ji->k", V, X_dual).real
            support = (
                set(int(k) for k in np.nonzero(weights_best > 1e-7)[0])
                if weights_refined else set()
            )
            tried: set[tuple] = set()
            for tau in (1e-6, 1e-4, 3e-3, 2e-2, 8e-2):
                active = {int(k) for k in np.nonzero(vals >= 1.0 - tau)[0]}
                for S in (tuple(sorted(active)), tuple(sorted(active | support))):
                    if not S or S in tried:
                        continue
                    tried.add(S)
                    got = _kkt_newton(
                        rho_m, V, np.array(S), X_dual, weights_best * (1 + hi),
                        w_identity, tols,
                    )
                    iterations += 1
                    if got is None:
                        continue
                    p_cand, sig_cand, wts_cand, d_cand, X_new = got
                    if p_cand < hi:
                        hi, sigma_best, weights_best = p_cand, sig_cand, wts_cand
                        weights_refined = True
                    if d_cand + 1.0 > dual_best:
                        dual_best, X_dual = d_cand + 1.0, X_new
                    lo = max(lo, dual_best - 1.0)
                if hi - lo <= 1e-9:
                    break
        if hi - lo <= max(tols.bisection_width, 1e-7):
            break
        out = _fw_feasibility(
            rho_m, V, (lo + hi) / 2, tols, sigma_best, weights_best,
            min(tols.fw_max_iter, 1000),
        )
        absorb(out, (lo + hi) / 2)

    # the stated ascent from the identity start; also records iterate values
    target = 1.0 + hi
    val, X_asc, it = _dual_ascent_polytope(
        rho_m, V, target, tols, None, outer_iters=25, cycles=12,
        trace_values=ascent_values,
    )
    iterations += it
    if val > dual_best:
        dual_best, X_dual = val, X_asc
        lo = max(lo, dual_best - 1.0)

    if X_dual is None:
        X_dual = np.eye(d, dtype=complex)
        dual_best = 1.0
    sup = float(np.einsum("kij,ji->k", V, X_dual).real.max())
    if sup > 0 and abs(sup - 1.0) > 1e-15:
        X_dual = X_dual / sup
        dual_best = float(np.real(np.trace(rho_m @ X_dual)))
        lo = max(lo, dual_best - 1.0)
    sup = float(np.einsum("kij,ji->k", V, X_dual).real.max())

    gap = max(hi - lo, 0.0)
    diagnostics["ascent_values"] = ascent_values
    diagnostics["weak_duality_slack"] = max(0.0, (dual_best - 1.0) - hi)
    diagnostics["primal_interval"] = [lo, hi]

    witness = WitnessOperator(
        X=X_dual,
        scale=float(np.linalg.eigvalsh(hermitian_part(X_dual))[-1]),
        support_value_on_F=sup,
    )
    tau = _recover_tau(rho_m, sigma_best, hi, tols)
    cert = RobustnessCertificate(
        value=hi, primal_value=hi, dual_value=lo, gap=gap,
        witness=witness, optimal_sigma=as_state(sigma_best, tols), optimal_tau=tau,
        iterations=iterations, tolerance_used=tols.duality_gap, diagnostics=diagnostics,
    )
    return cert


# ---------------------------------------------------------------------------
# PPT (separable) machinery


def _kkt_newton_ppt(rho, dims, sigma0, s0, X0, G0, tols, iters=16):
    """Gauss-Newton solve of the PPT-robustness optimality system.

    Unknowns (sigma, s, X, G); equations: complementary slackness
    ((1+s) sigma - rho) X = 0 and G sigma^(T_B) = 0, the tight witness
    identity X + G^(T_B) = I, Tr sigma = 1 and Tr(X sigma) = 1. Both sides
    are certified after the solve; returns (s_upper, sigma, d_lower, X, G)
    or None.
    """
    d = rho.shape[0]
    basis = _hermitian_basis(d)
    nb = len(basis)
    basis_pt = np.stack([ppt._pt(B, dims) for B in basis])
    I = np.eye(d)

    xs = np.einsum("bij,ji->b", basis, sigma0).real.copy()
    xX = np.einsum("bij,ji->b", basis, X0).real.copy()
    xG = np.einsum("bij,ji->b", basis, G0).real.copy()
    s = float(s0)

    def assemble(xv):
        return np.einsum("b,bij->ij", xv, basis)

    def residual(xs_, s_, xX_, xG_):
        sigma = assemble(xs_)
        X = assemble(xX_)
        G = assemble(xG_)
        sigma_pt = ppt._pt(sigma, dims)
        A = (1 + s_) * sigma - rho
        R1 = A @ X
        R2 = G @ sigma_pt
        R3 = X + ppt._pt(G, dims) - I
        R4 = np.trace(sigma).real - 1.0
        R5 = np.real(np.trace(X @ sigma)) - 1.0
        return np.concatenate([
            R1.real.ravel(), R1.imag.ravel(),
            R2.real.ravel(), R2.imag.ravel(),
            R3.real.ravel(), R3.imag.ravel(),
            [R4, R5],
        ])

    nvar = 3 * nb + 1
    damp_rows = np.sqrt(1e-12) * np.eye(nvar)
    for _ in range(iters):
        sigma = assemble(xs)
        X = assemble(xX)
        G = assemble(xG)
        sigma_pt = ppt._pt(sigma, dims)
        A = (1 + s) * sigma - rho
        res = residual(xs, s, xX, xG)
        if np.linalg.norm(res) < 1e-13:
            break
        zero = np.zeros(2 * d * d)
        cols = []
        # derivative wrt sigma coefficients
        for b in range(nb):
            dR1 = (1 + s) * basis[b] @ X
            dR2 = G @ basis_pt[b]
            cols.append(np.concatenate([
                dR1.real.ravel(), dR1.imag.ravel(),
                dR2.real.ravel(), dR2.imag.ravel(),
                zero,
                [np.trace(basis[b]).real, np.real(np.trace(X @ basis[b]))],
            ]))
        # derivative wrt s
        dR1 = sigma @ X
        cols.append(np.concatenate([
            dR1.real.ravel(), dR1.imag.ravel(), np.zeros(2 * d * d), zero[:2 * d * d],
            [0.0, 0.0],
        ]))
        # derivative wrt X coefficients
        for b in range(nb):
            dR1 = A @ basis[b]
            dR3 = basis[b]
            cols.append(np.concatenate([
                dR1.real.ravel(), dR1.imag.ravel(),
                np.zeros(2 * d * d),
                dR3.real.ravel(), dR3.imag.ravel(),
                [0.0, np.real(np.trace(basis[b] @ sigma))],
            ]))
        # derivative wrt G coefficients
        for b in range(nb):
            dR2 = basis[b] @ sigma_pt
            dR3 = basis_pt[b]
            cols.append(np.concatenate([
                np.zeros(2 * d * d),
                dR2.real.ravel(), dR2.imag.ravel(),
                dR3.real.ravel(), dR3.imag.ravel(),
                [0.0, 0.0],
            ]))
        J = np.stack(cols, axis=1)
        J_damped = np.vstack([J, damp_rows])
        rhs = np.concatenate([-res, np.zeros(nvar)])
        delta, *_ = np.linalg.lstsq(J_damped, rhs, rcond=None)
        # backtracking keeps the residual monotone on degenerate systems
        nres0 = np.linalg.norm(res)
        step = 1.0
        for _ in range(4):
            trial = (xs + step * delta[:nb], s + step * delta[nb],
                     xX + step * delta[nb + 1:nb + 1 + nb],
                     xG + step * delta[nb + 1 + nb:])
            if np.linalg.norm(residual(*trial)) <= nres0 * (1 - 0.1 * step):
                break
            step *= 0.5
        xs, s, xX, xG = trial

    sigma = assemble(xs)
    X = assemble(xX)
    G = assemble(xG)
    # certify primal side with an exactly PPT-feasible state
    sigma_c = ppt.clean_ppt_state(sigma, dims)
    s_up = _s_needed(rho, sigma_c)
    # certify dual side by clipping and rescaling the witness pair
    Xc = project_psd(X)
    Gc = project_psd(G)
    top = float(np.linalg.eigvalsh(hermitian_part(Xc + ppt._pt(Gc, dims)))[-1])
    if top <= 1e-12:
        return None
    scale = max(1.0, top)
    Xc, Gc = Xc / scale, Gc / scale
    d_low = float(np.real(np.trace(rho @ Xc))) - 1.0
    if not np.isfinite(s_up):
        return None
    return s_up, sigma_c, d_low, Xc, Gc


def _ppt_primal_from_dual(rho, dims, X, G, tau_seed):
    """Certified primal bound from a near-optimal witness pair.

    Complementarity pins tau = (1+s) sigma to the affine set
    {(tau - rho) X = 0, tau^(T_B) G = 0}; the anchored least-squares solution
    is corrected with identity shifts until exactly feasible. Returns
    (s_upper, sigma) or None.
    """
    d = rho.shape[0]
    basis = _hermitian_basis(d)
    nb = len(basis)
    cols = []
    for b in range(nb):
        e1 = basis[b] @ X
        e2 = ppt._pt(basis[b], dims) @ G
        cols.append(np.concatenate([
            e1.real.ravel(), e1.imag.ravel(), e2.real.ravel(), e2.imag.ravel(),
        ]))
    J = np.stack(cols, axis=1)
    r1 = rho @ X
    rhs = np.concatenate([
        r1.real.ravel(), r1.imag.ravel(), np.zeros(2 * d * d),
    ])
    eps = 1e-7
    x_seed = np.einsum("bij,ji->b", basis, tau_seed).real
    J_anch = np.vstack([J, eps * np.eye(nb)])
    rhs_anch = np.concatenate([rhs, eps * x_seed])
    x, *_ = np.linalg.lstsq(J_anch, rhs_anch, rcond=None)
    tau = np.einsum("b,bij->ij", x, basis)
    # identity corrections give exact feasibility at a tiny trace cost
    lam1 = float(np.linalg.eigvalsh(hermitian_part(tau - rho))[0])
    lam2 = float(np.linalg.eigvalsh(hermitian_part(ppt._pt(tau, dims)))[0])
    shift = max(0.0, -min(lam1, lam2))
    if shift > 1e-3:
        return None
    if shift > 0:
        tau = tau + (shift * (1 + 1e-9) + 1e-15) * np.eye(d)
    lam1 = float(np.linalg.eigvalsh(hermitian_part(tau - rho))[0])
    lam2 = float(np.linalg.eigvalsh(hermitian_part(ppt._pt(tau, dims)))[0])
    if lam1 < -1e-12 or lam2 < -1e-12:
        return None
    total = float(np.trace(tau).real)
    if total < 1.0 - 1e-9:
        return None
    return total - 1.0, hermitian_part(tau) / total


def _ppt_dual_from_primal(rho, dims, sigma, s):
    """Certified dual bound from a near-optimal primal pair.

    Given (sigma, s) the optimality system in (X, G) is linear:
    ((1+s) sigma - rho) X = 0, G sigma^(T_B) = 0, X + G^(T_B) = I and
    Tr(X sigma) = 1. The solution is clipped and rescaled into an exactly
    feasible witness pair. Returns (d_lower, X, G) or None.
    """
    d = rho.shape[0]
    basis = _hermitian_basis(d)
    nb = len(basis)
    A = (1 + s) * sigma - rho
    sigma_pt = ppt._pt(sigma, dims)
    cols = []
    zero = np.zeros(2 * d * d)
    for b in range(nb):  # X coefficients
        e1 = A @ basis[b]
        e3 = basis[b]
        cols.append(np.concatenate([
            e1.real.ravel(), e1.imag.ravel(), zero,
            e3.real.ravel(), e3.imag.ravel(),
            [np.real(np.trace(basis[b] @ sigma))],
        ]))
    for b in range(nb):  # G coefficients
        e2 = basis[b] @ sigma_pt
        e3 = ppt._pt(basis[b], dims)
        cols.append(np.concatenate([
            zero, e2.real.ravel(), e2.imag.ravel(),
            e3.real.ravel(), e3.imag.ravel(),
            [0.0],
        ]))
    J = np.stack(cols, axis=1)
    I = np.eye(d)
    rhs = np.concatenate([
        zero, zero, I.real.ravel(), np.zeros(d * d), [1.0],
    ])
    x, *_ = np.linalg.lstsq(J, rhs, rcond=None)
    X = np.einsum("b,bij->ij", x[:nb], basis)
    G = np.einsum("b,bij->ij", x[nb:], basis)
    Xc, Gc = project_psd(X), project_psd(G)
    top = float(np.linalg.eigvalsh(hermitian_part(Xc + ppt._pt(Gc, dims)))[-1])
    if top <= 1e-12:
        return None
    scale = max(1.0, top)
    Xc, Gc = Xc / scale, Gc / scale
    return float(np.real(np.trace(rho @ Xc))) - 1.0, Xc, Gc


def _solve_ppt(rho_m, F: FreeSet, tols: Tolerances):
    dims = F.dims
    d = F.dim
    diagnostics: dict = {}
    iterations = 0

    if ppt.is_ppt_state(rho_m, dims):
        X = np.eye(d, dtype=complex)
        witness = WitnessOperator(X=X, scale=1.0, support_value_on_F=1.0)
        return RobustnessCertificate(
            value=0.0, primal_value=0.0, dual_value=0.0, gap=0.0,
            witness=witness, optimal_sigma=as_state(rho_m, tols), optimal_tau=None,
            iterations=0, tolerance_used=tols.duality_gap, diagnostics=diagnostics,
        )

    hi = _s_needed(rho_m, maximally_mixed(d))
    lo = 0.0
    sigma_best = maximally_mixed(d)
    soft_lo = 0.0

    warm = None
    rounds = 0
    while hi - soft_lo > 3e-3 and rounds < 25:
        rounds += 1
        mid = (soft_lo + hi) / 2
        res = ppt.feasibility_at_ppt(rho_m, mid, dims, tols, start=warm, max_cycles=400)
        iterations += res.cycles
        sigma_c = ppt.clean_ppt_state(res.point, dims)
        sn = _s_needed(rho_m, sigma_c)
        if sn < hi:
            hi, sigma_best = sn, sigma_c
        if res.feasible:
            warm = res.point
        else:
            soft_lo = max(soft_lo, mid)
        if hi <= soft_lo:
            soft_lo = lo

    # dual seed: witness direction from the kernel of the slack operator
    A_hat = (1 + hi) * sigma_best - rho_m
    w, U = np.linalg.eigh(hermitian_part(A_hat))
    u = U[:, 0]
    D = np.outer(u, u.conj())
    y, G = ppt.witness_scale_lmi(D, dims, tols, width=1e-4, max_cycles=300)
    X_dual = y * D
    G_dual = G
    dual_best = float(np.real(np.trace(rho_m @ X_dual)))
    lo = max(lo, dual_best - 1.0)

    # Gauss-Newton on the optimality system closes the interval; on failure the
    # dual ascent and a primal feasibility refresh regenerate the seeds
    for round_ in range(4):
        if hi - lo <= 1e-9:
            break
        G_seed = project_psd(ppt._pt(np.eye(d) - X_dual, dims))
        for Gs in (G_dual, G_seed):
            got = _kkt_newton_ppt(rho_m, dims, sigma_best, hi, X_dual, Gs, tols)
            iterations += 1
            if got is None:
                continue
            s_up, sig_c, d_low, Xc, Gc = got
            if s_up < hi:
                hi, sigma_best = s_up, sig_c
            if d_low > lo:
                lo, dual_best = d_low, d_low + 1.0
                X_dual, G_dual = Xc, Gc
        if hi - lo <= 1e-9:
            break
        val, X_asc, G_asc, it = ppt.ppt_dual_ascent(
            rho_m, dims, target=1.0 + hi, tols=tols, X0=X_dual, G0=G_dual,
            outer_iters=60, cycles=40,
        )
        iterations += it
        if val > dual_best:
            dual_best, X_dual, G_dual = val, X_asc, G_asc
            lo = max(lo, dual_best - 1.0)
        res = ppt.feasibility_at_ppt(
            rho_m, lo + 0.6 * (hi - lo), dims, tols, start=warm, max_cycles=600
        )
        iterations += res.cycles
        sigma_c = ppt.clean_ppt_state(res.point, dims)
        sn = _s_needed(rho_m, sigma_c)
        if sn < hi:
            hi, sigma_best = sn, sigma_c
        if res.feasible:
            warm = res.point

    # close the remaining interval from the primal side, warm-started
    rounds = 0
    while hi - lo > 0.5 * tols.duality_gap and rounds < 25:
        rounds += 1
        mid = lo + 0.6 * (hi - lo)
        res = ppt.feasibility_at_ppt(rho_m, mid, dims, tols, start=warm, max_cycles=1500)
        iterations += res.cycles
        sigma_c = ppt.clean_ppt_state(res.point, dims)
        sn = _s_needed(rho_m, sigma_c)
        if sn < hi:
            hi, sigma_best = sn, sigma_c
        if res.feasible:
            warm = res.point
        elif sn >= hi - 1e-12:
            break

    gap = max(hi - lo, 0.0)
    rng = np.random.default_rng(7)
    sup_seen = ppt.seesaw_product_max(X_dual, dims, rng, starts=6)[0]
    diagnostics["weak_duality_slack"] = max(0.0, (dual_best - 1.0) - hi)
    diagnostics["primal_interval"] = [lo, hi]
    diagnostics["witness_lmi_gap"] = float(
        np.linalg.eigvalsh(
            hermitian_part(np.eye(d) - X_dual - ppt._pt(G_dual, dims))
        )[0]
    )

    witness = WitnessOperator(
        X=X_dual,
        scale=float(np.linalg.eigvalsh(hermitian_part(X_dual))[-1]),
        support_value_on_F=min(sup_seen, 1.0),
    )
    tau = _recover_tau(rho_m, sigma_best, hi, tols)
    return RobustnessCertificate(
        value=hi, primal_value=hi, dual_value=lo, gap=gap,
        witness=witness, optimal_sigma=as_state(sigma_best, tols), optimal_tau=tau,
        iterations=iterations, tolerance_used=tols.duality_gap, diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# public operations


def generalized_robustness(rho, F: FreeSet, tols: Tolerances = DEFAULT_TOLS) -> RobustnessCertificate:
    """Compute R_F(rho) with a certified duality gap.

    Raises NonConvergence (carrying the partial certificate) if the certified
    gap exceeds ``tols.duality_gap``.
    """
    state = rho if isinstance(rho, QuantumState) else as_state(rho, tols)
    if state.dim != F.dim:
        raise InvalidInput(f"state dim {state.dim} does not match free set dim {F.dim}")
    rho_m = state.matrix
    if F.is_polytope:
        cert = _solve_polytope(rho_m, F, tols)
    else:
        cert = _solve_ppt(rho_m, F, tols)
    if cert.gap > tols.duality_gap:
        err = NonConvergence(
            f"robustness gap {cert.gap:.3e} above tolerance {tols.duality_gap:.1e}",
            iterations=cert.iterations,
            best_gap=cert.gap,
        )
        err.certificate = cert
        raise err
    return cert


def dual_witness(rho, F: FreeSet, tols: Tolerances = DEFAULT_TOLS) -> WitnessOperator:
    """Feasible witness X with Tr(rho X) within the gap tolerance of 1 + R."""
    return generalized_robustness(rho, F, tols).witness


def feasibility_at(s: float, rho, F: FreeSet, tols: Tolerances = DEFAULT_TOLS):
    """Feasibility of the fixed-level set {sigma in F : (1+s) sigma >= rho}.

    When infeasible, returns a separating operator W built from the minimal
    eigenvector aggregate: Tr(sigma W) >= 0 on F while Tr(rho W) < 0.
    """
    if s < 0:
        raise InvalidInput("mixing level s must be nonnegative")
    rho_m = state_matrix(rho)
    if F.is_polytope:
        out = _fw_feasibility(rho_m, F.vertices, s, tols)
        if out.status == "feasible":
            return True, None
        if out.dual_direction is None:
            return False, None
        u = out.dual_direction
        g = np.einsum("kij,j,i->k", F.vertices, u, u.conj()).real
        W = float(g.max()) * np.eye(F.dim) - np.outer(u, u.conj())
        return False, W
    res = ppt.feasibility_at_ppt(rho_m, s, F.dims, tols)
    if res.feasible:
        return True, None
    A = (1 + s) * res.point - rho_m
    w, U = np.linalg.eigh(hermitian_part(A))
    u = U[:, 0]
    D = np.outer(u, u.conj())
    rng = np.random.default_rng(11)
    sup = ppt.seesaw_product_max(D, F.dims, rng, starts=6)[0]
    W = sup * np.eye(F.dim) - D
    return False, W


def brute_force_robustness_qubit(rho, F: FreeSet, grid: int = 100) -> float:
    """Independent qubit oracle: exhaustive grid over noise Bloch vectors.

    For each noise direction t in the Bloch ball the minimal admissible s is
    solved exactly from the facet inequalities of the free polytope (linear in
    s), and the minimum over the grid is returned. Accuracy is O(1/grid).
    Requires a full-dimensional qubit polytope.
    """
    from scipy.spatial import ConvexHull

    from .linalg import PAULI_X, PAULI_Y, PAULI_Z

    rho_m = state_matrix(rho)
    if rho_m.shape[0] != 2 or not F.is_polytope:
        raise InvalidInput("brute-force oracle requires a qubit polytope free set")
    r = np.array([
        float(np.real(np.trace(rho_m @ P))) for P in (PAULI_X, PAULI_Y, PAULI_Z)
    ])
    pts = np.array([
        [float(np.real(np.trace(v @ P))) for P in (PAULI_X, PAULI_Y, PAULI_Z)]
        for v in F.vertices
    ])
    hull = ConvexHull(pts)
    normals = hull.equations[:, :3]
    offsets = hull.equations[:, 3]     # normals . x + offsets <= 0 inside

    ax = np.linspace(-1.0, 1.0, grid)
    T = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    T = T[np.einsum("ij,ij->i", T, T) <= 1.0 + 1e-12]

    best = np.inf
    fr = normals @ r + offsets          # facet value at the state
    chunk = 200_000
    for start in range(0, len(T), chunk):
        Tc = T[start:start + chunk]
        gt = Tc @ normals.T + offsets   # facet slope per point
        # feasibility condition per facet: fr + s * gt <= 0
        with np.errstate(divide="ignore", invalid="ignore"):
            lower = np.where(gt < 0, fr / (-gt), 0.0)
            lower = np.where((gt >= 0) & (fr > 0), np.inf, lower)
            upper = np.where(gt > 0, -fr / gt, np.inf)
        s_min = np.maximum(lower.max(axis=1), 0.0)
        ok = s_min <= upper.min(axis=1) + 1e-12
        if ok.any():
            best = min(best, float(s_min[ok].min()))
    return best
