"""Dense convex solvers behind the optimization loops.

The conic subproblems (transmit step, spectrahedron max-min, downlink
power minimization) are handed to an interior-point backend through
cvxpy, with Clarabel preferred and SCS as the fallback.  On top of the
backend this module adds explicit KKT and duality-gap verification so
callers either get a certified answer or a typed failure.  The level
program is small enough to solve exactly in closed form.
"""

import warnings
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .errors import (
    InfeasibleError,
    NonConvergenceError,
    UnboundedProgramError,
)
from .forms import psd_sqrt

_INFEASIBLE_STATUSES = {cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE}
_OK_STATUSES = {cp.OPTIMAL, cp.OPTIMAL_INACCURATE}

_SOCP_BACKEND = cp.CLARABEL if cp.CLARABEL in cp.installed_solvers() else cp.SCS
_SDP_BACKEND = cp.CLARABEL if cp.CLARABEL in cp.installed_solvers() else cp.SCS


def _backend_options(backend, tol):
    if backend == cp.CLARABEL:
        return {"tol_gap_abs": tol, "tol_gap_rel": tol, "tol_feas": tol,
                "tol_infeas_abs": tol, "tol_infeas_rel": tol}
    return {"eps": tol, "max_iters": 200_000}


def _quiet_solve(prob, backend, tol):
    """Solve while muting the backend's advisory accuracy warning; every
    result is re-verified against our own certificates afterwards."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        prob.solve(solver=backend, **_backend_options(backend, tol))
    return prob.status


@dataclass(frozen=True)
class SolverOptionsView:
    """Minimal solver knobs; accepts any object with these attribute names."""

    kkt_tol: float = 1e-8
    max_iter: int = 200


def _opts_view(opts):
    return SolverOptionsView(
        kkt_tol=float(getattr(opts, "kkt_tol", 1e-8)),
        max_iter=int(getattr(opts, "max_iter", 200)),
    )


@dataclass(frozen=True)
class Halfspace:
    """Affine inequality 2 Re(normal^H u) + b_coef * b >= rhs."""

    normal: np.ndarray
    b_coef: float
    rhs: float


@dataclass(frozen=True)
class QuadConstraint:
    """Convex quadratic inequality 2 Re(lin^H u) + const >= u^H quad u.

    ``quad`` must be Hermitian PSD; ``quad_sqrt`` may be supplied to skip
    the internal square root.
    """

    lin: np.ndarray
    const: float
    quad: np.ndarray
    quad_sqrt: np.ndarray = None


@dataclass(frozen=True)
class ConvexQcqp:
    """Maximize 2 Re(u^H lin_u) + lin_b * b + offset over (u, b >= 0).

    Feasible set: ||u||^2 <= power_cap + b, the listed halfspaces, and the
    listed convex quadratic constraints.  Convex by construction.
    """

    lin_u: np.ndarray
    lin_b: float
    offset: float
    power_cap: float
    halfspaces: tuple = ()
    quads: tuple = ()


@dataclass(frozen=True)
class KktReport:
    stationarity: float
    primal: float
    dual: float
    complementarity: float
    gap: float

    def worst(self):
        return max(self.stationarity, self.primal, self.dual, self.complementarity)


@dataclass(frozen=True)
class QcqpSolution:
    u: np.ndarray
    b: float
    value: float
    dual_ball: float
    dual_halfspaces: np.ndarray
    dual_quads: np.ndarray
    dual_nonneg: float
    dual_bound: float
    kkt: KktReport


def _as_scalar_dual(dv):
    if dv is None:
        return 0.0
    return float(np.asarray(dv).ravel()[0])


def _qcqp_kkt(problem, u, b, duals):
    """KKT residual report for a candidate primal/dual pair, original units."""
    q = problem.lin_u
    mu_ball, mu_hs, mu_q, mu_nn = duals
    scale_obj = 1.0 + np.linalg.norm(q) + abs(problem.lin_b)

    g_ball = float(np.vdot(u, u).real) - problem.power_cap - b
    g_hs = np.array([hs.rhs - 2.0 * float(np.real(np.vdot(hs.normal, u))) - hs.b_coef * b
                     for hs in problem.halfspaces])
    g_q = np.array([float(np.real(np.vdot(u, qc.quad @ u)))
                    - 2.0 * float(np.real(np.vdot(qc.lin, u))) - qc.const
                    for qc in problem.quads])
    g_nn = -b

    r_u = q - mu_ball * u
    for mu, hs in zip(mu_hs, problem.halfspaces):
        r_u = r_u + mu * hs.normal
    for mu, qc in zip(mu_q, problem.quads):
        r_u = r_u - mu * (qc.quad @ u - qc.lin)
    r_b = problem.lin_b + mu_ball + mu_nn
    r_b += sum(mu * hs.b_coef for mu, hs in zip(mu_hs, problem.halfspaces))

    stationarity = (np.linalg.norm(r_u) + abs(r_b)) / scale_obj
    primal_viol = [g_ball / (1.0 + abs(problem.power_cap))]
    primal_viol += [g / (1.0 + abs(hs.rhs)) for g, hs in zip(g_hs, problem.halfspaces)]
    primal_viol += [g / (1.0 + abs(qc.const) + np.linalg.norm(qc.lin))
                    for g, qc in zip(g_q, problem.quads)]
    primal_viol.append(g_nn)
    primal = max(0.0, max(primal_viol))
    dual = max(0.0, -min([mu_ball, mu_nn, *mu_hs, *mu_q], default=0.0))

    value = 2.0 * float(np.real(np.vdot(q, u))) + problem.lin_b * b + problem.offset
    comp_sum = mu_ball * g_ball + mu_nn * g_nn
    comp_sum += sum(m * g for m, g in zip(mu_hs, g_hs))
    comp_sum += sum(m * g for m, g in zip(mu_q, g_q))
    # Complementarity products bottom out near (dual magnitude) times the
    # backend's feasibility tolerance, so the residual is normalized by the
    # dual mass as well as the objective scale.
    dual_mass = abs(mu_ball) * (1.0 + abs(problem.power_cap)) + abs(mu_nn)
    dual_mass += sum(abs(m) * (1.0 + abs(hs.rhs)) for m, hs in zip(mu_hs, problem.halfspaces))
    dual_mass += sum(abs(m) * (1.0 + abs(qc.const) + np.linalg.norm(qc.lin))
                     for m, qc in zip(mu_q, problem.quads))
    comp = abs(comp_sum) / (1.0 + abs(value) + dual_mass)
    dual_bound = value - comp_sum
    return value, dual_bound, KktReport(stationarity=stationarity, primal=primal,
                                        dual=dual, complementarity=comp, gap=comp)


def _recover_duals(problem, u, b):
    """Nonnegative least-squares dual recovery on the active constraints.

    The ball and the linearized power bound have (anti)parallel gradients
    at a fixed point, so backends may split their multipliers with small
    negative parts; re-solving for the multipliers directly restores a
    clean certificate.
    """
    from scipy.optimize import nnls

    q = problem.lin_u
    act_tol = 1e-8
    target = np.concatenate([2.0 * q.real, 2.0 * q.imag, [problem.lin_b]])

    def real_stack(vec, b_part):
        return np.concatenate([vec.real, vec.imag, [b_part]])

    columns = []
    labels = []
    g_ball = float(np.vdot(u, u).real) - problem.power_cap - b
    if abs(g_ball) <= act_tol * (1.0 + abs(problem.power_cap)):
        columns.append(real_stack(2.0 * u, -1.0))
        labels.append(("ball", 0))
    for j, hs in enumerate(problem.halfspaces):
        g = hs.rhs - 2.0 * float(np.real(np.vdot(hs.normal, u))) - hs.b_coef * b
        if abs(g) <= act_tol * (1.0 + abs(hs.rhs)):
            columns.append(real_stack(-2.0 * hs.normal, -hs.b_coef))
            labels.append(("hs", j))
    for k, qc in enumerate(problem.quads):
        g = (float(np.real(np.vdot(u, qc.quad @ u)))
             - 2.0 * float(np.real(np.vdot(qc.lin, u))) - qc.const)
        if abs(g) <= act_tol * (1.0 + abs(qc.const) + np.linalg.norm(qc.lin)):
            columns.append(real_stack(2.0 * (qc.quad @ u - qc.lin), 0.0))
            labels.append(("quad", k))
    if abs(b) <= act_tol:
        col = np.zeros(target.size)
        col[-1] = -1.0
        columns.append(col)
        labels.append(("nonneg", 0))

    mu_ball, mu_nn = 0.0, 0.0
    mu_hs = np.zeros(len(problem.halfspaces))
    mu_q = np.zeros(len(problem.quads))
    if columns:
        mu, _ = nnls(np.column_stack(columns), target)
        for value, (kind, idx) in zip(mu, labels):
            if kind == "ball":
                mu_ball = value
            elif kind == "hs":
                mu_hs[idx] = value
            elif kind == "quad":
                mu_q[idx] = value
            else:
                mu_nn = value
    return mu_ball, mu_hs, mu_q, mu_nn


def solve_qcqp(problem, opts):
    """Solve a ConvexQcqp to certificate grade.

    Returns a QcqpSolution whose KKT residuals are at most ``opts.kkt_tol``.
    Raises InfeasibleError when the conic solver certifies infeasibility and
    NonConvergenceError (carrying the best iterate, if any) when the
    accuracy contract cannot be met.
    """
    view = _opts_view(opts)
    q = np.asarray(problem.lin_u, dtype=complex).ravel()
    n = q.size

    # Normalize the objective direction and every constraint row so the
    # backend sees O(1) data regardless of the caller's physical units.
    s_obj = max(1.0, float(np.linalg.norm(q)))
    s_hs = [max(1.0, np.linalg.norm(h.normal), abs(h.rhs), abs(h.b_coef))
            for h in problem.halfspaces]
    s_q = [max(1e-300, np.linalg.norm(qc.lin), abs(qc.const),
               float(np.linalg.norm(qc.quad, 2)))
           for qc in problem.quads]
    sqrts = [qc.quad_sqrt if qc.quad_sqrt is not None else psd_sqrt(qc.quad)
             for qc in problem.quads]

    u = cp.Variable(n, complex=True)
    b = cp.Variable()
    cons = [cp.sum_squares(u) <= problem.power_cap + b]
    for h, s in zip(problem.halfspaces, s_hs):
        cons.append((2.0 * cp.real(cp.conj(h.normal) @ u) + h.b_coef * b) / s >= h.rhs / s)
    for qc, s, root in zip(problem.quads, s_q, sqrts):
        cons.append(cp.sum_squares((root / np.sqrt(s)) @ u)
                    <= (2.0 * cp.real(cp.conj(qc.lin) @ u) + qc.const) / s)
    cons.append(b >= 0)
    objective = cp.Maximize((2.0 * cp.real(cp.conj(q) @ u) + problem.lin_b * b) / s_obj)
    prob = cp.Problem(objective, cons)

    attempts = [(_SOCP_BACKEND, view.kkt_tol * 1e-2), (_SOCP_BACKEND, 1e-12)]
    if _SOCP_BACKEND != cp.SCS:
        attempts.append((cp.SCS, 1e-11))

    best = None
    for backend, tol in attempts:
        try:
            _quiet_solve(prob, backend, tol)
        except cp.SolverError as exc:
            if best is None:
                best = exc
            continue
        if prob.status in _INFEASIBLE_STATUSES:
            raise InfeasibleError(
                "subproblem certified infeasible by the conic solver",
                status=prob.status)
        if prob.status not in _OK_STATUSES or u.value is None:
            continue
        u_val = np.asarray(u.value).ravel()
        b_val = max(float(b.value), 0.0)
        mu_ball = _as_scalar_dual(cons[0].dual_value) * s_obj
        n_hs = len(problem.halfspaces)
        mu_hs = np.array([_as_scalar_dual(cons[1 + j].dual_value) * s_obj / s
                          for j, s in enumerate(s_hs)])
        mu_q = np.array([_as_scalar_dual(cons[1 + n_hs + k].dual_value) * s_obj / s
                         for k, s in enumerate(s_q)])
        mu_nn = _as_scalar_dual(cons[-1].dual_value) * s_obj
        duals = (mu_ball, mu_hs, mu_q, mu_nn)
        value, dual_bound, report = _qcqp_kkt(problem, u_val, b_val, duals)
        if report.worst() > view.kkt_tol:
            recovered = _recover_duals(problem, u_val, b_val)
            value_r, bound_r, report_r = _qcqp_kkt(problem, u_val, b_val, recovered)
            if report_r.worst() < report.worst():
                duals, value, dual_bound, report = recovered, value_r, bound_r, report_r
        mu_ball, mu_hs, mu_q, mu_nn = duals
        solution = QcqpSolution(u=u_val, b=b_val, value=value,
                                dual_ball=mu_ball, dual_halfspaces=mu_hs,
                                dual_quads=mu_q, dual_nonneg=mu_nn,
                                dual_bound=dual_bound, kkt=report)
        if report.worst() <= view.kkt_tol:
            return solution
        best = solution
    if isinstance(best, QcqpSolution):
        raise NonConvergenceError(
            f"QCQP accuracy contract not met (worst KKT residual {best.kkt.worst():.3e})",
            best=best)
    raise NonConvergenceError(f"QCQP solve failed: {best}")


@dataclass(frozen=True)
class SpectrahedronSolution:
    """Unit-trace PSD maximizer of the minimum linear functional."""

    w_matrix: np.ndarray
    value: float
    weights: np.ndarray
    gap: float


def _simplex_project(p):
    """Euclidean projection onto the probability simplex."""
    n = p.size
    sorted_p = np.sort(p)[::-1]
    cumulative = np.cumsum(sorted_p) - 1.0
    rho = np.nonzero(sorted_p - cumulative / np.arange(1, n + 1) > 0)[0][-1]
    theta = cumulative[rho] / (rho + 1.0)
    return np.clip(p - theta, 0.0, None)


def _certified_upper(ms, p):
    return float(np.linalg.eigvalsh(np.tensordot(p, ms, axes=1))[-1])


def _polish_weights(ms, p, target, iters=200):
    """Tighten the eigenvalue upper bound over the dual simplex.

    max-eig(sum_i p_i M_i) upper-bounds the spectrahedron optimum for any
    simplex point p, so improving p can only improve the certificate.  The
    two-matrix case is an exact scalar golden-section minimization; larger
    families use subgradient steps.  Stops once the bound meets ``target``.
    """
    best_p = p
    best_ub = _certified_upper(ms, p)
    if ms.shape[0] == 2:
        def ub_at(s):
            return _certified_upper(ms, np.array([s, 1.0 - s]))

        inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
        lo, hi = 0.0, 1.0
        x1 = hi - inv_phi * (hi - lo)
        x2 = lo + inv_phi * (hi - lo)
        f1, f2 = ub_at(x1), ub_at(x2)
        for _ in range(90):
            if f1 > f2:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + inv_phi * (hi - lo)
                f2 = ub_at(x2)
            else:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - inv_phi * (hi - lo)
                f1 = ub_at(x1)
        for s in (0.0, x1, x2, 1.0):
            if ub_at(s) < best_ub:
                best_ub = ub_at(s)
                best_p = np.array([s, 1.0 - s])
        return best_ub, best_p

    scale = max(1.0, max(float(np.linalg.norm(m, 2)) for m in ms))
    for it in range(iters):
        if best_ub <= target:
            break
        mix = np.tensordot(p, ms, axes=1)
        _, vecs = np.linalg.eigh(mix)
        top = vecs[:, -1]
        grad = np.array([float(np.real(np.vdot(top, m @ top))) for m in ms])
        p = _simplex_project(p - grad / (scale * (it + 2.0)))
        ub = _certified_upper(ms, p)
        if ub < best_ub:
            best_ub = ub
            best_p = p
    return best_ub, best_p


def _polish_primal(ms, w_matrix, weights):
    """Improve the primal point along the dual certificate's eigenvector.

    Blends W with the top eigenprojector of the weighted matrix mix; the
    minimum functional is concave along the blend, so a golden-section
    search only improves the value.
    """
    mix = np.tensordot(weights, ms, axes=1)
    _, vecs = np.linalg.eigh(mix)
    top = np.outer(vecs[:, -1], vecs[:, -1].conj())

    def value_at(t):
        w = (1.0 - t) * w_matrix + t * top
        return float(min(np.trace(w @ m).real for m in ms))

    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, 1.0
    x1 = hi - inv_phi * (hi - lo)
    x2 = lo + inv_phi * (hi - lo)
    f1, f2 = value_at(x1), value_at(x2)
    for _ in range(80):
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv_phi * (hi - lo)
            f2 = value_at(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv_phi * (hi - lo)
            f1 = value_at(x1)
    best_t = max(((value_at(t), t) for t in (0.0, x1, x2, 1.0)))[1]
    best = (1.0 - best_t) * w_matrix + best_t * top
    return 0.5 * (best + best.conj().T), value_at(best_t)


def solve_spectrahedron_minmax(matrices, opts):
    """Maximize min_i Tr(W M_i) over Hermitian W >= 0 with Tr(W) = 1.

    The returned gap is a rigorous duality bound: for the dual simplex
    weights p, max-eig(sum_i p_i M_i) upper-bounds the optimum, so
    ``gap = upper - value`` certifies near-optimality.
    """
    view = _opts_view(opts)
    ms = np.asarray(matrices, dtype=complex)
    if ms.ndim != 3 or ms.shape[1] != ms.shape[2]:
        raise ValueError("matrices must have shape (I, n, n)")
    count, n = ms.shape[0], ms.shape[1]
    scale = max(1.0, max(float(np.linalg.norm(m, 2)) for m in ms))
    msn = ms / scale

    if n == 1:
        vals = ms[:, 0, 0].real
        idx = int(np.argmin(vals))
        weights = np.zeros(count)
        weights[idx] = 1.0
        return SpectrahedronSolution(
            w_matrix=np.ones((1, 1), dtype=complex), value=float(vals[idx]),
            weights=weights, gap=0.0)

    w_var = cp.Variable((n, n), hermitian=True)
    t = cp.Variable()
    cons = [w_var >> 0, cp.real(cp.trace(w_var)) == 1]
    ratio_cons = [cp.real(cp.trace(w_var @ m)) >= t for m in msn]
    prob = cp.Problem(cp.Maximize(t), cons + ratio_cons)

    attempts = [(_SDP_BACKEND, view.kkt_tol * 1e-2), (_SDP_BACKEND, 1e-11)]
    if _SDP_BACKEND != cp.SCS:
        attempts.append((cp.SCS, 1e-11))

    best = None
    for backend, tol in attempts:
        try:
            _quiet_solve(prob, backend, tol)
        except cp.SolverError:
            continue
        if prob.status not in _OK_STATUSES or w_var.value is None:
            continue
        w_raw = 0.5 * (w_var.value + w_var.value.conj().T)
        vals, vecs = np.linalg.eigh(w_raw)
        vals = np.clip(vals, 0.0, None)
        total = float(np.sum(vals))
        if total <= 0:
            continue
        w_clean = (vecs * (vals / total)) @ vecs.conj().T

        weights = np.array([max(_as_scalar_dual(c.dual_value), 0.0) for c in ratio_cons])
        wsum = float(np.sum(weights))
        weights = weights / wsum if wsum > 0 else np.full(count, 1.0 / count)
        raw_value = float(min(np.trace(w_clean @ m).real for m in msn))
        upper, weights = _polish_weights(
            msn, weights, target=raw_value + view.kkt_tol * max(1.0, abs(raw_value)))
        w_clean, value = _polish_primal(msn, w_clean, weights)
        gap = max(upper - value, 0.0)
        candidate = SpectrahedronSolution(w_matrix=w_clean, value=value * scale,
                                          weights=weights, gap=gap * scale)
        if gap <= 10.0 * view.kkt_tol * max(1.0, abs(value)):
            return candidate
        if best is None or candidate.gap < best.gap:
            best = candidate
    if best is not None:
        raise NonConvergenceError(
            f"spectrahedron duality gap {best.gap:.3e} above tolerance", best=best)
    raise NonConvergenceError("spectrahedron solve failed on all backends")


def level_objective(levels, x, y, eta):
    """Objective of the level program at a candidate point."""
    levels = np.asarray(levels, dtype=float)
    x = np.asarray(x, dtype=float)
    resid = (x - np.sqrt(levels) * y) ** 2
    return float(np.min(levels) - eta * np.sum(resid))


def solve_level_program(x, y, eta):
    """Maximize min_i v_i - eta * sum_i (x_i - sqrt(v_i) y)^2 over v >= 0.

    The objective is concave.  Writing t for the smallest level, each other
    coordinate sits at its unconstrained peak (x_i / y)^2, so the problem
    reduces to a piecewise-smooth concave function of t alone whose
    stationary points have closed forms; enumerating them is exact.

    Raises UnboundedProgramError when eta * y^2 * I <= 1, in which case the
    objective grows without bound.
    """
    x = np.asarray(x, dtype=float).ravel()
    if np.any(x < -1e-12) or not np.all(np.isfinite(x)):
        raise ValueError("x must be finite and nonnegative")
    x = np.clip(x, 0.0, None)
    y = float(y)
    eta = float(eta)
    if not y > 0:
        raise ValueError("y must be positive")
    if not eta > 0:
        raise ValueError("eta must be positive")

    count = x.size
    tail_slope = 1.0 - count * eta * y * y
    if tail_slope >= 0:
        if tail_slope == 0 and not np.any(x > 0):
            return np.zeros(count)
        raise UnboundedProgramError(
            f"level program unbounded: eta*y^2*I = {count * eta * y * y:.6e} <= 1")

    peaks = (x / y) ** 2
    order = np.argsort(peaks)
    x_sorted = x[order]
    prefix = np.cumsum(x_sorted)

    candidates = [0.0]
    candidates.extend(float(p) for p in peaks)
    for k in range(1, count + 1):
        denom = k * eta * y * y - 1.0
        if denom > 0:
            root = eta * y * prefix[k - 1] / denom
            candidates.append(float(root * root))

    best_t = 0.0
    best_val = -np.inf
    for t in candidates:
        val = level_objective(np.maximum(t, peaks), x, y, eta)
        if val > best_val:
            best_val = val
            best_t = t
    return np.maximum(best_t, peaks)


def solve_sinr_power_min(h, gamma_lin, noise_w, opts):
    """Classical SINR-constrained downlink power minimization.

    Returns (u_blocks, p_min) where u_blocks has shape (K, n_tx) and p_min
    is the minimum total power meeting every SINR threshold.  Raises
    InfeasibleError when no finite-power solution exists.
    """
    view = _opts_view(opts)
    h = np.asarray(h, dtype=complex)
    k, n_tx = h.shape
    gamma = np.asarray(gamma_lin, dtype=float)
    norms = np.linalg.norm(h, axis=1)
    if np.any(norms == 0):
        raise InfeasibleError("a user channel is identically zero")
    h_unit = h / norms[:, None]

    u = cp.Variable((k, n_tx), complex=True)
    cons = []
    for kk in range(k):
        hk = h_unit[kk]
        sig = cp.conj(hk) @ u[kk]
        others = [cp.conj(hk) @ u[i] for i in range(k) if i != kk]
        others.append(np.sqrt(noise_w) / norms[kk])
        cons.append(cp.imag(sig) == 0)
        cons.append(cp.real(sig) >= np.sqrt(gamma[kk]) * cp.norm(cp.hstack(others), 2))
    prob = cp.Problem(cp.Minimize(cp.sum_squares(u)), cons)

    for backend, tol in ((_SOCP_BACKEND, view.kkt_tol * 1e-2), (_SOCP_BACKEND, 1e-12)):
        try:
            _quiet_solve(prob, backend, tol)
        except cp.SolverError:
            continue
        if prob.status in _INFEASIBLE_STATUSES:
            raise InfeasibleError("SINR thresholds are infeasible at any power",
                                  status=prob.status)
        if prob.status in _OK_STATUSES and u.value is not None:
            blocks = np.asarray(u.value)
            return blocks, float(np.sum(np.abs(blocks) ** 2))
    raise NonConvergenceError("power minimization did not reach an optimal status")
