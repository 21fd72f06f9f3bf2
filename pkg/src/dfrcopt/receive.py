"""Receive-combiner optimization: max-min fractional program via Dinkelbach.

For fixed transmit vectors the combiner problem is a generalized
fractional program over unit-norm vectors whose quadratics are all
Toeplitz, so the unit-trace PSD relaxation is tight in practice.  Each
Dinkelbach iteration solves one spectrahedron max-min subproblem; the
rate parameter increases strictly until the subtraction-form optimum hits
zero, and a rank-one combiner is extracted (and audited) at the end.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .arrays import rx_steering, tx_steering
from .errors import (
    DegradedSolutionWarning,
    NonConvergenceError,
    NumericalError,
    UnsupportedDimensionError,
)
from .forms import ReceiveBeamformer
from .solvers import solve_spectrahedron_minmax

_RANK_ONE_RATIO = 1e-6
_RANDOMIZATION_DRAWS = 500
_EXTRACTION_TOL = 1e-6


@dataclass(frozen=True)
class FractionalInstance:
    """Numerator/denominator quadratics of the combiner ratio problem.

    ``echo_target[i, k]`` and ``echo_clutter[j, k]`` are the per-source,
    per-user echo forms; numerators and denominator are their gain-weighted
    sums, the denominator regularized by the radar noise power.
    """

    numerators: np.ndarray
    denominator: np.ndarray
    echo_target: np.ndarray
    echo_clutter: np.ndarray


@dataclass(frozen=True)
class DinkelbachSolution:
    w: ReceiveBeamformer
    value: float
    achieved: float
    iterations: int
    rate_trace: np.ndarray
    rank_gap: float


def build_fractional(u, channels, config):
    """Assemble the fractional instance at the given transmit vector.

    Every echo form is c * a_r(theta) a_r(theta)^H with c = |a_t(theta)^H
    u_k|^2, hence Hermitian Toeplitz; sums of them stay Toeplitz.
    """
    del channels  # echoes depend only on geometry, angles, and u
    geom = config.geometry
    blocks = u.blocks()
    k = blocks.shape[0]

    def echo_stack(angles):
        out = np.empty((len(angles), k, geom.n_rx, geom.n_rx), dtype=complex)
        for m, theta in enumerate(angles):
            a_r = rx_steering(geom, theta)
            a_t = tx_steering(geom, theta)
            base = np.outer(a_r, a_r.conj())
            coeffs = np.abs(blocks @ a_t.conj()) ** 2
            for kk in range(k):
                out[m, kk] = coeffs[kk] * base
        return out

    echo_target = echo_stack(config.target_angles)
    echo_clutter = echo_stack([c.angle for c in config.clutters])

    gains = config.target_gains()
    numerators = gains[:, None, None] * echo_target.sum(axis=1)
    denominator = config.radar_noise_power * np.eye(geom.n_rx, dtype=complex)
    for j, cl in enumerate(config.clutters):
        denominator += cl.gain * echo_clutter[j].sum(axis=0)
    return FractionalInstance(numerators=numerators, denominator=denominator,
                              echo_target=echo_target, echo_clutter=echo_clutter)


def ratio_values(inst, w):
    """All candidate-direction ratios at a combiner."""
    w = np.asarray(getattr(w, "w", w), dtype=complex).ravel()
    den = float(np.real(np.vdot(w, inst.denominator @ w)))
    return np.array([float(np.real(np.vdot(w, n @ w))) / den for n in inst.numerators])


def min_ratio(inst, w):
    return float(np.min(ratio_values(inst, w)))


def _phase_normalize(w):
    idx = int(np.argmax(np.abs(w)))
    pivot = w[idx]
    if abs(pivot) > 0:
        w = w * (abs(pivot) / pivot)
    return w / np.linalg.norm(w)


def dedicated_combiner(inst, i):
    """Closed-form single-direction combiner: the principal generalized
    eigenvector of (numerator_i, denominator)."""
    d_sqrt_inv = np.linalg.inv(_psd_cholesky(inst.denominator))
    whitened = d_sqrt_inv @ inst.numerators[i] @ d_sqrt_inv.conj().T
    _, vecs = np.linalg.eigh(0.5 * (whitened + whitened.conj().T))
    w = d_sqrt_inv.conj().T @ vecs[:, -1]
    return ReceiveBeamformer(_phase_normalize(w))


def _psd_cholesky(m):
    m = 0.5 * (m + m.conj().T)
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("denominator is not positive definite") from exc


def _plane_scan(inst, w, v, grid=96):
    """Best min-ratio point on the unit sphere of span{w, v}."""
    v = v - np.vdot(w, v) * w
    nv = np.linalg.norm(v)
    if nv < 1e-12:
        return w, min_ratio(inst, w)
    v = v / nv
    angles = np.linspace(0.0, np.pi / 2.0, grid)
    phases = np.exp(1j * np.linspace(0.0, 2.0 * np.pi, 2 * grid, endpoint=False))
    best = min_ratio(inst, w)
    best_w = w
    for p in phases:
        vp = v * p
        for a in angles[1:]:
            trial = np.cos(a) * w + np.sin(a) * vp
            val = min_ratio(inst, trial)
            if val > best:
                best = val
                best_w = trial
    return best_w / np.linalg.norm(best_w), best


def _subspace_polish(inst, w, rounds=12, grid=96):
    """Local max-min ascent over two-dimensional subspaces.

    Each round spans the current combiner with the principal generalized
    eigenvector of the worst ratio and scans the 2-D unit sphere of that
    subspace; the minimum ratio never decreases.
    """
    w = np.asarray(w, dtype=complex).ravel()
    w = w / np.linalg.norm(w)
    d_chol = _psd_cholesky(inst.denominator)
    d_inv = np.linalg.inv(d_chol)
    best = min_ratio(inst, w)
    for _ in range(rounds):
        ratios = ratio_values(inst, w)
        worst = int(np.argmin(ratios))
        whitened = d_inv @ inst.numerators[worst] @ d_inv.conj().T
        _, vecs = np.linalg.eigh(0.5 * (whitened + whitened.conj().T))
        v = d_inv.conj().T @ vecs[:, -1]
        cand_w, cand_best = _plane_scan(inst, w, v, grid)
        if cand_best <= best * (1.0 + 1e-12):
            break
        w, best = cand_w, cand_best
    return w, best


def extract_rank_one(w_matrix, inst, seed=0):
    """Recover a unit-norm combiner from a unit-trace PSD relaxation point.

    Near-rank-one matrices yield their top eigenvector directly; otherwise
    Gaussian randomization followed by a local max-min ascent is used.  If
    the achieved minimum ratio falls short of the value implied by the
    matrix by more than a relative 1e-6, a DegradedSolutionWarning is
    emitted carrying both values.
    """
    w_matrix = 0.5 * (w_matrix + w_matrix.conj().T)
    vals, vecs = np.linalg.eigh(w_matrix)
    trace = float(np.sum(np.clip(vals, 0.0, None)))
    if trace <= 0:
        raise NumericalError("relaxation matrix has no positive part")
    implied = float(min(np.real(np.trace(w_matrix @ n)) for n in inst.numerators)
                    / np.real(np.trace(w_matrix @ inst.denominator)))

    if vals.size == 1 or vals[-2] <= _RANK_ONE_RATIO * vals[-1]:
        w = vecs[:, -1]
    else:
        rng = np.random.default_rng(seed)
        root = (vecs * np.sqrt(np.clip(vals, 0.0, None)))
        draws = root @ ((rng.standard_normal((w_matrix.shape[0], _RANDOMIZATION_DRAWS))
                         + 1j * rng.standard_normal((w_matrix.shape[0], _RANDOMIZATION_DRAWS)))
                        / np.sqrt(2.0))
        # the optimal face is spanned by the relaxation's top eigenvectors,
        # so scan that plane first, then keep the best randomized draw
        w, best_val = _plane_scan(inst, vecs[:, -1], vecs[:, -2], grid=192)
        for col in range(_RANDOMIZATION_DRAWS):
            cand = draws[:, col]
            norm = np.linalg.norm(cand)
            if norm == 0:
                continue
            val = min_ratio(inst, cand / norm)
            if val > best_val:
                best_val = val
                w = cand / norm
        w, _ = _subspace_polish(inst, w)

    w = _phase_normalize(w)
    achieved = min_ratio(inst, w)
    if achieved < implied * (1.0 - _EXTRACTION_TOL):
        warnings.warn(DegradedSolutionWarning(
            f"rank-one extraction achieved {achieved:.6e} vs implied {implied:.6e}"))
    return ReceiveBeamformer(w)


def dinkelbach_solve(inst, opts, w_init=None):
    """Globally solve the max-min ratio problem over unit-norm combiners.

    The rate parameter starts at the minimum ratio of ``w_init`` (or of the
    principal eigenvector of the first numerator) and increases strictly;
    at convergence the relaxation value and the extracted combiner's
    achieved ratio agree to the configured relative tolerance.  The
    returned combiner never scores below ``w_init``.
    """
    tol = float(getattr(opts, "dinkelbach_tol", 1e-8))
    max_iter = int(getattr(opts, "max_iter", 200))
    if w_init is None:
        _, vecs = np.linalg.eigh(0.5 * (inst.numerators[0] + inst.numerators[0].conj().T))
        w_start = _phase_normalize(vecs[:, -1])
    else:
        w_start = np.asarray(getattr(w_init, "w", w_init), dtype=complex).ravel()
        w_start = w_start / np.linalg.norm(w_start)
    rate = min_ratio(inst, w_start)
    trace = [rate]

    w_matrix = np.outer(w_start, w_start.conj())
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        shifted = inst.numerators - rate * inst.denominator[None, :, :]
        sol = solve_spectrahedron_minmax(shifted, opts)
        w_matrix = sol.w_matrix
        den = float(np.real(np.trace(w_matrix @ inst.denominator)))
        nums = np.array([float(np.real(np.trace(w_matrix @ n))) for n in inst.numerators])
        new_rate = float(np.min(nums)) / den
        delta = new_rate - rate
        scale = max(1.0, abs(new_rate))
        if delta < -10.0 * tol * scale:
            raise NumericalError(
                f"Dinkelbach rate decreased: {rate:.12e} -> {new_rate:.12e}")
        trace.append(new_rate)
        converged = delta <= tol * scale
        rate = max(new_rate, rate)
        if converged:
            break
    if not converged:
        raise NonConvergenceError(
            f"Dinkelbach did not converge in {max_iter} iterations", best=rate)

    combiner = extract_rank_one(w_matrix, inst)
    achieved = min_ratio(inst, combiner.w)
    rank_vals = np.linalg.eigvalsh(w_matrix)
    rank_gap = float(rank_vals[-2] / rank_vals[-1]) if rank_vals.size > 1 else 0.0

    start_score = min_ratio(inst, w_start)
    if achieved < start_score:
        combiner = ReceiveBeamformer(_phase_normalize(w_start))
        achieved = start_score
    return DinkelbachSolution(w=combiner, value=rate, achieved=achieved,
                              iterations=iteration, rate_trace=np.asarray(trace),
                              rank_gap=rank_gap)


def _param_to_vector(params, n):
    if n == 2:
        a, p = params
        return np.array([np.cos(a), np.sin(a) * np.exp(1j * p)])
    a, b, p1, p2 = params
    return np.array([
        np.cos(a),
        np.sin(a) * np.cos(b) * np.exp(1j * p1),
        np.sin(a) * np.sin(b) * np.exp(1j * p2),
    ])


def sphere_grid_oracle(inst, resolution):
    """Exhaustive phase-normalized search over unit combiners, n_rx <= 3.

    A dense parameter grid locates the global basin and a local simplex
    refinement sharpens the best point; the refined value never falls
    below the grid value.  Test oracle only.
    """
    from scipy.optimize import minimize

    n = inst.denominator.shape[0]
    if n > 3:
        raise UnsupportedDimensionError("sphere_grid_oracle supports n_rx <= 3")
    if n == 1:
        w = np.array([1.0 + 0.0j])
        return ReceiveBeamformer(w), min_ratio(inst, w)

    res = int(resolution)
    half = np.linspace(0.0, np.pi / 2.0, res)
    full = np.linspace(0.0, 2.0 * np.pi, res, endpoint=False)

    best_val = -np.inf
    best_params = None
    if n == 2:
        cos_a = np.cos(half)
        sin_a = np.sin(half)
        quad = np.empty((len(inst.numerators) + 1, res, res))
        mats = list(inst.numerators) + [inst.denominator]
        for m_idx, mat in enumerate(mats):
            m00 = mat[0, 0].real
            m11 = mat[1, 1].real
            cross = 2.0 * np.real(np.exp(1j * full)[None, :] * mat[0, 1])
            quad[m_idx] = (m00 * cos_a[:, None] ** 2 + m11 * sin_a[:, None] ** 2
                           + (cos_a * sin_a)[:, None] * cross)
        ratios = quad[:-1] / quad[-1]
        min_r = ratios.min(axis=0)
        ai, pi_ = np.unravel_index(np.argmax(min_r), min_r.shape)
        best_val = float(min_r[ai, pi_])
        best_params = np.array([half[ai], full[pi_]])
    else:
        # chunked evaluation over the 4-parameter grid
        for a in half:
            for b in half:
                w0 = np.cos(a)
                w1 = np.sin(a) * np.cos(b)
                w2 = np.sin(a) * np.sin(b)
                ph1 = np.exp(1j * full)
                ph2 = np.exp(1j * full)
                vecs = np.empty((3, res, res), dtype=complex)
                vecs[0] = w0
                vecs[1] = w1 * ph1[:, None]
                vecs[2] = w2 * ph2[None, :]
                flat = vecs.reshape(3, -1)
                den = np.einsum("if,ij,jf->f", flat.conj(), inst.denominator, flat).real
                min_r = None
                for num in inst.numerators:
                    r = np.einsum("if,ij,jf->f", flat.conj(), num, flat).real / den
                    min_r = r if min_r is None else np.minimum(min_r, r)
                idx = int(np.argmax(min_r))
                if min_r[idx] > best_val:
                    best_val = float(min_r[idx])
                    best_params = np.array([a, b, full[idx // res], full[idx % res]])

    def negated(params):
        return -min_ratio(inst, _param_to_vector(params, n))

    refined = minimize(negated, best_params, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
    value = max(best_val, -float(refined.fun))
    params = refined.x if -float(refined.fun) >= best_val else best_params
    w = _param_to_vector(params, n)
    return ReceiveBeamformer(_phase_normalize(w)), value
