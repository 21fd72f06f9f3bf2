"""Hermitian quadratic forms and the scalar metrics built from them.

Everything the transmit and receive optimizers manipulate is a Hermitian
form over either the stacked transmit vector (length K * n_tx) or the
receive combiner (length n_rx).  This module builds those matrices once
per combiner and evaluates SINR, SCNR, and the penalized max-min
objective directly from array responses so the two routes can be
cross-checked against each other.
"""

from dataclasses import dataclass, field

import numpy as np

from .arrays import response_matrix
from .errors import NumericalError

_UNIT_NORM_TOL = 1e-10


@dataclass(frozen=True)
class StackedBeamformer:
    """Concatenation of the K per-user transmit vectors, each length n_tx."""

    u: np.ndarray
    n_tx: int

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex).ravel()
        object.__setattr__(self, "u", u)
        if u.size == 0 or u.size % self.n_tx != 0:
            raise ValueError("stacked length must be a positive multiple of n_tx")
        if not np.all(np.isfinite(u.view(float))):
            raise ValueError("stacked beamformer must be finite")

    @property
    def k_users(self):
        return self.u.size // self.n_tx

    def block(self, k):
        """The k-th user's transmit vector (a view)."""
        return self.u[k * self.n_tx:(k + 1) * self.n_tx]

    def blocks(self):
        """All per-user vectors as a (K, n_tx) view."""
        return self.u.reshape(self.k_users, self.n_tx)

    def power(self):
        return float(np.vdot(self.u, self.u).real)


@dataclass(frozen=True)
class ReceiveBeamformer:
    """Unit-norm receive combiner."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=complex).ravel()
        object.__setattr__(self, "w", w)
        if not np.all(np.isfinite(w.view(float))):
            raise ValueError("combiner must be finite")
        if abs(np.vdot(w, w).real - 1.0) > _UNIT_NORM_TOL:
            raise ValueError("combiner must have unit norm within 1e-10")


def unit_combiner(v):
    """Normalize a nonzero vector into a ReceiveBeamformer."""
    v = np.asarray(v, dtype=complex).ravel()
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ValueError("cannot normalize the zero vector")
    return ReceiveBeamformer(v / nv)


@dataclass(frozen=True)
class QuadraticFormSet:
    """All Hermitian matrices used by the transmit-side optimization.

    phi_t[i]        per-direction target form on one user block, n_tx x n_tx
    phi_c           clutter form on one user block (gains included)
    phi_t_stacked   target forms on the stacked vector, gains included
    phi_stacked     clutter-plus-noise form on the stacked vector
    h_sig, h_int    per-user signal / interference-plus-noise forms
    sqrt_*          cached PSD square roots of the stacked forms
    provenance      human-readable notes on how each family was built
    """

    phi_t: np.ndarray
    phi_c: np.ndarray
    phi_t_stacked: np.ndarray
    phi_stacked: np.ndarray
    h_sig: np.ndarray
    h_int: np.ndarray
    sqrt_phi_t_stacked: np.ndarray
    sqrt_phi_stacked: np.ndarray
    sqrt_h_int: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def n_targets(self):
        return self.phi_t_stacked.shape[0]

    @property
    def dim(self):
        return self.phi_stacked.shape[0]


@dataclass(frozen=True)
class PenaltySurrogate:
    """Penalty quadratic and its diagonal shift.

    ``shifted = shift * I - quad`` is PSD; maximizing u^H shifted u over the
    power sphere is equivalent to minimizing the alignment penalty
    u^H quad u there.
    """

    quad: np.ndarray
    shifted: np.ndarray
    shift: float


def _hermitize(m):
    return 0.5 * (m + m.conj().T)


def psd_sqrt(m, rel_tol=1e-9):
    """Hermitian PSD square root via eigendecomposition.

    Eigenvalues in [-rel_tol * lambda_max, 0) are treated as rounding dust
    and clamped to zero; anything below that tolerance raises
    NumericalError.
    """
    m = np.asarray(m, dtype=complex)
    vals, vecs = np.linalg.eigh(_hermitize(m))
    scale = max(float(vals[-1]), 0.0)
    floor = -rel_tol * max(scale, 1e-300)
    if vals[0] < floor:
        raise NumericalError(
            f"matrix is not PSD within tolerance (min eig {vals[0]:.3e}, max {scale:.3e})")
    clipped = np.clip(vals, 0.0, None)
    return _hermitize((vecs * np.sqrt(clipped)) @ vecs.conj().T)


def build_forms(w, channels, config):
    """Construct every Hermitian form for a fixed unit-norm combiner ``w``."""
    w_vec = np.asarray(getattr(w, "w", w), dtype=complex).ravel()
    geom = config.geometry
    if w_vec.size != geom.n_rx:
        raise ValueError(f"combiner length {w_vec.size} does not match n_rx {geom.n_rx}")
    if channels.h.shape != (config.k_users, geom.n_tx):
        raise ValueError("channel matrix shape does not match config")

    k = config.k_users
    n_tx = geom.n_tx
    dim = k * n_tx
    p_max = config.p_max_w
    eye_k = np.eye(k)

    target_gains = config.target_gains()
    phi_t = np.empty((config.n_targets, n_tx, n_tx), dtype=complex)
    for i, theta in enumerate(config.target_angles):
        v = response_matrix(geom, theta).conj().T @ w_vec
        phi_t[i] = np.outer(v, v.conj())

    phi_c = np.zeros((n_tx, n_tx), dtype=complex)
    for cl in config.clutters:
        v = response_matrix(geom, cl.angle).conj().T @ w_vec
        phi_c += cl.gain * np.outer(v, v.conj())

    if config.solver.phi_noise_model == "sigma_r":
        reg = config.radar_noise_power / p_max
    else:
        reg = geom.n_rx / p_max

    phi_t_stacked = np.empty((config.n_targets, dim, dim), dtype=complex)
    sqrt_phi_t_stacked = np.empty_like(phi_t_stacked)
    for i in range(config.n_targets):
        block = target_gains[i] * phi_t[i]
        phi_t_stacked[i] = np.kron(eye_k, block)
        sqrt_phi_t_stacked[i] = np.kron(eye_k, psd_sqrt(block))

    clutter_block = phi_c + reg * np.eye(n_tx)
    phi_stacked = np.kron(eye_k, clutter_block)
    sqrt_phi_stacked = np.kron(eye_k, psd_sqrt(clutter_block))

    noise_over_p = config.noise_w / p_max
    h_sig = np.empty((k, dim, dim), dtype=complex)
    h_int = np.empty((k, dim, dim), dtype=complex)
    sqrt_h_int = np.empty((k, dim, dim), dtype=complex)
    for kk in range(k):
        hk = channels.h[kk]
        outer_h = np.outer(hk, hk.conj())
        sel = np.zeros((k, k))
        sel[kk, kk] = 1.0
        h_sig[kk] = np.kron(sel, outer_h)
        h_int[kk] = np.kron(eye_k - sel, outer_h) + noise_over_p * np.eye(dim)
        int_block = psd_sqrt(outer_h + noise_over_p * np.eye(n_tx))
        sqrt_h_int[kk] = (np.kron(eye_k - sel, int_block)
                          + np.kron(sel, np.sqrt(noise_over_p) * np.eye(n_tx)))

    provenance = {
        "phi_t": "per-direction target response forms at the given combiner",
        "phi_c": "gain-weighted clutter response forms at the given combiner",
        "phi_stacked": f"clutter block plus {config.solver.phi_noise_model} regularization",
        "h_sig/h_int": "per-user signal and interference-plus-noise forms",
    }
    return QuadraticFormSet(
        phi_t=phi_t, phi_c=phi_c,
        phi_t_stacked=phi_t_stacked, phi_stacked=phi_stacked,
        h_sig=h_sig, h_int=h_int,
        sqrt_phi_t_stacked=sqrt_phi_t_stacked, sqrt_phi_stacked=sqrt_phi_stacked,
        sqrt_h_int=sqrt_h_int,
        provenance=provenance,
    )


def sinr(k, u, channels, config):
    """Downlink SINR of user k for the stacked transmit vector ``u``."""
    blocks = u.blocks()
    gains = np.abs(channels.h[k].conj() @ blocks.T) ** 2
    signal = gains[k]
    interference = float(np.sum(gains)) - signal
    return float(signal / (interference + config.noise_w))


def scnr(i, u, w, channels, config):
    """Average radar SCNR for candidate direction i, evaluated from responses."""
    w_vec = np.asarray(getattr(w, "w", w), dtype=complex).ravel()
    geom = config.geometry
    blocks = u.blocks()

    def beam_power(theta):
        row = w_vec.conj() @ response_matrix(geom, theta)
        return float(np.sum(np.abs(blocks @ row) ** 2))

    numerator = config.target_gains()[i] * beam_power(config.target_angles[i])
    denominator = config.radar_noise_power * float(np.vdot(w_vec, w_vec).real)
    for cl in config.clutters:
        denominator += cl.gain * beam_power(cl.angle)
    return numerator / denominator


def worst_case_scnr(u, w, channels, config):
    """Minimum SCNR over the candidate target directions."""
    return min(scnr(i, u, w, channels, config) for i in range(config.n_targets))


def ratio_coordinates(forms, u):
    """Norm coordinates (x_i, y) of ``u`` under the stacked form square roots."""
    x = np.array([np.linalg.norm(forms.sqrt_phi_t_stacked[i] @ u.u)
                  for i in range(forms.n_targets)])
    y = float(np.linalg.norm(forms.sqrt_phi_stacked @ u.u))
    return x, y


def penalty_residuals(u, alignments, levels, forms):
    """Per-direction alignment residuals ||T_i u - sqrt(l_i) Q_i C u||^2."""
    cu = forms.sqrt_phi_stacked @ u.u
    out = np.empty(forms.n_targets)
    for i in range(forms.n_targets):
        diff = forms.sqrt_phi_t_stacked[i] @ u.u - np.sqrt(levels[i]) * (alignments[i] @ cu)
        out[i] = float(np.vdot(diff, diff).real)
    return out


def penalized_objective(u, w, alignments, levels, forms, eta):
    """Penalized max-min objective: min_i levels - eta * total residual."""
    del w  # the combiner is already baked into ``forms``
    residual = float(np.sum(penalty_residuals(u, alignments, levels, forms)))
    return float(np.min(levels)) - eta * residual


def build_penalty_surrogate(forms, alignments, levels):
    """Assemble the penalty quadratic and its PSD diagonal shift."""
    dim = forms.dim
    quad = np.zeros((dim, dim), dtype=complex)
    c_sqrt = forms.sqrt_phi_stacked
    for i in range(forms.n_targets):
        lam = max(float(levels[i]), 0.0)
        t_sqrt = forms.sqrt_phi_t_stacked[i]
        cross = t_sqrt @ alignments[i] @ c_sqrt
        quad += (forms.phi_t_stacked[i] + lam * forms.phi_stacked
                 - np.sqrt(lam) * (cross + cross.conj().T))
    quad = _hermitize(quad)
    top = float(np.linalg.eigvalsh(quad)[-1])
    shift = top * (1.0 + 1e-6) + 1e-12
    shifted = _hermitize(shift * np.eye(dim) - quad)
    return PenaltySurrogate(quad=quad, shifted=shifted, shift=shift)
