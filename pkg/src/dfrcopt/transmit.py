"""Transmit-side optimization: minorant steps, alignment, and level updates.

For a fixed combiner the transmit subproblem is handled by a
minorize-maximize loop: the shifted penalty quadratic is replaced by its
affine tangent minorant at the previous iterate, the power equality is
split into two inequalities coupled by a penalized slack, and the
resulting convex program is solved to certificate grade.  The unitary
alignment and level updates are both globally optimal in closed form.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, PenaltyFailureError
from .forms import StackedBeamformer, build_penalty_surrogate, ratio_coordinates
from .solvers import ConvexQcqp, Halfspace, QuadConstraint, solve_level_program, solve_qcqp

_GS_TOL = 1e-10
_SLACK_TOL = 1e-6
_MAX_NU_ESCALATIONS = 3


@dataclass(frozen=True)
class AffineForm:
    """Tangent minorant 2 Re(u^H vec) + const of a PSD quadratic."""

    vec: np.ndarray
    const: float

    def value(self, u):
        return 2.0 * float(np.real(np.vdot(self.vec, u))) + self.const


def surrogate_affine(m, u0):
    """Affine minorant of u^H m u at the expansion point u0.

    Tangent there and below everywhere: the gap equals ||m^(1/2)(u-u0)||^2.
    """
    u0 = np.asarray(u0, dtype=complex).ravel()
    vec = np.asarray(m, dtype=complex) @ u0
    return AffineForm(vec=vec, const=-float(np.real(np.vdot(u0, vec))))


def _complete_orthonormal(first):
    """Deterministic orthonormal basis whose first column is ``first``.

    Remaining columns come from Gram-Schmidt over the canonical basis in
    index order, skipping candidates that are numerically dependent.
    """
    n = first.size
    cols = [first]
    for j in range(n):
        if len(cols) == n:
            break
        v = np.zeros(n, dtype=complex)
        v[j] = 1.0
        for _ in range(2):  # re-orthogonalize once for stability
            for c in cols:
                v = v - np.vdot(c, v) * c
        norm = np.linalg.norm(v)
        if norm < _GS_TOL:
            continue
        cols.append(v / norm)
    if len(cols) != n:
        raise NumericalError("orthonormal completion failed")
    return np.column_stack(cols)


def optimal_alignment(forms, u):
    """Per-direction unitaries aligning the clutter image with the target image.

    For each direction the optimal unitary maps the normalized clutter-form
    image of ``u`` onto the normalized target-form image, collapsing the
    alignment residual to (x_i - sqrt(l_i) y)^2.  A direction with no
    target energy gets the identity (any unitary is optimal there).
    """
    dim = forms.dim
    cu = forms.sqrt_phi_stacked @ u.u
    cu_norm = np.linalg.norm(cu)
    if cu_norm == 0:
        raise ValueError("clutter-form image of u is zero; u must be nonzero")
    b_first = cu / cu_norm
    out = np.empty((forms.n_targets, dim, dim), dtype=complex)
    basis_b = None
    for i in range(forms.n_targets):
        tu = forms.sqrt_phi_t_stacked[i] @ u.u
        tu_norm = np.linalg.norm(tu)
        if tu_norm < _GS_TOL * max(1.0, np.linalg.norm(u.u)):
            out[i] = np.eye(dim)
            continue
        if basis_b is None:
            basis_b = _complete_orthonormal(b_first)
        basis_a = _complete_orthonormal(tu / tu_norm)
        out[i] = basis_a @ basis_b.conj().T
    return out


def update_levels(forms, u, eta):
    """Globally optimal level variables for the current transmit vector."""
    x, y = ratio_coordinates(forms, u)
    return solve_level_program(x, y, eta)


def build_transmit_step(forms, surrogate, u0, config, opts, nu=None):
    """Assemble the convex step program linearized at ``u0``.

    Objective: tangent minorant of u^H shifted u minus ``nu`` times the
    power slack.  Constraints: slack-relaxed power ball, the linearized
    power lower bound, and the per-user minorized SINR constraints.
    """
    if nu is None:
        nu = opts.penalty_nu
    u0_vec = u0.u
    p_max = config.p_max_w
    minorant = surrogate_affine(surrogate.shifted, u0_vec)
    gammas = config.sinr_thresholds_linear()

    quads = []
    for k in range(config.k_users):
        sig = surrogate_affine(forms.h_sig[k], u0_vec)
        quads.append(QuadConstraint(
            lin=sig.vec / gammas[k],
            const=sig.const / gammas[k],
            quad=forms.h_int[k],
            quad_sqrt=forms.sqrt_h_int[k],
        ))
    lower = Halfspace(normal=u0_vec, b_coef=1.0,
                      rhs=p_max + float(np.vdot(u0_vec, u0_vec).real))
    return ConvexQcqp(
        lin_u=minorant.vec,
        lin_b=-float(nu),
        offset=minorant.const,
        power_cap=p_max,
        halfspaces=(lower,),
        quads=tuple(quads),
    )


@dataclass
class InnerState:
    """Mutable record of one minorize-maximize pass over the transmit vector."""

    u: StackedBeamformer
    b: float = 0.0
    step: int = 0
    values: list = field(default_factory=list)
    nu_used: float = 0.0


def transmit_inner_loop(u0, forms, alignments, levels, config, opts):
    """Run the fixed number of minorant steps on the transmit vector.

    The exact objective u^H shifted u is nondecreasing across steps up to
    the (penalized, certifiably tiny) power slack.  Raises
    PenaltyFailureError when slack stays above tolerance after escalating
    the penalty weight.
    """
    surrogate = build_penalty_surrogate(forms, alignments, levels)
    state = InnerState(u=u0, nu_used=opts.penalty_nu)
    state.values.append(float(np.real(np.vdot(u0.u, surrogate.shifted @ u0.u))))
    p_max = config.p_max_w

    for s in range(1, opts.inner_s + 1):
        nu = opts.penalty_nu
        solution = None
        for _ in range(_MAX_NU_ESCALATIONS + 1):
            step = build_transmit_step(forms, surrogate, state.u, config, opts, nu)
            solution = solve_qcqp(step, opts)
            if solution.b <= _SLACK_TOL * p_max:
                break
            nu *= 10.0
        else:
            raise PenaltyFailureError(
                f"power slack {solution.b:.3e} above {_SLACK_TOL * p_max:.3e} "
                f"after {_MAX_NU_ESCALATIONS} penalty escalations")
        state.u = StackedBeamformer(solution.u, n_tx=config.geometry.n_tx)
        state.b = solution.b
        state.step = s
        state.nu_used = nu
        state.values.append(float(np.real(np.vdot(state.u.u, surrogate.shifted @ state.u.u))))
    return state
