"""Exact penalty method on the Stiefel manifold.

The outer loop solves a sequence of smooth unconstrained sub-problems

    min_{V in St(p,d)} Q(V, ρ_k) = f(V) + ρ_k h(V)

warm-started at the previous iterate and solved until the Riemannian
gradient norm drops below ε_k.  Between sub-problems the tolerance shrinks,
ε_{k+1} = max(ε_min, θ_ε ε_k), and the penalty weight grows,
ρ_{k+1} = min(θ_ρ ρ_k, ρ_max), but only while the fairness constraint is
still violated beyond τ; the loop terminates once consecutive iterates are
d_min-close, the tolerance has bottomed out, and h(V) <= τ.

The inner solver is Riemannian gradient descent with Armijo backtracking:
the initial trial step comes from a Barzilai-Borwein estimate, backtracking
halves the step, and the sufficient-decrease constant is 1e-4.  Steps are
realized through the QR retraction.  A quasi-Newton inner solver can be
swapped in behind the same inner_solve signature.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, RetractionError, SolverStallError
from .objective import (
    PenaltyProblem,
    constraint_h,
    objective_f,
    penalty_value,
    penalty_value_and_grads,
)
from .stiefel import (
    ORTHONORMALITY_TOL,
    orthonormality_residual,
    random_tangent,
    reorthonormalize,
    retract,
)

_ARMIJO_C1 = 1e-4
_BACKTRACK_FACTOR = 0.5
_MAX_BACKTRACKS = 60
_BB_STEP_MIN = 1e-14
_BB_STEP_MAX = 1e8


class FitStatus(enum.Enum):
    PROPER_TERMINATION = "proper_termination"
    MAX_ITERATIONS_REACHED = "max_iterations_reached"


@dataclass(frozen=True)
class RepmsConfig:
    """Hyperparameters of the outer penalty loop and the inner solver.

    Defaults follow the reference experimental setting: K=100 outer
    iterations, ε from 1e-1 down to 1e-6 with decay (1e-6/1e-1)^(1/5) = 0.1,
    ρ doubling from 1 up to 1e10, τ=1e-5, d_min=1e-6.
    """

    max_outer_iters: int = 100
    eps0: float = 1e-1
    eps_min: float = 1e-6
    theta_eps: float = 1e-1
    rho0: float = 1.0
    theta_rho: float = 2.0
    rho_max: float = 1e10
    tau: float = 1e-5
    d_min: float = 1e-6
    inner_max_iters: int = 2000
    seed: int = 0

    def __post_init__(self):
        checks = [
            (self.max_outer_iters >= 1, "max_outer_iters must be >= 1"),
            (self.eps0 > 0, "eps0 must be positive"),
            (0 < self.eps_min <= self.eps0, "need 0 < eps_min <= eps0"),
            (0 < self.theta_eps < 1, "theta_eps must lie in (0, 1)"),
            (self.rho0 > 0, "rho0 must be positive"),
            (self.theta_rho > 1, "theta_rho must exceed 1"),
            (self.rho_max >= self.rho0, "rho_max must be >= rho0"),
            (self.tau >= 0, "tau must be non-negative"),
            (self.d_min > 0, "d_min must be positive"),
            (self.inner_max_iters >= 1, "inner_max_iters must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(message)


def default_config() -> RepmsConfig:
    """Reference hyperparameters (see RepmsConfig defaults)."""
    return RepmsConfig()


@dataclass(frozen=True)
class IterationRecord:
    """One outer iteration: values at the new iterate and the (ρ, ε) used."""

    outer_iter: int
    f: float
    h: float
    rho: float
    eps: float
    grad_norm: float
    step_norm: float


@dataclass
class RepmsState:
    """Evolving outer-loop state; ρ never decreases, ε never increases."""

    V: np.ndarray
    rho: float
    eps: float
    outer_iter: int = 0
    history: list[IterationRecord] = field(default_factory=list)


@dataclass(frozen=True)
class FitOutcome:
    V: np.ndarray
    status: FitStatus
    history: tuple[IterationRecord, ...]

    @property
    def proper(self) -> bool:
        return self.status is FitStatus.PROPER_TERMINATION


def inner_solve(
    prob: PenaltyProblem,
    V_warm: np.ndarray,
    rho: float,
    eps: float,
    config: RepmsConfig,
) -> tuple[np.ndarray, float]:
    """Descend Q(·, ρ) from V_warm until ||grad Q|| <= eps.

    Returns the first eps-stationary iterate.  If config.inner_max_iters
    accepted steps pass first, or progress falls below double-precision
    resolution of Q, it instead returns the visited iterate with the smallest
    Riemannian gradient norm.  Every accepted step decreases Q, so the
    returned point never has a larger penalty value than the warm start.

    Before returning an eps-stationary point, a handful of seeded tangent
    probes check that it is not a strict saddle (e.g. a non-leading
    eigenvector of Σ): if a probe finds a representable decrease, descent
    resumes from there, matching the convention that line-search solvers
    settle on local minima rather than arbitrary stationary points.

    Raises SolverStallError if backtracking cannot produce a decrease that
    is representable in double precision at a point that is not numerically
    stationary.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    V = np.asarray(V_warm, dtype=float)
    if orthonormality_residual(V) > ORTHONORMALITY_TOL:
        V = reorthonormalize(V)

    probe_rng: np.random.Generator | None = None

    def escape(V_cur: np.ndarray, q_cur: float):
        nonlocal probe_rng
        if probe_rng is None:
            probe_rng = np.random.Generator(np.random.Philox(config.seed))
        return _saddle_probe(prob, V_cur, q_cur, rho, probe_rng)

    _, _, q, _, rgrad = penalty_value_and_grads(prob, V, rho)
    grad_norm = float(np.linalg.norm(rgrad))
    best_V, best_norm = V, grad_norm
    if grad_norm <= eps:
        escaped = escape(V, q)
        if escaped is None:
            return V, grad_norm
        V = escaped
        _, _, q, _, rgrad = penalty_value_and_grads(prob, V, rho)
        grad_norm = float(np.linalg.norm(rgrad))
        best_V, best_norm = V, grad_norm

    resolution = 8.0 * np.finfo(float).eps
    step = min(1.0, 1.0 / grad_norm)
    flat_steps = 0
    for it in range(config.inner_max_iters):
        slope = -(grad_norm**2)
        q_floor = resolution * max(1.0, abs(q))
        t = step
        V_new = None
        for _ in range(_MAX_BACKTRACKS + 1):
            try:
                candidate = retract(V, -rgrad, t)
            except RetractionError:
                t *= _BACKTRACK_FACTOR
                continue
            q_trial = penalty_value(prob, candidate, rho)
            if q_trial <= q + _ARMIJO_C1 * t * slope:
                V_new = candidate
                break
            t *= _BACKTRACK_FACTOR
            if _ARMIJO_C1 * t * (-slope) < q_floor:
                break  # required decrease below the resolution of Q
        if V_new is None:
            if _ARMIJO_C1 * t * (-slope) < q_floor:
                # No representable decrease exists at this scale: the point
                # is stationary at working precision, not stalled.
                return best_V, best_norm
            raise SolverStallError(
                f"line search failed after {_MAX_BACKTRACKS} backtracks "
                f"(grad norm {grad_norm:.3e}, last step {t:.3e}, Q {q:.6e})",
                inner_iter=it,
                grad_norm=grad_norm,
                step=t,
                penalty_value=q,
            )

        _, _, q_new, _, rgrad_new = penalty_value_and_grads(prob, V_new, rho)
        new_norm = float(np.linalg.norm(rgrad_new))

        # Barzilai-Borwein trial step for the next iteration.
        s = V_new - V
        y = rgrad_new - rgrad
        sy = float(np.einsum("ij,ij->", s, y))
        if sy > 0 and np.isfinite(sy):
            step = float(np.einsum("ij,ij->", s, s)) / sy
            step = min(max(step, _BB_STEP_MIN), _BB_STEP_MAX)
        else:
            step = min(1.0, 1.0 / max(new_norm, 1e-300))

        flat_steps = flat_steps + 1 if q - q_new <= q_floor else 0
        V, q, rgrad, grad_norm = V_new, q_new, rgrad_new, new_norm
        if grad_norm < best_norm:
            best_V, best_norm = V, grad_norm
        if grad_norm <= eps:
            escaped = escape(V, q)
            if escaped is None:
                return V, grad_norm
            V = escaped
            _, _, q, _, rgrad = penalty_value_and_grads(prob, V, rho)
            grad_norm = float(np.linalg.norm(rgrad))
            flat_steps = 0
            continue
        if flat_steps >= 3:
            # Progress is below the resolution of Q: numerically stationary.
            return best_V, best_norm

    return best_V, best_norm


def _saddle_probe(
    prob: PenaltyProblem,
    V: np.ndarray,
    q: float,
    rho: float,
    rng: np.random.Generator,
) -> np.ndarray | None:
    """Look for a representable descent direction at a stationary point.

    Returns a strictly better nearby point, or None when every probe fails
    (the point behaves like a local minimum).
    """
    margin = 8.0 * np.finfo(float).eps * max(1.0, abs(q))
    for scale in (1e-4, 1e-3, 1e-2, 1e-1):
        for _ in range(2):
            xi = random_tangent(V, rng)
            norm = float(np.linalg.norm(xi))
            if norm == 0.0:
                continue
            candidate = retract(V, xi / norm, scale)
            if penalty_value(prob, candidate, rho) < q - margin:
                return candidate
    return None


def repms_fit(
    prob: PenaltyProblem, V0: np.ndarray, config: RepmsConfig | None = None
) -> FitOutcome:
    """Run the full penalty loop from V0 and return the final loading matrix.

    The outcome is PROPER_TERMINATION only when the returned V is
    τ-approximate fair, i.e. h(V) <= config.tau; otherwise the last iterate
    is returned flagged MAX_ITERATIONS_REACHED (a reportable result, not an
    error).  history holds one record per outer iteration with the exact
    (ρ_k, ε_k) used, so the update schedule can be replayed and audited.
    """
    if config is None:
        config = default_config()
    V = np.asarray(V0, dtype=float)
    if orthonormality_residual(V) > ORTHONORMALITY_TOL:
        V = reorthonormalize(V)

    state = RepmsState(V=V, rho=config.rho0, eps=config.eps0)
    for k in range(config.max_outer_iters):
        V_new, grad_norm = inner_solve(prob, state.V, state.rho, state.eps, config)
        step_norm = float(np.linalg.norm(V_new - state.V))
        h_new = constraint_h(prob, V_new)
        state.history.append(
            IterationRecord(
                outer_iter=k,
                f=objective_f(prob, V_new),
                h=h_new,
                rho=state.rho,
                eps=state.eps,
                grad_norm=grad_norm,
                step_norm=step_norm,
            )
        )
        if step_norm <= config.d_min and state.eps <= config.eps_min and h_new <= config.tau:
            return FitOutcome(V_new, FitStatus.PROPER_TERMINATION, tuple(state.history))
        state.eps = max(config.eps_min, config.theta_eps * state.eps)
        if h_new > config.tau:
            state.rho = min(config.theta_rho * state.rho, config.rho_max)
        state.V = V_new
        state.outer_iter = k + 1

    return FitOutcome(state.V, FitStatus.MAX_ITERATIONS_REACHED, tuple(state.history))
