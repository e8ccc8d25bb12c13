"""Objective, constraint, and penalty function of the fair-PCA program.

The program minimizes f(V) = -<Σ, VV'> = -tr(V'ΣV) over St(p, d) subject to
h(V) = MMD²(data0·V, data1·V) = 0.  The penalty method works with
Q(V, ρ) = f(V) + ρ h(V) for a growing penalty weight ρ.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateDataError
from .kernels import GroupedSamples, KernelConfig, mmd_squared, mmd_squared_and_gradient
from .stiefel import tangent_project

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10


@dataclass(frozen=True)
class Covariance:
    """Symmetric PSD sample covariance with its trace cached."""

    matrix: np.ndarray
    trace: float = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"covariance must be square, got {m.shape}")
        scale = max(1.0, float(np.abs(m).max()))
        if float(np.linalg.norm(m - m.T)) > SYMMETRY_TOL * scale:
            raise ValueError("covariance must be symmetric")
        if float(np.linalg.eigvalsh(m).min()) < -PSD_TOL * scale:
            raise ValueError("covariance must be positive semi-definite")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "trace", float(np.trace(m)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @staticmethod
    def from_data(features: np.ndarray) -> "Covariance":
        """Sample covariance of the rows, with the 1/(n-1) divisor."""
        features = np.asarray(features, dtype=float)
        if features.shape[0] < 2:
            raise DegenerateDataError("covariance needs at least two rows")
        centered = features - features.mean(axis=0)
        m = centered.T @ centered / (features.shape[0] - 1)
        return Covariance(0.5 * (m + m.T))


@dataclass(frozen=True)
class PenaltyProblem:
    """Everything a penalty evaluation needs: Σ, the two groups, the kernel."""

    covariance: Covariance
    data0: np.ndarray
    data1: np.ndarray
    kernel: KernelConfig

    def __post_init__(self):
        d0 = np.asarray(self.data0, dtype=float)
        d1 = np.asarray(self.data1, dtype=float)
        p = self.covariance.dim
        if d0.ndim != 2 or d1.ndim != 2 or d0.shape[1] != p or d1.shape[1] != p:
            raise ValueError(
                f"group data must have {p} columns, got {d0.shape} and {d1.shape}"
            )
        if d0.shape[0] < 1 or d1.shape[0] < 1:
            raise ValueError("both groups must be non-empty")
        object.__setattr__(self, "data0", d0)
        object.__setattr__(self, "data1", d1)

    @property
    def dim(self) -> int:
        return self.covariance.dim


def objective_f(prob: PenaltyProblem, V: np.ndarray) -> float:
    """f(V) = -tr(V'ΣV); bounded below by minus the top-d eigenvalue mass."""
    SV = prob.covariance.matrix @ V
    return -float(np.einsum("ij,ij->", V, SV))


def objective_f_gradient(prob: PenaltyProblem, V: np.ndarray) -> np.ndarray:
    """Euclidean gradient of f: -2ΣV (Σ symmetric)."""
    if V.shape[0] != prob.dim:
        raise ValueError(f"V must have {prob.dim} rows, got {V.shape}")
    return -2.0 * (prob.covariance.matrix @ V)


def constraint_h(prob: PenaltyProblem, V: np.ndarray) -> float:
    """h(V) = MMD² of the two projected groups; always >= 0."""
    samples = GroupedSamples(prob.data0 @ V, prob.data1 @ V)
    return mmd_squared(samples, prob.kernel)


def constraint_h_gradient(prob: PenaltyProblem, V: np.ndarray) -> np.ndarray:
    _, grad = mmd_squared_and_gradient(V, prob.data0, prob.data1, prob.kernel)
    return grad


def penalty_Q(prob: PenaltyProblem, V: np.ndarray, rho: float) -> float:
    """Q(V, ρ) = f(V) + ρ h(V) for ρ > 0."""
    _check_rho(rho)
    return objective_f(prob, V) + rho * constraint_h(prob, V)


penalty_value = penalty_Q  # line-search alias: value-only, no gradient work


def penalty_Q_gradient(prob: PenaltyProblem, V: np.ndarray, rho: float) -> np.ndarray:
    """Euclidean gradient of Q: grad f + ρ grad h."""
    _check_rho(rho)
    return objective_f_gradient(prob, V) + rho * constraint_h_gradient(prob, V)


def penalty_value_and_grads(
    prob: PenaltyProblem, V: np.ndarray, rho: float
) -> tuple[float, float, float, np.ndarray, np.ndarray]:
    """One-pass evaluation used by the solver.

    Returns (f, h, Q, euclidean grad Q, Riemannian grad Q); the kernel
    matrices are shared between h and its gradient.
    """
    _check_rho(rho)
    f = objective_f(prob, V)
    h, h_grad = mmd_squared_and_gradient(V, prob.data0, prob.data1, prob.kernel)
    grad = objective_f_gradient(prob, V) + rho * h_grad
    rgrad = tangent_project(V, grad)
    return f, h, f + rho * h, grad, rgrad


def pca_loadings(cov: Covariance, d: int) -> np.ndarray:
    """Top-d eigenvectors of Σ as a p×d loading matrix (vanilla PCA).

    Columns are ordered by decreasing eigenvalue; each column's sign is
    fixed so its largest-magnitude entry is positive.
    """
    p = cov.dim
    if not 1 <= d < p:
        raise ValueError(f"need 1 <= d < p, got d={d}, p={p}")
    eigvals, eigvecs = np.linalg.eigh(cov.matrix)
    V = eigvecs[:, ::-1][:, :d]
    anchor = np.abs(V).argmax(axis=0)
    signs = np.where(V[anchor, np.arange(d)] < 0.0, -1.0, 1.0)
    return V * signs


def _check_rho(rho: float) -> None:
    if not rho > 0:
        raise ValueError(f"penalty weight rho must be positive, got {rho}")
