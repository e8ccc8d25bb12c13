"""RBF kernel, bandwidth selection, and MMD² estimation.

The squared maximum mean discrepancy between two sample sets is estimated
with the biased V-statistic

    MMD²(X, Y) = (1/m²) Σ_ij k(X_i, X_j) + (1/n²) Σ_ij k(Y_i, Y_j)
                 - (2/mn) Σ_ij k(X_i, Y_j)

which is non-negative for any positive-definite kernel.  The kernel is the
Gaussian RBF k(x, y) = exp(-||x - y||² / 2σ²).  When the two sample sets are
projections data·V of fixed data matrices, MMD² has a closed-form Euclidean
gradient with respect to V; see :func:`mmd_squared_gradient`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateDataError


class BandwidthSelection(enum.Enum):
    MANUAL = "manual"
    MEDIAN_HEURISTIC = "median_heuristic"


@dataclass(frozen=True)
class KernelConfig:
    """RBF bandwidth and how it was chosen.

    Attributes:
        sigma: kernel bandwidth σ > 0, in the units of the projected space.
        selection: whether sigma was set manually or by the median heuristic.
    """

    sigma: float
    selection: BandwidthSelection = BandwidthSelection.MANUAL

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")


@dataclass(frozen=True)
class GroupedSamples:
    """Two sample sets sharing a feature dimension (rows are samples)."""

    group0: np.ndarray
    group1: np.ndarray

    def __post_init__(self):
        g0 = np.asarray(self.group0, dtype=float)
        g1 = np.asarray(self.group1, dtype=float)
        if g0.ndim != 2 or g1.ndim != 2:
            raise ValueError("groups must be 2-D (n_samples, n_features)")
        if g0.shape[0] < 1 or g1.shape[0] < 1:
            raise ValueError("both groups must contain at least one sample")
        if g0.shape[1] != g1.shape[1]:
            raise ValueError(
                f"groups must share the feature dimension, got {g0.shape[1]} and {g1.shape[1]}"
            )
        object.__setattr__(self, "group0", g0)
        object.__setattr__(self, "group1", g1)


def rbf_kernel(x: np.ndarray, y: np.ndarray, config: KernelConfig) -> float:
    """Evaluate k(x, y) = exp(-||x - y||² / 2σ²) for two vectors.

    Returns a value in (0, 1]; exactly 1 iff x == y.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("inputs must be finite")
    diff = x - y
    return float(np.exp(-diff.dot(diff) / (2.0 * config.sigma**2)))


def median_heuristic(samples: np.ndarray) -> float:
    """Median of the n(n-1)/2 pairwise Euclidean distances (unsquared).

    For an even pair count the lower of the two middle order statistics is
    taken, so the result is always one of the observed distances.  Raises
    :class:`DegenerateDataError` when the median distance is zero (the
    bandwidth σ would be 0).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    n = samples.shape[0]
    if n < 2:
        raise ValueError("median heuristic requires at least two samples")
    sq = _pairwise_sq_dists(samples, samples)
    iu = np.triu_indices(n, k=1)
    dists = np.sqrt(sq[iu])
    dists.sort()
    median = float(dists[(dists.size - 1) // 2])
    if median <= 0.0:
        raise DegenerateDataError("median pairwise distance is zero")
    return median


def mmd_squared(samples: GroupedSamples, config: KernelConfig) -> float:
    """Biased V-statistic estimate of MMD² between the two groups.

    Includes the i = j kernel terms, which keeps the estimate non-negative.
    Symmetric in swapping the groups.
    """
    k00 = _kernel_matrix(samples.group0, samples.group0, config.sigma)
    k11 = _kernel_matrix(samples.group1, samples.group1, config.sigma)
    k01 = _kernel_matrix(samples.group0, samples.group1, config.sigma)
    value = k00.mean() + k11.mean() - 2.0 * k01.mean()
    return max(float(value), 0.0)


def mmd_squared_gradient(
    V: np.ndarray,
    data0: np.ndarray,
    data1: np.ndarray,
    config: KernelConfig,
) -> np.ndarray:
    """Euclidean gradient of V ↦ MMD²(data0·V, data1·V).

    ``V`` is a p×d loading matrix and the data matrices carry p columns.
    Returns a p×d matrix.
    """
    _, grad = mmd_squared_and_gradient(V, data0, data1, config)
    return grad


def mmd_squared_and_gradient(
    V: np.ndarray,
    data0: np.ndarray,
    data1: np.ndarray,
    config: KernelConfig,
) -> tuple[float, np.ndarray]:
    """MMD² of the projected groups and its Euclidean gradient in V.

    Shares the kernel matrices between the value and the gradient.  With
    K the kernel matrix of projected rows, H the diagonal of its row sums
    and H~ the diagonal of its column sums, the three gradient pieces are

        grad h1 = -(2 / m²σ²) X'(H_X - K_X) X V
        grad h2 = -(2 / n²σ²) Y'(H_Y - K_Y) Y V
        grad h3 = -(1 / mnσ²) (X'H_XY X + Y'H~_XY Y - X'K_XY Y - Y'K_XY'X) V

    and the total is grad h1 + grad h2 - 2 grad h3.  The kernel matrices are
    recomputed on every call; nothing is cached across V.
    """
    V = np.asarray(V, dtype=float)
    X = np.asarray(data0, dtype=float)
    Y = np.asarray(data1, dtype=float)
    p = V.shape[0]
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != p or Y.shape[1] != p:
        raise ValueError(
            f"data matrices must have {p} columns, got {X.shape} and {Y.shape}"
        )
    m, n = X.shape[0], Y.shape[0]
    sigma2 = config.sigma**2

    P0 = X @ V
    P1 = Y @ V
    k00 = _kernel_matrix(P0, P0, config.sigma)
    k11 = _kernel_matrix(P1, P1, config.sigma)
    k01 = _kernel_matrix(P0, P1, config.sigma)

    value = max(float(k00.mean() + k11.mean() - 2.0 * k01.mean()), 0.0)

    # (H - K) X V realized as row_sums * P - K P, never forming diag(H).
    g1 = X.T @ (k00.sum(axis=1)[:, None] * P0 - k00 @ P0)
    g1 *= -2.0 / (m * m * sigma2)
    g2 = Y.T @ (k11.sum(axis=1)[:, None] * P1 - k11 @ P1)
    g2 *= -2.0 / (n * n * sigma2)
    g3 = (
        X.T @ (k01.sum(axis=1)[:, None] * P0)
        + Y.T @ (k01.sum(axis=0)[:, None] * P1)
        - X.T @ (k01 @ P1)
        - Y.T @ (k01.T @ P0)
    )
    g3 *= -1.0 / (m * n * sigma2)

    return value, g1 + g2 - 2.0 * g3


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances via ||a||² - 2a·b + ||b||²."""
    a_sq = np.einsum("ij,ij->i", a, a)
    b_sq = np.einsum("ij,ij->i", b, b)
    sq = a_sq[:, None] - 2.0 * (a @ b.T) + b_sq[None, :]
    np.maximum(sq, 0.0, out=sq)
    return sq


def _kernel_matrix(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    sq = _pairwise_sq_dists(a, b)
    sq *= -1.0 / (2.0 * sigma**2)
    return np.exp(sq, out=sq)
