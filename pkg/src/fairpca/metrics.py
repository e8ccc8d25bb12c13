"""Evaluation of a fitted loading matrix.

Covers the four reported quantities: explained variance percentage, MMD² of
the projected protected groups, demographic-parity gap of a downstream
classifier, and per-feature communalities.

The downstream classifier is an RBF-kernel logistic regression (kernel
expansion on the training points, ridge penalty λ=1e-2 on the RKHS norm,
first-order descent to gradient tolerance 1e-6, decision threshold 0.5).
The demographic-parity gap is classifier-agnostic, so numbers are
trend-comparable rather than digit-comparable with an SVM-based protocol;
the report's config echo records the substitution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import DataSet
from .exceptions import DegenerateDataError
from .kernels import GroupedSamples, KernelConfig, _kernel_matrix, mmd_squared
from .objective import Covariance

_RIDGE_LAMBDA = 1e-2
_GRAD_TOL = 1e-6
_MAX_ITERS = 20_000


def explained_variance(cov: Covariance, V: np.ndarray) -> float:
    """100 · tr(V'ΣV) / tr(Σ), the captured share of total variance."""
    if V.shape[0] != cov.dim:
        raise ValueError(f"V must have {cov.dim} rows, got {V.shape}")
    if cov.trace <= 0.0:
        raise DegenerateDataError("covariance has non-positive trace")
    captured = float(np.einsum("ij,ij->", V, cov.matrix @ V))
    return 100.0 * captured / cov.trace


def fairness_mmd2(ds: DataSet, V: np.ndarray, config: KernelConfig) -> float:
    """MMD² between the projected protected groups, with the training-time σ."""
    samples = GroupedSamples(ds.group_features(0) @ V, ds.group_features(1) @ V)
    return mmd_squared(samples, config)


def communalities(V: np.ndarray) -> np.ndarray:
    """Per-feature sum of squared loadings; each in [0, 1], total d."""
    V = np.asarray(V, dtype=float)
    return np.einsum("ij,ij->i", V, V)


@dataclass(frozen=True)
class KernelLogisticClassifier:
    """RBF-kernel logistic regression trained by first-order descent."""

    support: np.ndarray
    alpha: np.ndarray
    intercept: float
    kernel: KernelConfig

    def decision_function(self, projected: np.ndarray) -> np.ndarray:
        projected = np.atleast_2d(np.asarray(projected, dtype=float))
        return _kernel_matrix(projected, self.support, self.kernel.sigma) @ self.alpha + self.intercept

    def predict_proba(self, projected: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision_function(projected))

    def predict(self, projected: np.ndarray) -> np.ndarray:
        return (self.predict_proba(projected) >= 0.5).astype(int)


def train_downstream_classifier(
    train_projected: np.ndarray,
    labels: np.ndarray,
    config: KernelConfig,
) -> KernelLogisticClassifier:
    """Fit the downstream classifier on projected training data.

    Minimizes mean logistic loss plus (λ/2)·α'Kα with λ=1e-2 by descent
    with a Barzilai-Borwein trial step and Armijo backtracking, run to
    gradient norm 1e-6.
    """
    X = np.asarray(train_projected, dtype=float)
    y = np.asarray(labels, dtype=float).ravel()
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("train_projected must be 2-D with one label per row")
    if not ((y == 0).any() and (y == 1).any()):
        raise DegenerateDataError("training labels contain a single class")

    m = X.shape[0]
    K = _kernel_matrix(X, X, config.sigma)
    y_pm = 2.0 * y - 1.0

    def value_and_grad(alpha: np.ndarray, b: float):
        f = K @ alpha + b
        value = float(np.logaddexp(0.0, -y_pm * f).mean())
        value += 0.5 * _RIDGE_LAMBDA * float(alpha @ (K @ alpha))
        residual = (_sigmoid(f) - y) / m
        grad_alpha = K @ (residual + _RIDGE_LAMBDA * alpha)
        grad_b = float(residual.sum())
        return value, grad_alpha, grad_b

    alpha = np.zeros(m)
    b = 0.0
    value, g_a, g_b = value_and_grad(alpha, b)
    step = 1.0
    prev = None
    for _ in range(_MAX_ITERS):
        grad_norm = float(np.sqrt(g_a @ g_a + g_b * g_b))
        if grad_norm <= _GRAD_TOL:
            break
        if prev is not None:
            s_a, s_b, y_a, y_b = prev
            sy = float(s_a @ y_a + s_b * y_b)
            if sy > 0:
                step = float(s_a @ s_a + s_b * s_b) / sy
            else:
                step = 1.0
        t = min(max(step, 1e-12), 1e8)
        slope = -(grad_norm**2)
        accepted = False
        for _ in range(60):
            cand_a = alpha - t * g_a
            cand_b = b - t * g_b
            cand_value, cand_ga, cand_gb = value_and_grad(cand_a, cand_b)
            if cand_value <= value + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break  # converged at working precision
        prev = (cand_a - alpha, cand_b - b, cand_ga - g_a, cand_gb - g_b)
        alpha, b, value, g_a, g_b = cand_a, cand_b, cand_value, cand_ga, cand_gb

    return KernelLogisticClassifier(support=X, alpha=alpha, intercept=float(b), kernel=config)


def classifier_accuracy(
    clf: KernelLogisticClassifier, projected: np.ndarray, labels: np.ndarray
) -> float:
    """Percent of correct hard predictions."""
    labels = np.asarray(labels, dtype=int).ravel()
    return 100.0 * float((clf.predict(projected) == labels).mean())


def delta_dp(
    test_projected: np.ndarray,
    protected: np.ndarray,
    clf: KernelLogisticClassifier,
) -> float:
    """Demographic-parity gap |E[g|A=0] - E[g|A=1]| of hard predictions."""
    protected = np.asarray(protected, dtype=int).ravel()
    preds = clf.predict(test_projected)
    if not ((protected == 0).any() and (protected == 1).any()):
        raise DegenerateDataError("both protected groups must appear in the test set")
    return abs(float(preds[protected == 0].mean()) - float(preds[protected == 1].mean()))


@dataclass(frozen=True)
class FitReport:
    """Evaluation summary of one fitted loading matrix.

    mmd2_test and delta_dp are absent when there is no held-out split or no
    outcome labels, respectively.  config_echo carries every hyperparameter
    and convention needed to reproduce the run (σ and how it was chosen,
    covariance divisor, seeds, solver settings, classifier substitution).
    """

    explained_variance_pct: float
    mmd2_train: float
    mmd2_test: float | None
    delta_dp: float | None
    communalities: np.ndarray
    status: str
    config_echo: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.explained_variance_pct <= 100.0:
            raise ValueError("explained_variance_pct must lie in [0, 100]")
        c = np.asarray(self.communalities, dtype=float)
        if c.min() < 0.0 or c.max() > 1.0 + 1e-10:
            raise ValueError("communalities must lie in [0, 1]")
        if self.delta_dp is not None and not 0.0 <= self.delta_dp <= 1.0:
            raise ValueError("delta_dp must lie in [0, 1]")
        object.__setattr__(self, "communalities", c)

    def scalar_items(self) -> list[tuple[str, object]]:
        items: list[tuple[str, object]] = [
            ("explained_variance_pct", self.explained_variance_pct),
            ("mmd2_train", self.mmd2_train),
        ]
        if self.mmd2_test is not None:
            items.append(("mmd2_test", self.mmd2_test))
        if self.delta_dp is not None:
            items.append(("delta_dp", self.delta_dp))
        items.append(("status", self.status))
        return items

    def to_kv_lines(self, feature_names: tuple[str, ...] | None = None) -> list[str]:
        """Flat key=value lines; floats keep full precision."""
        lines = [f"{key}={_format_value(val)}" for key, val in self.scalar_items()]
        names = feature_names or tuple(str(j) for j in range(self.communalities.size))
        lines += [
            f"communality_{name}={_format_value(val)}"
            for name, val in zip(names, self.communalities)
        ]
        lines += [
            f"{key}={_format_value(val)}" for key, val in sorted(self.config_echo.items())
        ]
        return lines

    def to_csv_row(
        self, feature_names: tuple[str, ...] | None = None
    ) -> tuple[list[str], list[str]]:
        """(header, row) pair for aggregating one report per split."""
        names = feature_names or tuple(str(j) for j in range(self.communalities.size))
        header = ["explained_variance_pct", "mmd2_train", "mmd2_test", "delta_dp", "status"]
        row = [
            _format_value(self.explained_variance_pct),
            _format_value(self.mmd2_train),
            "" if self.mmd2_test is None else _format_value(self.mmd2_test),
            "" if self.delta_dp is None else _format_value(self.delta_dp),
            self.status,
        ]
        header += [f"communality_{name}" for name in names]
        row += [_format_value(v) for v in self.communalities]
        return header, row


def _format_value(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
