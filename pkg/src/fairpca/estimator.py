"""Scikit-learn style estimator wrapping the penalty-method fit."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .kernels import BandwidthSelection, KernelConfig, median_heuristic
from .objective import Covariance, PenaltyProblem, constraint_h, pca_loadings
from .solver import RepmsConfig, repms_fit


class MMDFairPCA(BaseEstimator, TransformerMixin):
    """PCA constrained to make the projected protected groups MMD-indistinguishable.

    Learns a p×d loading matrix V with orthonormal columns maximizing the
    captured variance subject to MMD²(X₀V, X₁V) <= tau, where X₀/X₁ are the
    rows of the two protected groups.  The constraint is enforced by an
    exact penalty method on the Stiefel manifold.

    The protected group labels are passed as ``y`` in :meth:`fit`, so the
    estimator composes with pipelines and model-selection utilities.  The
    input is used as given; standardize beforehand (e.g. StandardScaler)
    when features live on different scales.

    Parameters mirror the solver configuration; ``sigma=None`` selects the
    RBF bandwidth by the median heuristic on the vanilla-PCA projection.

    Attributes:
        components_: (n_components, n_features) array, rows spanning the
            learned subspace (V transposed, scikit-learn layout).
        sigma_: RBF bandwidth actually used.
        status_: "proper_termination" when the returned V satisfies
            mmd2_train_ <= tau, else "max_iterations_reached".
        mmd2_train_: constraint value at the returned loading matrix.
        history_: per-outer-iteration solver records.
    """

    def __init__(
        self,
        n_components: int = 2,
        tau: float = 1e-5,
        sigma: float | None = None,
        max_outer_iters: int = 100,
        eps0: float = 1e-1,
        eps_min: float = 1e-6,
        theta_eps: float = 1e-1,
        rho0: float = 1.0,
        theta_rho: float = 2.0,
        rho_max: float = 1e10,
        d_min: float = 1e-6,
        inner_max_iters: int = 2000,
        random_state: int = 0,
    ):
        self.n_components = n_components
        self.tau = tau
        self.sigma = sigma
        self.max_outer_iters = max_outer_iters
        self.eps0 = eps0
        self.eps_min = eps_min
        self.theta_eps = theta_eps
        self.rho0 = rho0
        self.theta_rho = theta_rho
        self.rho_max = rho_max
        self.d_min = d_min
        self.inner_max_iters = inner_max_iters
        self.random_state = random_state

    def fit(self, X, y):
        """Learn the fair loading matrix.

        Args:
            X: (n_samples, n_features) data matrix.
            y: binary protected-group labels, one per row, both groups present.
        """
        X = check_array(X, dtype=float)
        groups = np.asarray(y).ravel()
        if groups.shape[0] != X.shape[0]:
            raise ValueError("y must provide one protected label per row of X")
        if not np.isin(groups, (0, 1)).all():
            raise ValueError("protected labels must be binary 0/1")
        if not ((groups == 0).any() and (groups == 1).any()):
            raise ValueError("both protected groups must be present")

        cov = Covariance.from_data(X)
        V0 = pca_loadings(cov, self.n_components)
        if self.sigma is None:
            kernel = KernelConfig(
                median_heuristic(X @ V0), BandwidthSelection.MEDIAN_HEURISTIC
            )
        else:
            kernel = KernelConfig(float(self.sigma), BandwidthSelection.MANUAL)

        problem = PenaltyProblem(cov, X[groups == 0], X[groups == 1], kernel)
        outcome = repms_fit(problem, V0, self._solver_config())

        self.n_features_in_ = X.shape[1]
        self.components_ = outcome.V.T
        self.covariance_ = cov
        self.sigma_ = kernel.sigma
        self.status_ = outcome.status.value
        self.history_ = outcome.history
        self.n_iter_ = len(outcome.history)
        self.mmd2_train_ = constraint_h(problem, outcome.V)
        return self

    def transform(self, X):
        """Project rows onto the learned subspace: X ↦ X V."""
        check_is_fitted(self, "components_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return X @ self.components_.T

    def _solver_config(self) -> RepmsConfig:
        return RepmsConfig(
            max_outer_iters=self.max_outer_iters,
            eps0=self.eps0,
            eps_min=self.eps_min,
            theta_eps=self.theta_eps,
            rho0=self.rho0,
            theta_rho=self.theta_rho,
            rho_max=self.rho_max,
            tau=self.tau,
            d_min=self.d_min,
            inner_max_iters=self.inner_max_iters,
            seed=self.random_state,
        )
