"""Geometry of the Stiefel manifold St(p, d) of p×d orthonormal-column matrices.

Points and tangent vectors are plain ndarrays; :func:`check_stiefel` and
:func:`check_tangent` are the validation helpers that enforce the invariants

    ||V'V - I||_F <= 1e-10          (point)
    ||sym(V'xi)||_F <= 1e-8         (tangent vector at V)

Tolerances are deliberately tiered: construction-time orthonormality at
1e-10, tangency at 1e-8, so accumulated drift is distinguishable from
single-operation round-off.
"""

from __future__ import annotations

import numpy as np

from .exceptions import RetractionError

ORTHONORMALITY_TOL = 1e-10
TANGENCY_TOL = 1e-8


def sym(a: np.ndarray) -> np.ndarray:
    """Symmetric part (A + A') / 2."""
    return 0.5 * (a + a.T)


def check_stiefel(V: np.ndarray, tol: float = ORTHONORMALITY_TOL) -> np.ndarray:
    """Validate that V is a p×d matrix with orthonormal columns, p > d >= 1."""
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise ValueError("a Stiefel point must be a 2-D matrix")
    p, d = V.shape
    if not p > d >= 1:
        raise ValueError(f"need p > d >= 1, got shape {V.shape}")
    err = orthonormality_residual(V)
    if not err <= tol:
        raise ValueError(f"columns are not orthonormal: ||V'V - I||_F = {err:.3e}")
    return V


def check_tangent(V: np.ndarray, xi: np.ndarray, tol: float = TANGENCY_TOL) -> np.ndarray:
    """Validate that xi lies in the tangent space at V."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != V.shape:
        raise ValueError(f"shape mismatch: point {V.shape}, tangent {xi.shape}")
    res = float(np.linalg.norm(sym(V.T @ xi)))
    if not res <= tol:
        raise ValueError(f"not a tangent vector: ||sym(V'xi)||_F = {res:.3e}")
    return xi


def orthonormality_residual(V: np.ndarray) -> float:
    return float(np.linalg.norm(V.T @ V - np.eye(V.shape[1])))


def tangent_project(V: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Orthogonal projection of G onto the tangent space at V.

    P(G) = G - V sym(V'G).  Idempotent.
    """
    G = np.asarray(G, dtype=float)
    if G.shape != V.shape:
        raise ValueError(f"shape mismatch: point {V.shape}, ambient {G.shape}")
    return G - V @ sym(V.T @ G)


def riemannian_gradient(V: np.ndarray, euclidean_grad: np.ndarray) -> np.ndarray:
    """Riemannian gradient = tangent projection of the Euclidean gradient."""
    return tangent_project(V, euclidean_grad)


def retract(V: np.ndarray, xi: np.ndarray, t: float) -> np.ndarray:
    """Move from V along t·xi and return to the manifold via thin QR.

    The diagonal of R is forced positive so the factorization is unique and
    retract(V, xi, 0) == V holds bit-for-bit (the zero step short-circuits).
    First-order agreement: ||retract(V, xi, t) - (V + t xi)||_F = O(t²).
    """
    xi = check_tangent(V, xi)
    if t == 0.0 or not xi.any():
        return V
    target = V + t * xi
    Q, R = np.linalg.qr(target)
    diag = np.diagonal(R)
    scale = np.abs(diag)
    if np.any(scale <= 1e-12 * max(1.0, float(np.abs(R).max()))):
        raise RetractionError(
            f"V + t*xi is numerically rank deficient at t={t:.3e}"
        )
    return Q * np.where(diag < 0.0, -1.0, 1.0)


def reorthonormalize(V: np.ndarray) -> np.ndarray:
    """QR-based clean-up for a point whose orthonormality has drifted."""
    Q, R = np.linalg.qr(np.asarray(V, dtype=float))
    diag = np.diagonal(R)
    return Q * np.where(diag < 0.0, -1.0, 1.0)


def random_stiefel(p: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Random point on St(p, d): Q factor of a standard Gaussian matrix."""
    return reorthonormalize(rng.standard_normal((p, d)))


def random_tangent(V: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random tangent vector at V: projected standard Gaussian matrix."""
    return tangent_project(V, rng.standard_normal(V.shape))
