"""nu-one-class SVM with an RBF kernel, solved by pairwise coordinate updates.

Dual problem:  minimize (1/2) a'Ka  subject to  0 <= a_i <= 1/(nu*n), sum a_i = 1.
Decision value f(x) = sum_i a_i K(x_i, x) - rho; anomaly score = rho - sum_i a_i K(x_i, x)
so that higher = more anomalous, matching the distance detectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData, NonConvergence

DEFAULT_GAMMA = 1.0 / 31.0
KKT_TOL = 1e-4


@dataclass(frozen=True)
class OcSvmModel:
    support_vectors: np.ndarray  # (n_sv, d)
    alphas: np.ndarray           # (n_sv,)
    rho: float
    gamma: float
    nu: float
    kkt_gap: float = 0.0  # dual optimality gap at convergence


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """K[i, j] = exp(-gamma * ||a_i - b_j||^2)."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * a @ b.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def fit_ocsvm(train: np.ndarray, nu: float = 0.1, gamma: float = DEFAULT_GAMMA,
              tol: float = KKT_TOL, max_iter: int = 100_000) -> OcSvmModel:
    """Solve the dual by repeatedly moving mass between the most violating pair."""
    if not 0.0 < nu <= 1.0:
        raise ValueError(f"nu must be in (0, 1], got {nu}")
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    x = np.atleast_2d(np.asarray(train, dtype=np.float64))
    n = x.shape[0]
    if n < 2:
        raise InsufficientData("one-class SVM needs >= 2 training rows")
    c = 1.0 / (nu * n)
    kmat = rbf_kernel(x, x, gamma)

    # Feasible start: spread the unit mass over the first ceil(nu*n) points.
    alpha = np.zeros(n)
    n_init = int(np.ceil(nu * n))
    alpha[:n_init] = 1.0 / n_init
    if alpha[0] > c:  # only when nu*n is fractional and tiny
        alpha[:] = 1.0 / n
    grad = kmat @ alpha

    converged = False
    gap = np.inf
    for _ in range(max_iter):
        up_mask = alpha < c - 1e-12      # can receive mass
        down_mask = alpha > 1e-12        # can give mass
        i = int(np.argmax(np.where(down_mask, grad, -np.inf)))
        j = int(np.argmin(np.where(up_mask, grad, np.inf)))
        gap = grad[i] - grad[j]
        if gap <= tol:
            converged = True
            break
        denom = kmat[i, i] + kmat[j, j] - 2.0 * kmat[i, j]
        if denom <= 1e-15:
            step = min(alpha[i], c - alpha[j])
        else:
            step = min((grad[i] - grad[j]) / denom, alpha[i], c - alpha[j])
        alpha[i] -= step
        alpha[j] += step
        grad += step * (kmat[:, j] - kmat[:, i])
    if not converged:
        raise NonConvergence(f"one-class SVM: KKT gap above {tol} after {max_iter} iterations")

    # rho from margin points; fall back to the KKT interval midpoint.
    margin = (alpha > 1e-8) & (alpha < c - 1e-8)
    if margin.any():
        rho = float(grad[margin].mean())
    else:
        lo = grad[alpha < c - 1e-12].min()
        hi = grad[alpha > 1e-12].max()
        rho = float((lo + hi) / 2.0)

    sv = alpha > 1e-12
    return OcSvmModel(support_vectors=x[sv].copy(), alphas=alpha[sv].copy(),
                      rho=rho, gamma=gamma, nu=nu, kkt_gap=float(max(gap, 0.0)))


def decision_values(m: OcSvmModel, mat: np.ndarray) -> np.ndarray:
    """f(x) = sum_i a_i K(sv_i, x) - rho; negative means outlier."""
    kmat = rbf_kernel(mat, m.support_vectors, m.gamma)
    return kmat @ m.alphas - m.rho


def score_ocsvm(m: OcSvmModel, x: np.ndarray) -> float:
    """Anomaly score: rho - sum_i a_i K(sv_i, x). Higher = more anomalous."""
    return float(-decision_values(m, np.atleast_2d(x))[0])


def score_ocsvm_batch(m: OcSvmModel, mat: np.ndarray) -> np.ndarray:
    return -decision_values(m, np.atleast_2d(mat))


def training_outlier_fraction(m: OcSvmModel, train: np.ndarray,
                              tol: float = KKT_TOL) -> float:
    """Fraction of training rows strictly outside the margin (bounded by nu).

    Margin points can land within the solver's KKT tolerance of zero on either
    side, so only decision values below -tol count as outliers.
    """
    return float((decision_values(m, np.atleast_2d(train)) < -tol).mean())
