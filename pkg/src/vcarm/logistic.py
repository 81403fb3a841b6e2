"""L2-penalized logistic regression fitted by iteratively reweighted least squares.

The objective is the negative Bernoulli log-likelihood plus (lam/2)*||w||^2
over the non-intercept weights. `penalized_nll` / `penalized_nll_grad` expose
the objective so the analytic gradient can be checked against finite
differences. Categorical features are one-hot encoded dropping the first
level; numeric design columns are standardized internally for conditioning,
with coefficients and Wald standard errors reported on the original scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FitError(RuntimeError):
    pass


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def penalized_nll(beta: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Negative log-likelihood + (lam/2)*||beta[1:]||^2; column 0 is the intercept."""
    z = X @ beta
    ll = np.sum(y * z - np.logaddexp(0.0, z))
    return float(-ll + 0.5 * lam * np.sum(beta[1:] ** 2))


def penalized_nll_grad(beta: np.ndarray, X: np.ndarray, y: np.ndarray,
                       lam: float) -> np.ndarray:
    p = sigmoid(X @ beta)
    grad = X.T @ (p - y)
    grad[1:] += lam * beta[1:]
    return grad


def irls(X: np.ndarray, y: np.ndarray, lam: float, tol: float = 1e-8,
         max_iter: int = 100) -> np.ndarray:
    """Newton iterations until the gradient norm drops below tol.

    Backtracks by step halving when a full step would increase the objective,
    which rescues weakly penalized separable problems.
    """
    n, d = X.shape
    beta = np.zeros(d)
    obj = penalized_nll(beta, X, y, lam)
    ridge = np.eye(d) * lam
    ridge[0, 0] = 0.0
    for it in range(max_iter):
        grad = penalized_nll_grad(beta, X, y, lam)
        if not np.all(np.isfinite(grad)):
            raise FitError(f"non-finite gradient at IRLS iteration {it}")
        if np.linalg.norm(grad) < tol:
            break
        p = sigmoid(X @ beta)
        w = np.clip(p * (1.0 - p), 1e-10, None)
        H = (X.T * w) @ X + ridge
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        scale = 1.0
        moved = False
        for _ in range(30):
            candidate = beta - scale * step
            new_obj = penalized_nll(candidate, X, y, lam)
            if np.isfinite(new_obj) and new_obj <= obj + 1e-12:
                beta, obj, moved = candidate, new_obj, True
                break
            scale *= 0.5
        if not moved:
            break
        if not np.isfinite(obj):
            raise FitError(f"non-finite loss at IRLS iteration {it}")
    return beta


def build_design(X: np.ndarray, ncats: np.ndarray) -> np.ndarray:
    """Intercept + numerics as-is + one-hot (drop first level) categoricals."""
    cols = [np.ones(X.shape[0])]
    for j in range(X.shape[1]):
        if ncats[j] == 0:
            cols.append(X[:, j].astype(float))
        else:
            for level in range(1, int(ncats[j])):
                cols.append((X[:, j] == level).astype(float))
    return np.column_stack(cols)


@dataclass
class LogisticModel:
    """Fitted model over a mixed-type feature matrix.

    `coef` and `standard_errors` are on the raw design scale (intercept
    first, then numerics, then one-hot dummies).
    """

    coef: np.ndarray
    standard_errors: np.ndarray
    ncats: np.ndarray
    lam: float

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if X.shape[0] == 0:
            return np.empty(0)
        return sigmoid(build_design(X, self.ncats) @ self.coef)


def fit_logistic_table(X: np.ndarray, y: np.ndarray, ncats: np.ndarray,
                       lam: float = 1.0) -> LogisticModel:
    ncats = np.asarray(ncats, dtype=np.int64)
    D_raw = build_design(np.asarray(X, dtype=float), ncats)
    y = np.asarray(y, dtype=float)

    means = D_raw[:, 1:].mean(axis=0)
    sds = D_raw[:, 1:].std(axis=0)
    sds = np.where(sds < 1e-12, 1.0, sds)
    D = D_raw.copy()
    D[:, 1:] = (D[:, 1:] - means) / sds

    beta_std = irls(D, y, lam)
    beta = beta_std.copy()
    beta[1:] = beta_std[1:] / sds
    beta[0] = beta_std[0] - np.sum(beta_std[1:] * means / sds)

    # Wald standard errors from the unpenalized Fisher information, raw scale.
    p = sigmoid(D_raw @ beta)
    w = np.clip(p * (1.0 - p), 1e-10, None)
    H = (D_raw.T * w) @ D_raw
    try:
        cov = np.linalg.inv(H)
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        se = np.full(len(beta), np.nan)
    return LogisticModel(coef=beta, standard_errors=se, ncats=ncats, lam=lam)
