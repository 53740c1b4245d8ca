"""Multinomial logistic regression with L2 penalty.

Minimises mean cross-entropy plus 0.5 * l2 * ||W||^2 (bias excluded)
with L-BFGS. The loss/gradient pair is exposed for finite-difference
verification.
"""

import numpy as np
from scipy.optimize import minimize


def softmax(scores):
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def unpack(w_flat, d, k):
    W = w_flat[: d * k].reshape(d, k)
    b = w_flat[d * k :]
    return W, b


def loss_and_grad(w_flat, X, y_onehot, l2):
    n, d = X.shape
    k = y_onehot.shape[1]
    W, b = unpack(w_flat, d, k)
    probs = softmax(X @ W + b)
    eps = 1e-300
    loss = -np.mean(np.sum(y_onehot * np.log(probs + eps), axis=1))
    loss += 0.5 * l2 * float((W * W).sum())
    diff = (probs - y_onehot) / n
    grad_W = X.T @ diff + l2 * W
    grad_b = diff.sum(axis=0)
    return loss, np.concatenate([grad_W.ravel(), grad_b])


def fit(X, y, n_classes, l2=1e-4, max_iter=500, tol=1e-6):
    n, d = X.shape
    y_onehot = np.zeros((n, n_classes))
    y_onehot[np.arange(n), y] = 1.0
    w0 = np.zeros(d * n_classes + n_classes)
    result = minimize(
        loss_and_grad,
        w0,
        args=(X, y_onehot, l2),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "gtol": tol, "ftol": 1e-12},
    )
    W, b = unpack(result.x, d, n_classes)
    grad_norm = float(np.abs(result.jac).max()) if result.jac is not None else np.nan
    return {
        "weights": W,
        "bias": b,
        "converged": bool(result.success),
        "iterations": int(result.nit),
        "grad_norm": grad_norm,
    }


def predict_proba(params, X):
    return softmax(X @ params["weights"] + params["bias"])
