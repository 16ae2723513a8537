"""Pure-numpy reference implementations of the hot kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
The numerical contract (operation order for tree split scores, update rules
for the optimizers) is shared so the two backends agree to rounding.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from .streams import mix64_array, to_unit

_CHUNK = 1 << 16


def conditional_means(values, weights, absent):
    """Weighted mean of per-class values, overall and conditioned on each index being absent.

    Returns ``(total, loo, absent_mass)`` with shapes (L,), (L, n), (n,).
    Means are taken relative to each row's minimum and normalized by the
    summed weight, so a constant row comes back exactly.  ``loo[l, i]`` is nan
    when no class avoids index i.
    """
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64)
    mask = np.asarray(absent, dtype=np.float64)
    shift = values.min(axis=1, keepdims=True) if values.shape[1] else np.zeros((len(values), 1))
    return _finish(shift, (values - shift) * weights, weights, mask)


def _finish(shift, weighted, weights, mask):
    total = shift[:, 0] + weighted.sum(axis=1) / weights.sum()
    absent_mass = weights @ mask
    with np.errstate(invalid="ignore", divide="ignore"):
        loo = shift + (weighted @ mask) / absent_mass
    return total, loo, absent_mass


def table_conditional_means(keys, seedwords, weights, absent, low=0.0, high=1.0):
    """:func:`conditional_means` for a family of hash-table learners, one per seed word.

    The value of class c under learner l is ``low + (high - low) * unit(mix64(keys[c] ^ seedwords[l]))``.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    seedwords = np.asarray(seedwords, dtype=np.uint64)
    weights = np.asarray(weights, dtype=np.float64)
    mask = np.asarray(absent, dtype=np.float64)
    L, n = len(seedwords), mask.shape[1]
    if len(keys) == 0:
        return _finish(np.zeros((L, 1)), np.zeros((L, 0)), weights, mask)

    def value(k):
        return low + (high - low) * to_unit(mix64_array(k ^ seedwords[:, None]))

    shift = np.full((L, 1), np.inf)
    for start in range(0, len(keys), _CHUNK):
        shift = np.minimum(shift, value(keys[start:start + _CHUNK][None, :]).min(axis=1, keepdims=True))
    total = np.zeros(L)
    loo_num = np.zeros((L, n))
    for start in range(0, len(keys), _CHUNK):
        sl = slice(start, start + _CHUNK)
        weighted = (value(keys[sl][None, :]) - shift) * weights[sl]
        total += weighted.sum(axis=1)
        loo_num += weighted @ mask[sl]
    absent_mass = weights @ mask
    with np.errstate(invalid="ignore", divide="ignore"):
        loo = shift + loo_num / absent_mass
    return shift[:, 0] + total / weights.sum(), loo, absent_mass


POWER_ITERS = 50


def logistic_step(X, c):
    """Step 1/L with L = c * lambda_max(X^T X) / 4 + 1, lambda_max by power iteration from ones."""
    d = X.shape[1]
    v = np.full(d, 1.0 / np.sqrt(d))
    lam = 0.0
    for _ in range(POWER_ITERS):
        w = X.T @ (X @ v)
        lam = float(v @ w)
        norm = float(np.sqrt(w @ w))
        if norm == 0.0:
            break
        v = w / norm
    return 1.0 / (c * lam / 4.0 + 1.0)


def logistic_gd(X, y, c, iters):
    """Full-batch gradient descent on ``c * sum(logloss) + 0.5 * |theta|^2`` from theta = 0."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    step = logistic_step(X, c)
    theta = np.zeros(X.shape[1])
    for _ in range(iters):
        resid = expit(X @ theta) - y
        grad = c * (X.T @ resid) + theta
        theta = theta - step * grad
    return theta


def mlp_forward(X, W1, b1, W2, b2):
    z1 = X @ W1 + b1
    a1 = np.maximum(z1, 0.0)
    out = expit(a1 @ W2 + b2)
    return z1, a1, out


def mlp_loss_grad(X, y, W1, b1, W2, b2, alpha):
    """Mean log-loss plus ``0.5 * alpha * |W|^2 / batch`` and its gradient."""
    bs = X.shape[0]
    z1, a1, out = mlp_forward(X, W1, b1, W2, b2)
    eps = np.finfo(np.float64).eps
    o = np.clip(out, eps, 1 - eps)
    loss = -np.mean(y * np.log(o) + (1 - y) * np.log(1 - o))
    loss += 0.5 * alpha * (np.sum(W1 * W1) + np.sum(W2 * W2)) / bs
    delta2 = out - y
    gW2 = (a1.T @ delta2 + alpha * W2) / bs
    gb2 = delta2.sum() / bs
    d1 = np.outer(delta2, W2) * (z1 > 0)
    gW1 = (X.T @ d1 + alpha * W1) / bs
    gb1 = d1.sum(axis=0) / bs
    return loss, (gW1, gb1, gW2, gb2)


def mlp_train(X, y, W1, b1, W2, b2, perms, lr, alpha, momentum, batch):
    """Mini-batch SGD with Nesterov momentum; ``perms[e]`` orders the rows in epoch e."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    params = [np.array(W1, dtype=np.float64), np.array(b1, dtype=np.float64),
              np.array(W2, dtype=np.float64), float(b2)]
    vel = [np.zeros_like(params[0]), np.zeros_like(params[1]), np.zeros_like(params[2]), 0.0]
    m = X.shape[0]
    for perm in perms:
        for start in range(0, m, batch):
            rows = perm[start:start + batch]
            _, grads = mlp_loss_grad(X[rows], y[rows], *params, alpha)
            for k in range(4):
                vel[k] = momentum * vel[k] - lr * grads[k]
                params[k] = params[k] + (momentum * vel[k] - lr * grads[k])
    return params[0], params[1], params[2], float(params[3])


def tree_build(X, y, max_depth):
    """Greedy CART regression tree; returns node arrays (feature, threshold, left, right, value).

    Split score is ``SL^2/nL + SR^2/nR`` with sums accumulated in order of
    (x, row index); ties go to the lowest feature, then the lowest threshold.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(value) - 1

    root = new_node()
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        cnt = len(idx)
        value[node] = np.cumsum(y[idx])[-1] / cnt
        if depth >= max_depth or cnt < 2 or y[idx].min() == y[idx].max():
            continue
        best_score, best_f, best_thr = -np.inf, -1, 0.0
        for f in range(X.shape[1]):
            xf = X[idx, f]
            order = np.argsort(xf, kind="stable")
            xs, ys = xf[order], y[idx][order]
            cs = np.cumsum(ys)
            tot = cs[-1]
            nl = np.arange(1, cnt, dtype=np.float64)
            sl = cs[:-1]
            sr = tot - sl
            score = sl * sl / nl + sr * sr / (cnt - nl)
            valid = xs[:-1] < xs[1:]
            if not valid.any():
                continue
            score = np.where(valid, score, -np.inf)
            k = int(np.argmax(score))
            if score[k] > best_score:
                best_score, best_f = score[k], f
                thr = (xs[k] + xs[k + 1]) / 2.0
                best_thr = xs[k] if thr == xs[k + 1] else thr
        if best_f < 0:
            continue
        go_left = X[idx, best_f] <= best_thr
        feature[node], threshold[node] = best_f, best_thr
        lchild, rchild = new_node(), new_node()
        left[node], right[node] = lchild, rchild
        stack.append((rchild, idx[~go_left], depth + 1))
        stack.append((lchild, idx[go_left], depth + 1))
    return (np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64), np.array(value))
