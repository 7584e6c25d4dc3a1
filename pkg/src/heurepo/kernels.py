"""Hot numeric kernels over the ternary vote matrix.

Each kernel has two implementations with identical contracts: an explicit
loop version compiled with numba, and a vectorized numpy version. The public
names are bound to one of them according to ``heurepo._jit.BACKEND``.
Vote matrices are ``int8`` arrays of shape (n_rows, n_heuristics) with cells
in {-1, 0, +1}.
"""

from __future__ import annotations

import math

import numpy as np

from heurepo._jit import BACKEND, njit

# -- loop kernels (numba) ---------------------------------------------------


@njit
def _sigmoid_scalar(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit
def _posteriors_loop(L, weights, prior_logit):
    n, m = L.shape
    q = np.empty(n, dtype=np.float64)
    for i in range(n):
        z = prior_logit
        for j in range(m):
            v = L[i, j]
            if v != 0:
                z += v * weights[j]
        q[i] = _sigmoid_scalar(z)
    return q


@njit
def _em_step_loop(L, weights, prior_logit):
    n, m = L.shape
    q = _posteriors_loop(L, weights, prior_logit)
    agree = np.zeros(m, dtype=np.float64)
    # fixed row order keeps the reduction bit-reproducible
    for i in range(n):
        qi = q[i]
        for j in range(m):
            v = L[i, j]
            if v > 0:
                agree[j] += qi
            elif v < 0:
                agree[j] += 1.0 - qi
    return q, agree


@njit
def _log_likelihood_loop(L, alpha, beta, p):
    n, m = L.shape
    log_p = math.log(p)
    log_q = math.log(1.0 - p)
    total = 0.0
    for i in range(n):
        lp = log_p
        ln = log_q
        for j in range(m):
            v = L[i, j]
            if v == 0:
                if beta[j] < 1.0:
                    a = math.log(1.0 - beta[j])
                    lp += a
                    ln += a
                else:
                    lp = -np.inf
                    ln = -np.inf
            elif v > 0:
                lp += math.log(beta[j] * alpha[j])
                ln += math.log(beta[j] * (1.0 - alpha[j]))
            else:
                lp += math.log(beta[j] * (1.0 - alpha[j]))
                ln += math.log(beta[j] * alpha[j])
        hi = max(lp, ln)
        if hi == -np.inf:
            return -np.inf
        total += hi + math.log(math.exp(lp - hi) + math.exp(ln - hi))
    return total


@njit
def _vote_stats_loop(L):
    n, m = L.shape
    coverage = np.zeros(m, dtype=np.int64)
    overlap = np.zeros(m, dtype=np.int64)
    conflict = np.zeros(m, dtype=np.int64)
    positive = np.zeros(m, dtype=np.int64)
    negative = np.zeros(m, dtype=np.int64)
    for i in range(n):
        npos = 0
        nneg = 0
        for j in range(m):
            v = L[i, j]
            if v > 0:
                npos += 1
            elif v < 0:
                nneg += 1
        for j in range(m):
            v = L[i, j]
            if v == 0:
                continue
            coverage[j] += 1
            if npos + nneg > 1:
                overlap[j] += 1
            if v > 0:
                positive[j] += 1
                if nneg > 0:
                    conflict[j] += 1
            else:
                negative[j] += 1
                if npos > 0:
                    conflict[j] += 1
    return coverage, overlap, conflict, positive, negative


# -- vectorized kernels (numpy) ---------------------------------------------


def _sigmoid_np(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _posteriors_numpy(L, weights, prior_logit):
    z = prior_logit + (L * weights).sum(axis=1)
    return _sigmoid_np(np.asarray(z, dtype=np.float64))


def _em_step_numpy(L, weights, prior_logit):
    q = _posteriors_numpy(L, weights, prior_logit)
    qc = q[:, None]
    agree = np.where(L > 0, qc, np.where(L < 0, 1.0 - qc, 0.0)).sum(axis=0)
    return q, agree


def _log_likelihood_numpy(L, alpha, beta, p):
    with np.errstate(divide="ignore"):
        log_abstain = np.log1p(-beta)
        log_right = np.log(beta * alpha)
        log_wrong = np.log(beta * (1.0 - alpha))
    pos = L > 0
    neg = L < 0
    zero = ~(pos | neg)
    base = np.where(zero, log_abstain, 0.0)
    lp = np.log(p) + (base + np.where(pos, log_right, 0.0) + np.where(neg, log_wrong, 0.0)).sum(axis=1)
    ln = np.log1p(-p) + (base + np.where(pos, log_wrong, 0.0) + np.where(neg, log_right, 0.0)).sum(axis=1)
    if not np.all(np.isfinite(np.maximum(lp, ln))):
        return -np.inf
    return float(np.logaddexp(lp, ln).sum())


def _vote_stats_numpy(L):
    pos = L > 0
    neg = L < 0
    voted = pos | neg
    npos = pos.sum(axis=1, keepdims=True)
    nneg = neg.sum(axis=1, keepdims=True)
    others = (npos + nneg) > 1
    coverage = voted.sum(axis=0)
    overlap = (voted & others).sum(axis=0)
    conflict = ((pos & (nneg > 0)) | (neg & (npos > 0))).sum(axis=0)
    as_i64 = lambda a: np.asarray(a, dtype=np.int64)
    return (
        as_i64(coverage),
        as_i64(overlap),
        as_i64(conflict),
        as_i64(pos.sum(axis=0)),
        as_i64(neg.sum(axis=0)),
    )


LOOP_KERNELS = {
    "posteriors": _posteriors_loop,
    "em_step": _em_step_loop,
    "log_likelihood": _log_likelihood_loop,
    "vote_stats": _vote_stats_loop,
}
NUMPY_KERNELS = {
    "posteriors": _posteriors_numpy,
    "em_step": _em_step_numpy,
    "log_likelihood": _log_likelihood_numpy,
    "vote_stats": _vote_stats_numpy,
}

_active = LOOP_KERNELS if BACKEND == "numba" else NUMPY_KERNELS


def _as_votes(L) -> np.ndarray:
    return np.ascontiguousarray(L, dtype=np.int8)


def posteriors(L, weights, prior_logit: float) -> np.ndarray:
    """P(positive | row) for every row, given per-heuristic log-odds weights."""
    return _active["posteriors"](_as_votes(L), np.ascontiguousarray(weights, dtype=np.float64), float(prior_logit))


def em_step(L, weights, prior_logit: float) -> tuple[np.ndarray, np.ndarray]:
    """Return (row posteriors, per-column expected agreement mass)."""
    return _active["em_step"](_as_votes(L), np.ascontiguousarray(weights, dtype=np.float64), float(prior_logit))


def log_likelihood(L, alpha, beta, p: float) -> float:
    return float(
        _active["log_likelihood"](
            _as_votes(L),
            np.ascontiguousarray(alpha, dtype=np.float64),
            np.ascontiguousarray(beta, dtype=np.float64),
            float(p),
        )
    )


def vote_stats(L) -> tuple[np.ndarray, ...]:
    """Per-column (coverage, overlap, conflict, positive, negative) row counts."""
    return _active["vote_stats"](_as_votes(L))
