"""The compiled loop kernels and the vectorized numpy kernels must agree."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from heurepo import kernels

loop = kernels.LOOP_KERNELS
vec = kernels.NUMPY_KERNELS

votes = st.integers(1, 40).flatmap(
    lambda n: st.integers(1, 6).flatmap(
        lambda m: arrays(np.int8, (n, m), elements=st.sampled_from([-1, 0, 1]))
    )
)
probs = st.floats(0.01, 0.99)


@settings(max_examples=200, deadline=None)
@given(votes, st.data())
def test_kernels_agree(L, data):
    m = L.shape[1]
    alpha = np.array(data.draw(st.lists(probs, min_size=m, max_size=m)))
    beta = np.array(data.draw(st.lists(probs, min_size=m, max_size=m)))
    p = data.draw(probs)
    w = np.log(alpha) - np.log1p(-alpha)
    prior = np.log(p) - np.log1p(-p)

    np.testing.assert_allclose(loop["posteriors"](L, w, prior), vec["posteriors"](L, w, prior), rtol=0, atol=1e-12)
    q1, a1 = loop["em_step"](L, w, prior)
    q2, a2 = vec["em_step"](L, w, prior)
    np.testing.assert_allclose(q1, q2, rtol=0, atol=1e-12)
    np.testing.assert_allclose(a1, a2, rtol=1e-12, atol=1e-12)
    assert loop["log_likelihood"](L, alpha, beta, p) == pytest.approx(
        vec["log_likelihood"](L, alpha, beta, p), rel=1e-12, abs=1e-9)
    for x, y in zip(loop["vote_stats"](L), vec["vote_stats"](L)):
        assert np.array_equal(x, y)


def test_log_likelihood_matches_enumeration():
    # independent oracle: sum over y of p(y) * prod_j p(vote_j | y)
    rng = np.random.default_rng(3)
    L = rng.integers(-1, 2, size=(25, 3)).astype(np.int8)
    alpha = np.array([0.8, 0.6, 0.7])
    beta = np.array([0.3, 0.5, 0.9])
    p = 0.4
    total = 0.0
    for row in L:
        lik = 0.0
        for y, py in ((1, p), (-1, 1 - p)):
            prod = py
            for v, a, b in zip(row, alpha, beta):
                prod *= (1 - b) if v == 0 else b * (a if v == y else 1 - a)
            lik += prod
        total += np.log(lik)
    assert kernels.log_likelihood(L, alpha, beta, p) == pytest.approx(total, rel=1e-12)


def test_empty_inputs():
    L = np.zeros((0, 3), dtype=np.int8)
    w = np.zeros(3)
    assert kernels.posteriors(L, w, 0.0).shape == (0,)
    cov, ovl, cnf, pos, neg = kernels.vote_stats(L)
    assert cov.tolist() == [0, 0, 0]


@pytest.mark.parametrize("backend,expect", [("numpy", "numpy"), ("numba", None)])
def test_backend_env_flag(backend, expect):
    import os
    import subprocess
    import sys

    code = "from heurepo import _jit, kernels; print(_jit.BACKEND, kernels._active is kernels.NUMPY_KERNELS)"
    env = dict(os.environ, HEUREPO_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
    name, is_numpy = out.stdout.split()
    if expect == "numpy":
        assert name == "numpy" and is_numpy == "True"
    else:
        # numba when installed, otherwise the loop kernels run as plain python
        assert is_numpy == "False"
