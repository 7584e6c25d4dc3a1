from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from heurepo.errors import DimensionError, UnfitModelError
from heurepo.heuristics import LabelMatrix
from heurepo.labelmodel import (
    FitConfig,
    LabelModelParams,
    abstain_rate,
    fit,
    majority_vote,
    map_labels,
    posterior,
    predict,
    predict_proba,
    read_labels,
    sample_synthetic,
    write_labels,
)


def params(alpha, p=0.5, beta=None, names=()):
    beta = beta if beta is not None else [0.5] * len(alpha)
    return LabelModelParams(accuracies=alpha, propensities=beta, class_balance=p, names=names)


def matrix(rows, names=None):
    cells = np.array(rows, dtype=np.int8).reshape(len(rows), -1)
    names = names or tuple(f"lf{j}" for j in range(cells.shape[1]))
    return LabelMatrix(tuple(f"r{i}" for i in range(len(rows))), tuple(names), cells)


def sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


@pytest.mark.parametrize("row,expected", [
    ([1, 1, -1], 1), ([1, -1, 0], 0), ([0, 0, 0], 0), ([-1, 0, 0], -1),
])
def test_majority_vote(row, expected):
    assert majority_vote(np.array([row]))[0] == expected


def test_posterior_examples():
    assert posterior(params([0.9]), [1]) == pytest.approx(0.9, abs=1e-12)
    assert posterior(params([0.8, 0.8]), [1, -1]) == pytest.approx(0.5, abs=1e-12)
    oracle = sigmoid(math.log(9) - math.log(1.5))
    assert oracle == pytest.approx(6 / 7, abs=1e-15)
    assert posterior(params([0.9, 0.6]), [1, -1]) == pytest.approx(6 / 7, abs=1e-12)


def test_posterior_dimension_mismatch():
    with pytest.raises(DimensionError):
        posterior(params([0.9, 0.6]), [1])


def test_all_abstain_row_returns_prior():
    labels = predict(params([0.9, 0.7], p=0.4), matrix([[0, 0], [1, 0]]))
    assert labels[0].p_positive == 0.4 and labels[0].abstained
    assert not labels[1].abstained


def test_abstain_rate_two_of_ten():
    rows = [[0, 0]] * 2 + [[1, 0]] * 8
    labels = predict(params([0.8, 0.7]), matrix(rows))
    assert abstain_rate(labels) == 0.2


def test_single_column_fixed_point():
    # hand iteration: init alpha 1 -> clamp 0.99; q = sigmoid(0 + logit .99) = .99;
    # M-step alpha = .99, p = .99; next q = .9999 -> clamps keep alpha = p = .99
    fitted = fit(matrix([[1]] * 20))
    assert fitted.propensities.tolist() == [1.0]
    assert fitted.accuracies[0] == pytest.approx(0.99, abs=1e-12)
    assert fitted.class_balance == pytest.approx(0.99, abs=1e-12)
    assert fitted.converged


def test_identical_columns_equal_accuracy():
    rng = np.random.default_rng(0)
    col = rng.choice([-1, 0, 1], size=(200, 1))
    other = rng.choice([-1, 0, 1], size=(200, 1))
    fitted = fit(matrix(np.hstack([col, col, other]).tolist()))
    assert fitted.accuracies[0] == fitted.accuracies[1]


def test_unfit_errors():
    with pytest.raises(UnfitModelError):
        fit(matrix([[0, 0], [0, 0]]))
    with pytest.raises(UnfitModelError):
        fit(LabelMatrix(("a",), (), np.zeros((1, 0), dtype=np.int8)))


def test_zero_coverage_column_is_neutral():
    fitted = fit(matrix([[1, 0], [1, 0], [-1, 0], [1, 0]]))
    assert fitted.accuracies[1] == 0.5 and fitted.propensities[1] == 0.0


def test_frozen_class_balance():
    planted = params([0.8, 0.7, 0.75], beta=[0.4, 0.4, 0.4])
    L, _ = sample_synthetic(planted, 500, seed=1)
    fitted = fit(L, FitConfig(class_balance=0.3))
    assert fitted.class_balance == 0.3


def test_fit_is_deterministic():
    planted = params([0.8, 0.6, 0.7, 0.9], beta=[0.3, 0.5, 0.2, 0.4])
    L, _ = sample_synthetic(planted, 2000, seed=5)
    a, b = fit(L), fit(L)
    assert a == b
    assert a.to_dict() == b.to_dict()


def test_params_save_load(tmp_path):
    planted = params([0.8, 0.6], beta=[0.3, 0.5], names=("x", "y"))
    L, _ = sample_synthetic(planted, 300, seed=2)
    fitted = fit(L, FitConfig(class_balance=0.4))
    fitted.save(tmp_path / "m.json")
    again = LabelModelParams.load(tmp_path / "m.json")
    assert again == fitted
    assert again.config == fitted.config


def test_predict_aligns_columns_by_name():
    p = params([0.9, 0.6], names=("a", "b"))
    m = matrix([[-1, 1]], names=("b", "a"))
    assert predict(p, m)[0].p_positive == pytest.approx(6 / 7, abs=1e-12)


def test_labels_roundtrip(tmp_path):
    labels = predict(params([0.9, 0.7]), matrix([[1, 0], [0, 0], [-1, -1]]))
    write_labels(tmp_path / "l.jsonl", labels)
    assert read_labels(tmp_path / "l.jsonl") == labels


def test_sample_synthetic_degenerate_params():
    silent = params([0.8] * 3, beta=[0.0] * 3)
    L, _ = sample_synthetic(silent, 100, seed=0)
    assert not L.cells.any()
    perfect = params([1.0] * 3, beta=[1.0] * 3)
    L, y = sample_synthetic(perfect, 100, seed=0)
    assert all(np.array_equal(L.cells[:, j], y) for j in range(3))


def test_sample_synthetic_coverage():
    planted = params([0.7, 0.8], beta=[0.2, 0.45])
    L, _ = sample_synthetic(planted, 100_000, seed=11)
    coverage = (L.cells != 0).mean(axis=0)
    np.testing.assert_allclose(coverage, [0.2, 0.45], atol=0.01)


def test_map_labels_tie_goes_to_fallback():
    q = np.array([0.2, 0.5, 0.8])
    assert map_labels(q, -1).tolist() == [-1, -1, 1]
    assert map_labels(q, 1).tolist() == [-1, 1, 1]


cells = st.integers(1, 30).flatmap(
    lambda n: st.integers(1, 5).flatmap(lambda m: arrays(np.int8, (n, m), elements=st.sampled_from([-1, 0, 1]))))
acc = st.floats(0.05, 0.95)


@settings(max_examples=150, deadline=None)
@given(cells, st.data())
def test_posterior_properties(L, data):
    m = L.shape[1]
    alpha = data.draw(st.lists(acc, min_size=m, max_size=m))
    p = data.draw(st.floats(0.05, 0.95))
    q = predict_proba(params(alpha, p), matrix(L.tolist()))[0]
    assert ((q >= 0) & (q <= 1)).all()
    # flip symmetry
    q_neg = predict_proba(params(alpha, 1 - p), matrix((-L).tolist()))[0]
    np.testing.assert_allclose(q_neg, 1 - q, rtol=0, atol=1e-12)
    # monotonicity: turning an abstain into +1 from a better-than-chance heuristic raises q
    good = [max(a, 0.55) for a in alpha]
    base = predict_proba(params(good, p), matrix(L.tolist()))[0]
    for i, j in zip(*np.nonzero(L == 0)):
        row = L[i].copy()
        row[j] = 1
        assert posterior(params(good, p), row) > base[i]


@settings(max_examples=100, deadline=None)
@given(cells)
def test_uniform_accuracy_agrees_with_majority_vote(L):
    q = predict_proba(params([0.8] * L.shape[1]), matrix(L.tolist()))[0]
    mv = majority_vote(L)
    assert np.array_equal(np.sign(np.round(q - 0.5, 12)).astype(int), mv)


@settings(max_examples=30, deadline=None)
@given(arrays(np.int8, (60, 4), elements=st.sampled_from([-1, 0, 1])))
def test_fit_flip_symmetry(L):
    if not L.any():
        return
    a = fit(matrix(L.tolist()))
    b = fit(matrix((-L).tolist()))
    np.testing.assert_allclose(a.accuracies, b.accuracies, atol=1e-9)
    assert a.class_balance == pytest.approx(1 - b.class_balance, abs=1e-9)
