"""Generative label model over heuristic votes.

Heuristics are conditionally independent given the true label. Heuristic j
votes (does not abstain) with probability ``propensity[j]`` regardless of the
label. When it votes, it is right with probability ``accuracy[j]``. The
positive-class prior is ``class_balance``. Under that model the posterior
log-odds of a row is the prior log-odds plus ``vote * logit(accuracy)``
summed over the non-abstaining heuristics. Parameters are estimated without
gold labels by expectation-maximization.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from heurepo import kernels
from heurepo.errors import DimensionError, ParseError, UnfitModelError
from heurepo.heuristics import LabelMatrix
from heurepo.io_utils import iter_jsonl, read_json, write_json, write_jsonl

log = logging.getLogger(__name__)

ACC_MIN, ACC_MAX = 0.01, 0.99


def _logit(x):
    return np.log(x) - np.log1p(-x)


@dataclass(frozen=True)
class FitConfig:
    tol: float = 1e-6
    max_iter: int = 1000
    class_balance: float | None = None  # freezes the prior when set
    seed: int = 0
    init_floor: float = 0.55

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.class_balance is not None and not 0.0 < self.class_balance < 1.0:
            raise ValueError("class_balance must lie strictly between 0 and 1")


@dataclass(frozen=True, eq=False)
class LabelModelParams:
    accuracies: np.ndarray
    propensities: np.ndarray
    class_balance: float
    names: tuple[str, ...] = ()
    config: FitConfig | None = None
    n_iter: int = 0
    converged: bool = True
    log_likelihood: float | None = None
    matrix_hash: str = ""

    def __post_init__(self):
        acc = np.array(self.accuracies, dtype=np.float64).reshape(-1)
        prop = np.array(self.propensities, dtype=np.float64).reshape(-1)
        if acc.shape != prop.shape:
            raise DimensionError(f"{acc.size} accuracies but {prop.size} propensities")
        names = tuple(self.names) or tuple(f"lf{j}" for j in range(acc.size))
        if len(names) != acc.size:
            raise DimensionError(f"{len(names)} names for {acc.size} heuristics")
        if acc.size and (acc.min() < 0 or acc.max() > 1 or prop.min() < 0 or prop.max() > 1):
            raise ValueError("accuracies and propensities must lie in [0, 1]")
        if not 0.0 < self.class_balance < 1.0:
            raise ValueError("class_balance must lie strictly between 0 and 1")
        acc.setflags(write=False)
        prop.setflags(write=False)
        object.__setattr__(self, "accuracies", acc)
        object.__setattr__(self, "propensities", prop)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "class_balance", float(self.class_balance))

    @property
    def n_heuristics(self) -> int:
        return self.accuracies.size

    @property
    def weights(self) -> np.ndarray:
        """Per-heuristic vote weight, the log-odds of its accuracy."""
        return _logit(np.clip(self.accuracies, ACC_MIN, ACC_MAX))

    @property
    def prior_logit(self) -> float:
        p = self.class_balance
        return math.log(p) - math.log1p(-p)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelModelParams):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict[str, Any]:
        return {
            "heuristics": list(self.names),
            "accuracies": self.accuracies.tolist(),
            "propensities": self.propensities.tolist(),
            "class_balance": self.class_balance,
            "config": dataclasses.asdict(self.config) if self.config else None,
            "n_iter": self.n_iter,
            "converged": self.converged,
            "log_likelihood": self.log_likelihood,
            "matrix_hash": self.matrix_hash,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> LabelModelParams:
        try:
            cfg = d.get("config")
            return cls(
                accuracies=d["accuracies"],
                propensities=d["propensities"],
                class_balance=d["class_balance"],
                names=tuple(d["heuristics"]),
                config=FitConfig(**cfg) if cfg else None,
                n_iter=d.get("n_iter", 0),
                converged=d.get("converged", True),
                log_likelihood=d.get("log_likelihood"),
                matrix_hash=d.get("matrix_hash", ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed model record: {exc}") from exc

    def save(self, path: str | Path) -> None:
        write_json(path, self.to_dict())

    @classmethod
    def load(cls, path: str | Path) -> LabelModelParams:
        return cls.from_dict(read_json(path))


@dataclass(frozen=True)
class ProbLabel:
    artifact_id: str
    p_positive: float
    abstained: bool

    def to_record(self) -> dict:
        return {"artifact_id": self.artifact_id, "p_positive": self.p_positive, "abstained": self.abstained}


def _cells(matrix) -> np.ndarray:
    if isinstance(matrix, LabelMatrix):
        return matrix.cells
    return np.asarray(matrix, dtype=np.int8)


def majority_vote(matrix) -> np.ndarray:
    """Sign of each row's vote sum; ties and all-abstain rows give 0."""
    L = _cells(matrix)
    return np.sign(L.sum(axis=1, dtype=np.int64)).astype(np.int8)


def posterior(params: LabelModelParams, row: Sequence[int]) -> float:
    """P(positive | row). An all-abstain row returns the class balance."""
    votes = np.asarray(row, dtype=np.int8).reshape(-1)
    if votes.size != params.n_heuristics:
        raise DimensionError(f"row has {votes.size} votes, model has {params.n_heuristics} heuristics")
    if not votes.any():
        return params.class_balance
    q = kernels.posteriors(votes.reshape(1, -1), params.weights, params.prior_logit)
    return float(q[0])


def _aligned_cells(params: LabelModelParams, matrix: LabelMatrix) -> np.ndarray:
    if matrix.column_names == params.names:
        return matrix.cells
    if sorted(matrix.column_names) != sorted(params.names):
        raise DimensionError(
            f"matrix columns {list(matrix.column_names)} do not match model heuristics {list(params.names)}"
        )
    return matrix.select(params.names).cells


def predict_proba(params: LabelModelParams, matrix: LabelMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Return (p_positive per row, abstained mask)."""
    L = _aligned_cells(params, matrix)
    abstained = ~(L != 0).any(axis=1)
    q = kernels.posteriors(L, params.weights, params.prior_logit)
    q[abstained] = params.class_balance
    return q, abstained


def predict(params: LabelModelParams, matrix: LabelMatrix) -> list[ProbLabel]:
    q, abstained = predict_proba(params, matrix)
    return [
        ProbLabel(rid, float(qi), bool(ab))
        for rid, qi, ab in zip(matrix.row_ids, q.tolist(), abstained.tolist())
    ]


def write_labels(path: str | Path, labels: Sequence[ProbLabel]) -> None:
    write_jsonl(path, (lb.to_record() for lb in labels))


def read_labels(path: str | Path) -> list[ProbLabel]:
    out = []
    for lineno, rec in iter_jsonl(path):
        try:
            out.append(ProbLabel(str(rec["artifact_id"]), float(rec["p_positive"]), bool(rec["abstained"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}:{lineno}: malformed label record ({exc})") from exc
    return out


def abstain_rate(labels: Sequence[ProbLabel]) -> float:
    return sum(lb.abstained for lb in labels) / len(labels) if labels else 0.0


def _init_accuracies(L: np.ndarray, floor: float) -> np.ndarray:
    mv = majority_vote(L)
    alpha = np.empty(L.shape[1])
    for j in range(L.shape[1]):
        both = (L[:, j] != 0) & (mv != 0)
        rate = float((L[both, j] == mv[both]).mean()) if both.any() else floor
        alpha[j] = max(rate, floor)
    return np.clip(alpha, ACC_MIN, ACC_MAX)


def fit(matrix: LabelMatrix, config: FitConfig | None = None) -> LabelModelParams:
    """Estimate accuracies, propensities and class balance by EM.

    Columns that never vote are left out of the estimation with accuracy 0.5.
    Raises UnfitModelError when no row carries any vote.
    """
    config = config or FitConfig()
    L = _cells(matrix)
    n, m = L.shape
    if m == 0:
        raise UnfitModelError("cannot fit a label model on a matrix with no heuristics")
    voted = L != 0
    if not voted.any():
        raise UnfitModelError("every row abstains; nothing to fit")
    counts = voted.sum(axis=0)
    active = counts > 0
    La = np.ascontiguousarray(L[:, active])
    ca = counts[active].astype(np.float64)

    frozen = config.class_balance is not None
    alpha = _init_accuracies(La, config.init_floor)
    p = config.class_balance if frozen else 0.5

    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        q, agree = kernels.em_step(La, _logit(alpha), math.log(p) - math.log1p(-p))
        new_alpha = np.clip(agree / ca, ACC_MIN, ACC_MAX)
        new_p = p if frozen else float(np.clip(q.mean(), ACC_MIN, ACC_MAX))
        delta = max(float(np.abs(new_alpha - alpha).max()), abs(new_p - p))
        alpha, p = new_alpha, new_p
        log.debug("EM iteration %d: max parameter change %.3g", it, delta)
        if delta < config.tol:
            converged = True
            break
    if not converged:
        log.warning("EM did not converge within %d iterations (tol=%g)", config.max_iter, config.tol)

    if alpha.mean() < 0.5:
        # global label flip: same likelihood, adversarial orientation
        alpha = 1.0 - alpha
        if not frozen:
            p = 1.0 - p

    accuracies = np.full(m, 0.5)
    accuracies[active] = alpha
    propensities = counts / n
    ll = kernels.log_likelihood(La, alpha, propensities[active], p)
    log.info("EM finished after %d iterations, log-likelihood %.6f", it, ll)
    names = matrix.column_names if isinstance(matrix, LabelMatrix) else ()
    mhash = matrix.content_hash() if isinstance(matrix, LabelMatrix) else ""
    return LabelModelParams(
        accuracies=accuracies,
        propensities=propensities,
        class_balance=p,
        names=names,
        config=config,
        n_iter=it,
        converged=converged,
        log_likelihood=ll,
        matrix_hash=mhash,
    )


def sample_synthetic(
    planted: LabelModelParams, n: int, seed: int | np.random.Generator | None = None
) -> tuple[LabelMatrix, np.ndarray]:
    """Draw ``n`` rows from the generative model; returns (matrix, true labels in {-1, +1})."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    m = planted.n_heuristics
    y = np.where(rng.random(n) < planted.class_balance, 1, -1).astype(np.int8)
    votes = rng.random((n, m)) < planted.propensities
    correct = rng.random((n, m)) < planted.accuracies
    yc = y[:, None]
    cells = np.where(votes, np.where(correct, yc, -yc), 0).astype(np.int8)
    ids = tuple(f"r{i}" for i in range(n))
    return LabelMatrix(ids, planted.names, cells), y


def planted_params(
    m: int,
    rng: np.random.Generator,
    acc_range: tuple[float, float] = (0.55, 0.9),
    prop_range: tuple[float, float] = (0.1, 0.5),
    class_balance: float = 0.5,
) -> LabelModelParams:
    """Random planted parameters, uniform within the given ranges."""
    return LabelModelParams(
        accuracies=rng.uniform(*acc_range, size=m),
        propensities=rng.uniform(*prop_range, size=m),
        class_balance=class_balance,
    )


def map_labels(q: np.ndarray, fallback: int = -1) -> np.ndarray:
    """Hard labels from posteriors; exactly 0.5 resolves to ``fallback``."""
    return np.where(q > 0.5, 1, np.where(q < 0.5, -1, fallback)).astype(np.int8)


__all__ = [
    "FitConfig",
    "LabelModelParams",
    "ProbLabel",
    "abstain_rate",
    "fit",
    "majority_vote",
    "map_labels",
    "planted_params",
    "posterior",
    "predict",
    "predict_proba",
    "read_labels",
    "sample_synthetic",
    "write_labels",
]
