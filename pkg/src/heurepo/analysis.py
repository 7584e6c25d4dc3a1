"""Heuristic diagnostics, evaluation metrics, baselines and the PR report."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from heurepo import kernels
from heurepo.artifacts import Dataset
from heurepo.errors import ParseError, ValidationError
from heurepo.heuristics import LabelMatrix, _make_matcher, align, apply_keyword, parse_spec
from heurepo.io_utils import iter_jsonl
from heurepo.labelmodel import FitConfig, LabelModelParams, ProbLabel, fit, predict

GOLD_LABELS = {"positive": 1, "negative": -1}


@dataclass(frozen=True)
class HeuristicDiagnostics:
    name: str
    coverage: float
    overlap: float
    conflict: float
    n_positive: int
    n_negative: int
    empirical_accuracy: float | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _check_gold(row_ids: Sequence[str], gold: Mapping[str, int]) -> np.ndarray:
    missing = [rid for rid in row_ids if rid not in gold]
    if missing:
        raise ValidationError(f"gold labels missing for {len(missing)} rows, e.g. {missing[:3]}")
    return np.array([gold[rid] for rid in row_ids], dtype=np.int8)


def diagnostics(matrix: LabelMatrix, gold: Mapping[str, int] | None = None) -> list[HeuristicDiagnostics]:
    """Per-heuristic coverage, overlap, conflict and (with gold) accuracy.

    All fractions are over the matrix's rows: overlap counts rows where the
    heuristic votes alongside at least one other heuristic, conflict counts
    rows where some other heuristic votes the opposite class.
    """
    n = matrix.shape[0]
    cov, ovl, cnf, pos, neg = kernels.vote_stats(matrix.cells)
    y = _check_gold(matrix.row_ids, gold) if gold is not None else None
    out = []
    for j, name in enumerate(matrix.column_names):
        acc = None
        if y is not None:
            col = matrix.cells[:, j]
            voted = col != 0
            acc = float((col[voted] == y[voted]).mean()) if voted.any() else None
        out.append(
            HeuristicDiagnostics(
                name=name,
                coverage=cov[j] / n if n else 0.0,
                overlap=ovl[j] / n if n else 0.0,
                conflict=cnf[j] / n if n else 0.0,
                n_positive=int(pos[j]),
                n_negative=int(neg[j]),
                empirical_accuracy=acc,
            )
        )
    return out


@dataclass(frozen=True)
class EvalReport:
    n: int
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    macro_f1: float
    precision_positive: float
    recall_positive: float
    f1_positive: float
    precision_negative: float
    recall_negative: float
    f1_negative: float
    abstain_rate: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def class_scores(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall, F1 for one class.

    A class never predicted and never present scores 1.0 on all three.
    Otherwise an empty denominator scores 0.0.
    """
    if tp + fp == 0 and tp + fn == 0:
        return 1.0, 1.0, 1.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def hard_labels(predicted, fallback: int = -1) -> tuple[dict[str, int], dict[str, bool]]:
    """Normalize predictions to ({id: +1/-1}, {id: abstained}).

    Accepts a sequence of ProbLabel (thresholded at 0.5, ties to ``fallback``)
    or a mapping of id to vote (0 meaning abstain).
    """
    labels: dict[str, int] = {}
    abstained: dict[str, bool] = {}
    if isinstance(predicted, Mapping):
        for rid, v in predicted.items():
            v = int(v)
            if v not in (-1, 0, 1):
                raise ValidationError(f"prediction for {rid!r} must be -1, 0 or +1")
            abstained[rid] = v == 0
            labels[rid] = v if v else fallback
        return labels, abstained
    for pl in predicted:
        if not isinstance(pl, ProbLabel):
            raise TypeError("predictions must be ProbLabels or a mapping of id to vote")
        if pl.artifact_id in labels:
            raise ValidationError(f"duplicate prediction for {pl.artifact_id!r}")
        abstained[pl.artifact_id] = pl.abstained
        if pl.abstained or pl.p_positive == 0.5:
            labels[pl.artifact_id] = fallback
        else:
            labels[pl.artifact_id] = 1 if pl.p_positive > 0.5 else -1
    return labels, abstained


def evaluate(predicted, gold: Mapping[str, int], fallback: int = -1) -> EvalReport:
    """Confusion-matrix metrics of ``predicted`` against ``gold`` (+1/-1 labels).

    Abstentions and exact 0.5 posteriors take the ``fallback`` class before
    scoring.
    """
    if not gold:
        raise ValidationError("gold labels are empty")
    if fallback not in (-1, 1):
        raise ValueError("fallback must be -1 or +1")
    labels, abstained = hard_labels(predicted, fallback)
    if set(labels) != set(gold):
        extra = sorted(set(labels) - set(gold))[:3]
        missing = sorted(set(gold) - set(labels))[:3]
        raise ValidationError(f"prediction/gold id mismatch (extra {extra}, missing {missing})")
    tp = fp = tn = fn = 0
    for rid, g in gold.items():
        p = labels[rid]
        if g not in (-1, 1):
            raise ValidationError(f"gold label for {rid!r} must be -1 or +1")
        if p == 1:
            if g == 1:
                tp += 1
            else:
                fp += 1
        elif g == -1:
            tn += 1
        else:
            fn += 1
    n = len(gold)
    pp, rp, fp1 = class_scores(tp, fp, fn)
    pn, rn, fn1 = class_scores(tn, fn, fp)
    return EvalReport(
        n=n,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        accuracy=(tp + tn) / n,
        macro_f1=(fp1 + fn1) / 2,
        precision_positive=pp,
        recall_positive=rp,
        f1_positive=fp1,
        precision_negative=pn,
        recall_negative=rn,
        f1_negative=fn1,
        abstain_rate=sum(abstained.values()) / n,
    )


def read_gold(path: str | Path, label_names: Mapping[str, int] | None = None) -> dict[str, int]:
    names = dict(GOLD_LABELS)
    if label_names:
        names.update(label_names)
    gold: dict[str, int] = {}
    for lineno, rec in iter_jsonl(path):
        where = f"{path}:{lineno}"
        if "artifact_id" not in rec or "label" not in rec:
            raise ParseError(f"{where}: gold records need 'artifact_id' and 'label'")
        if rec["label"] not in names:
            raise ParseError(f"{where}: unknown label {rec['label']!r}")
        if rec["artifact_id"] in gold:
            raise ValidationError(f"{where}: duplicate gold id {rec['artifact_id']!r}")
        gold[rec["artifact_id"]] = names[rec["label"]]
    return gold


# -- baselines --------------------------------------------------------------

BASELINES = ("gitcproc", "tufano")


def _baseline_dir() -> Path:
    return Path(str(resources.files("heurepo") / "data" / "baselines"))


def baseline_classify(name: str, dataset: Dataset, baseline_dir: str | Path | None = None) -> dict[str, int]:
    """Keyword baseline: a hit labels the commit positive, anything else negative."""
    path = Path(baseline_dir or _baseline_dir()) / f"{name}.yaml"
    if not path.is_file():
        raise ParseError(f"{path}: baseline keyword file not found")
    spec = parse_spec(yaml.safe_load(path.read_text(encoding="utf-8")), str(path), base_dir=path.parent)
    if spec.kind != "keyword" or spec.polarity != "positive":
        raise ParseError(f"{path}: baseline must be a positive keyword heuristic")
    matcher = _make_matcher(spec)
    return {c.id: apply_keyword(spec, c, matcher) or -1 for c in dataset.commits}


# -- leave-one-out contributions --------------------------------------------

_FIT_CACHE: dict[tuple[str, FitConfig], LabelModelParams] = {}


def cached_fit(matrix: LabelMatrix, config: FitConfig) -> LabelModelParams:
    """``fit`` memoized on (matrix content hash, config)."""
    key = (matrix.content_hash(), config)
    if key not in _FIT_CACHE:
        _FIT_CACHE[key] = fit(matrix, config)
    return _FIT_CACHE[key]


def model_eval(
    train: LabelMatrix, test: LabelMatrix, gold: Mapping[str, int], config: FitConfig, fallback: int = -1
) -> EvalReport:
    params = cached_fit(train, config)
    return evaluate(predict(params, align(test, train.column_names)), gold, fallback)


def leave_one_out(
    train: LabelMatrix,
    tests: Mapping[str, tuple[LabelMatrix, Mapping[str, int]]],
    names: Sequence[str],
    config: FitConfig | None = None,
    fallback: int = -1,
) -> dict[str, dict[str, float]]:
    """Accuracy lost on each test set when a heuristic is removed and the model refit."""
    config = config or FitConfig()
    full = {t: model_eval(train, m, g, config, fallback).accuracy for t, (m, g) in tests.items()}
    out: dict[str, dict[str, float]] = {}
    for name in names:
        reduced = train.drop(name)
        out[name] = {}
        for t, (m, g) in tests.items():
            if reduced.shape[1] == 0 or not reduced.cells.any():
                # without this heuristic nothing votes; everything falls back
                acc = evaluate({rid: 0 for rid in m.row_ids}, g, fallback).accuracy
            else:
                acc = model_eval(reduced, m, g, config, fallback).accuracy
            out[name][t] = full[t] - acc
    return out


# -- report -----------------------------------------------------------------

_METRICS = (
    ("accuracy", "accuracy"),
    ("macro F1", "macro_f1"),
    ("precision (positive)", "precision_positive"),
    ("recall (positive)", "recall_positive"),
    ("precision (negative)", "precision_negative"),
    ("recall (negative)", "recall_negative"),
    ("abstain rate", "abstain_rate"),
)


def fmt_delta(d: float) -> str:
    """Signed three-decimal delta; anything that rounds to zero prints as 0.000."""
    if round(d, 3) == 0:
        return "0.000"
    return f"{d:+.3f}"


def _fmt(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.3f}"


@dataclass(frozen=True)
class Report:
    markdown: str
    record: dict[str, Any]


def _by_test(ev) -> dict[str, EvalReport]:
    if ev is None:
        return {}
    if isinstance(ev, EvalReport):
        return {"test": ev}
    return dict(ev)


def render_report(
    diags: Sequence[HeuristicDiagnostics],
    eval_head: EvalReport | Mapping[str, EvalReport],
    eval_base: EvalReport | Mapping[str, EvalReport] | None = None,
    contributions: Mapping[str, Mapping[str, float]] | None = None,
    new_heuristics: Sequence[str] = (),
    title: str = "Label model report",
) -> Report:
    """Render the pull-request comment and its machine-readable twin.

    Deltas are head minus base per test set; without a base, deltas are 0.
    """
    head = _by_test(eval_head)
    base = _by_test(eval_base)
    contributions = contributions or {}
    new = set(new_heuristics)
    lines = [f"## {title}", ""]
    record: dict[str, Any] = {"tests": {}, "heuristics": [], "contributions": {}}

    for test, h in head.items():
        b = base.get(test, h)
        lines += [
            f"### Test set `{test}` (n={h.n})",
            "",
            "| metric | base | head | delta |",
            "|---|---:|---:|---:|",
        ]
        rec = {"base": b.to_dict(), "head": h.to_dict(), "delta": {}}
        for label, key in _METRICS:
            hv, bv = getattr(h, key), getattr(b, key)
            d = hv - bv
            rec["delta"][key] = d
            lines.append(f"| {label} | {bv:.3f} | {hv:.3f} | {fmt_delta(d)} |")
        record["tests"][test] = rec
        lines.append("")

    lines += [
        "### Heuristics",
        "",
        "| heuristic | coverage | overlap | conflict | +1 | -1 | accuracy | new |",
        "|---|---:|---:|---:|---:|---:|---:|:---:|",
    ]
    for d in diags:
        lines.append(
            f"| {d.name} | {d.coverage:.3f} | {d.overlap:.3f} | {d.conflict:.3f} | "
            f"{d.n_positive} | {d.n_negative} | {_fmt(d.empirical_accuracy)} | "
            f"{'yes' if d.name in new else ''} |"
        )
        record["heuristics"].append({**d.to_dict(), "new": d.name in new})
    lines.append("")

    if contributions:
        tests = list(next(iter(contributions.values())).keys())
        lines += [
            "### Contribution to accuracy (leave-one-out)",
            "",
            "| heuristic | " + " | ".join(tests) + " |",
            "|---|" + "---:|" * len(tests),
        ]
        for name, per_test in contributions.items():
            lines.append(f"| {name} | " + " | ".join(fmt_delta(per_test[t]) for t in tests) + " |")
            record["contributions"][name] = dict(per_test)
        lines.append("")

    return Report(markdown="\n".join(lines), record=record)
