"""Tasks bind a subset of the heuristic repository to a concrete binary
classification, and export labeled datasets for end-classifier training.

A task variant is just another task file: different include/exclude lists,
flipped polarities, or a different fallback class.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Mapping, Sequence

import yaml

from heurepo.artifacts import Dataset
from heurepo.errors import ParseError, ValidationError
from heurepo.heuristics import Registry
from heurepo.io_utils import write_jsonl
from heurepo.labelmodel import ProbLabel

ExportMode = Literal["soft", "hard", "model-labeled-only"]
EXPORT_MODES = ("soft", "hard", "model-labeled-only")
_OVERRIDES = ("flip", "positive", "negative")


@dataclass(frozen=True)
class TaskDefinition:
    name: str
    positive_label: str = "positive"
    negative_label: str = "negative"
    include: tuple[str, ...] = ()
    exclude: tuple[str, ...] = ()
    polarity_overrides: Mapping[str, str] = field(default_factory=dict)
    fallback_class: str = "negative"
    class_balance: float | None = None
    description: str = ""

    def __post_init__(self):
        if self.fallback_class not in ("positive", "negative"):
            raise ValidationError(f"task {self.name}: fallback_class must be 'positive' or 'negative'")
        bad = {k: v for k, v in self.polarity_overrides.items() if v not in _OVERRIDES}
        if bad:
            raise ValidationError(f"task {self.name}: polarity overrides must be one of {_OVERRIDES}: {bad}")
        if self.class_balance is not None and not 0.0 < self.class_balance < 1.0:
            raise ValidationError(f"task {self.name}: class_balance must lie strictly between 0 and 1")

    @property
    def fallback_vote(self) -> int:
        return 1 if self.fallback_class == "positive" else -1

    def label_name(self, vote: int) -> str:
        return self.positive_label if vote > 0 else self.negative_label

    @property
    def label_names(self) -> dict[str, int]:
        return {self.positive_label: 1, self.negative_label: -1}


def task_from_mapping(doc: Mapping[str, Any], where: str = "<task>") -> TaskDefinition:
    if not isinstance(doc, Mapping):
        raise ParseError(f"{where}: task definition must be a mapping")
    doc = doc.get("task", doc)
    if "name" not in doc:
        raise ParseError(f"{where}: task definition missing 'name'")
    known = {f for f in TaskDefinition.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise ParseError(f"{where}: unknown task fields {sorted(unknown)}")
    kw = dict(doc)
    for key in ("include", "exclude"):
        kw[key] = tuple(kw.get(key) or ())
    kw["polarity_overrides"] = dict(kw.get("polarity_overrides") or {})
    fallback = kw.get("fallback_class", "negative")
    # allow naming the fallback by the task's own label names
    if fallback == kw.get("positive_label"):
        kw["fallback_class"] = "positive"
    elif fallback == kw.get("negative_label"):
        kw["fallback_class"] = "negative"
    return TaskDefinition(**kw)


def load_task(path: str | Path) -> TaskDefinition:
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"{path}: task file not found")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: invalid YAML ({exc})") from exc
    return task_from_mapping(doc, str(path))


def find_task(heuristics_dir: str | Path, name: str) -> TaskDefinition:
    """Look up task ``name`` under ``<heuristics_dir>/tasks/``."""
    tasks_dir = Path(heuristics_dir) / "tasks"
    for suffix in (".yaml", ".yml"):
        candidate = tasks_dir / f"{name}{suffix}"
        if candidate.is_file():
            return load_task(candidate)
    if tasks_dir.is_dir():
        for path in sorted(tasks_dir.glob("*.y*ml")):
            task = load_task(path)
            if task.name == name:
                return task
    raise ParseError(f"task {name!r} not found in {tasks_dir}")


def resolve_task(task: TaskDefinition, registry: Registry) -> Registry:
    """The task's view of ``registry``: selected heuristics, in registry
    order, with polarity overrides applied."""
    referenced = set(task.include) | set(task.exclude) | set(task.polarity_overrides)
    unknown = sorted(n for n in referenced if n not in registry)
    if unknown:
        raise ValidationError(f"task {task.name}: unknown heuristics {unknown}")
    include = set(task.include)
    exclude = set(task.exclude)
    selected = [s for s in registry if (not include or s.name in include) and s.name not in exclude]
    if not selected:
        raise ValidationError(f"task {task.name}: selection resolves to no heuristics")
    chosen = {s.name for s in selected}
    stray = sorted(n for n in task.polarity_overrides if n not in chosen)
    if stray:
        raise ValidationError(f"task {task.name}: polarity overrides for unselected heuristics {stray}")
    view = Registry()
    for spec in selected:
        mode = task.polarity_overrides.get(spec.name)
        if mode == "flip" or (mode in ("positive", "negative") and mode != spec.polarity):
            spec = spec.flipped()
        view.add(spec)
    return view


@dataclass(frozen=True)
class ExportResult:
    records: tuple[dict, ...]
    mode: str
    n_input: int
    dropped: int
    fallback: int

    @property
    def n_exported(self) -> int:
        return len(self.records)

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "n_input": self.n_input,
            "exported": self.n_exported,
            "dropped": self.dropped,
            "fallback": self.fallback,
        }

    def write(self, path: str | Path) -> None:
        write_jsonl(path, self.records)


def export(
    task: TaskDefinition,
    labels: Sequence[ProbLabel],
    dataset: Dataset,
    mode: ExportMode = "model-labeled-only",
    fields: Sequence[str] = (),
) -> ExportResult:
    """Join probabilistic labels with the dataset's commits.

    ``soft`` keeps every row with its posterior only; ``hard`` adds a hard
    label, sending abstentions and exact ties to the task's fallback class;
    ``model-labeled-only`` drops rows the model abstained on.
    """
    if mode not in EXPORT_MODES:
        raise ValueError(f"unknown export mode {mode!r}")
    ids = [lb.artifact_id for lb in labels]
    if ids != dataset.commit_ids:
        raise ValidationError(
            f"labels ({len(ids)} rows) are not aligned with dataset {dataset.name!r} ({len(dataset)} commits)"
        )
    bad = [f for f in fields if f not in ("author", "timestamp", "files", "issue_ids")]
    if bad:
        raise ValidationError(f"unknown export fields {bad}")
    records = []
    dropped = fallback = 0
    for lb, commit in zip(labels, dataset.commits):
        if mode == "model-labeled-only" and lb.abstained:
            dropped += 1
            continue
        rec: dict[str, Any] = {"artifact_id": commit.id, "message": commit.message}
        for f in fields:
            value = getattr(commit, f)
            if f == "files":
                value = [fc.path for fc in value]
            elif isinstance(value, tuple):
                value = list(value)
            rec[f] = value
        rec["p_positive"] = lb.p_positive
        if mode == "soft":
            rec["hard_label"] = None
            rec["source"] = "abstain" if lb.abstained else "model"
        else:
            if lb.abstained or lb.p_positive == 0.5:
                vote, source = task.fallback_vote, "fallback"
                fallback += 1
            else:
                vote, source = (1 if lb.p_positive > 0.5 else -1), "model"
            rec["hard_label"] = task.label_name(vote)
            rec["source"] = source
        records.append(rec)
    return ExportResult(tuple(records), mode, len(labels), dropped, fallback)
