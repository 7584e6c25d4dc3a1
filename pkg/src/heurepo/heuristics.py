"""Heuristic definitions and their application to artifacts.

A heuristic either fires, voting for its polarity, or abstains. Declarative
heuristics live in YAML files (``keyword`` and ``threshold`` kinds); anything
more involved is a ``plugin`` backed by a Python callable.
"""

from __future__ import annotations

import csv
import dataclasses
import importlib
import io
import logging
import operator
import os
import re
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np
import yaml

from heurepo.artifacts import CommitArtifact, Dataset, IssueArtifact
from heurepo.errors import DimensionError, DuplicateIdError, ParseError, ValidationError
from heurepo.io_utils import canonical_json, read_json, sha256_text, write_json

log = logging.getLogger(__name__)

POSITIVE, ABSTAIN, NEGATIVE = 1, 0, -1

ARTIFACT_KINDS = ("commit", "issue")
POLARITIES = {"positive": POSITIVE, "negative": NEGATIVE}
KINDS = ("keyword", "threshold", "plugin")

KEYWORD_FIELDS = ("message", "issue_title", "issue_body", "issue_labels")
MATCH_MODES = ("token", "substring")
COMPARATORS: dict[str, Callable[[float, float], bool]] = {
    ">": operator.gt,
    ">=": operator.ge,
    "<": operator.lt,
    "<=": operator.le,
    "==": operator.eq,
    "!=": operator.ne,
}

_SPEC_KEYS = {"name", "artifact_kind", "polarity", "kind", "params", "description"}
_PARAM_KEYS = {
    "keyword": {"keywords", "keywords_file", "keyword_groups", "field", "mode"},
    "threshold": {"field", "op", "bound"},
    "plugin": {"callable"},
}

_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on every non-alphanumeric character.

    >>> tokenize("re-fix/bug_X")
    ['re', 'fix', 'bug', 'x']
    """
    return _TOKEN_RE.findall(text.lower())


# -- numeric fields for threshold heuristics --------------------------------

COMMIT_NUMERIC_FIELDS: dict[str, Callable[[CommitArtifact], float]] = {
    "file_count": lambda c: len(c.files),
    "additions": lambda c: c.additions,
    "deletions": lambda c: c.deletions,
    "churn": lambda c: c.additions + c.deletions,
    "message_tokens": lambda c: len(tokenize(c.message)),
    "issue_count": lambda c: len(c.linked_issues),
    "timestamp": lambda c: c.timestamp,
}
ISSUE_NUMERIC_FIELDS: dict[str, Callable[[IssueArtifact], float]] = {
    "label_count": lambda i: len(i.labels),
    "title_tokens": lambda i: len(tokenize(i.title)),
    "body_tokens": lambda i: len(tokenize(i.body)),
}


@dataclass(frozen=True)
class HeuristicSpec:
    name: str
    artifact_kind: str
    polarity: str
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    description: str = ""
    source: str = field(default="", compare=False)
    fn: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @property
    def sign(self) -> int:
        return POLARITIES[self.polarity]

    def flipped(self) -> HeuristicSpec:
        other = "negative" if self.polarity == "positive" else "positive"
        return dataclasses.replace(self, polarity=other)

    def to_record(self) -> dict:
        params = dict(self.params)
        if self.kind == "plugin" and "callable" not in params and self.fn is not None:
            params["callable"] = f"{self.fn.__module__}:{self.fn.__qualname__}"
        return {
            "name": self.name,
            "artifact_kind": self.artifact_kind,
            "polarity": self.polarity,
            "kind": self.kind,
            "params": params,
        }


class Registry:
    """Ordered collection of uniquely named heuristics."""

    def __init__(self, specs: Iterable[HeuristicSpec] = ()):
        self._specs: dict[str, HeuristicSpec] = {}
        for spec in specs:
            self.add(spec)

    def add(self, spec: HeuristicSpec) -> HeuristicSpec:
        if spec.name in self._specs:
            prev = self._specs[spec.name].source or "<registered>"
            here = spec.source or "<registered>"
            raise ValidationError(f"duplicate heuristic name {spec.name!r} in {prev} and {here}")
        self._specs[spec.name] = spec
        return spec

    def register_plugin(
        self,
        name: str,
        artifact_kind: str,
        fn: Callable[[Any], int | None],
        polarity: str = "positive",
    ) -> HeuristicSpec:
        """Register a callable heuristic. Its return value is taken as the vote
        (``None`` meaning abstain) and negated when ``polarity`` is negative."""
        if artifact_kind not in ARTIFACT_KINDS:
            raise ValidationError(f"unknown artifact kind {artifact_kind!r}")
        spec = HeuristicSpec(
            name=name, artifact_kind=artifact_kind, polarity=polarity, kind="plugin", fn=fn
        )
        return self.add(spec)

    def __iter__(self) -> Iterator[HeuristicSpec]:
        return iter(self._specs.values())

    def __len__(self) -> int:
        return len(self._specs)

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def __getitem__(self, name: str) -> HeuristicSpec:
        return self._specs[name]

    @property
    def names(self) -> list[str]:
        return list(self._specs)

    def content_hash(self) -> str:
        return sha256_text(canonical_json([s.to_record() for s in self]))


# -- loading ----------------------------------------------------------------


def _read_keyword_file(path: Path) -> list[str]:
    if not path.is_file():
        raise ParseError(f"{path}: keyword file not found")
    words = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            words.append(line)
    return words


def _resolve_callable(ref: str, where: str) -> Callable:
    mod_name, _, attr = ref.partition(":")
    if not mod_name or not attr:
        raise ParseError(f"{where}: plugin callable must look like 'module:function', got {ref!r}")
    try:
        obj = importlib.import_module(mod_name)
        for part in attr.split("."):
            obj = getattr(obj, part)
    except (ImportError, AttributeError) as exc:
        raise ParseError(f"{where}: cannot import plugin {ref!r} ({exc})") from exc
    if not callable(obj):
        raise ParseError(f"{where}: plugin {ref!r} is not callable")
    return obj


def parse_spec(doc: Mapping, where: str, base_dir: Path | None = None) -> HeuristicSpec:
    """Build a validated HeuristicSpec from one YAML document.

    Kind-specific parameters may sit under ``params`` or directly at top level.
    """
    if not isinstance(doc, Mapping):
        raise ParseError(f"{where}: heuristic spec must be a mapping")
    for key in ("name", "kind", "polarity"):
        if key not in doc:
            raise ParseError(f"{where}: missing field {key!r}")
    name = doc["name"]
    if not isinstance(name, str) or not name:
        raise ParseError(f"{where}: name must be a non-empty string")
    origin = where
    where = f"{where} ({name})"
    kind = doc["kind"]
    if kind not in KINDS:
        raise ParseError(f"{where}: bad kind {kind!r}, expected one of {KINDS}")
    polarity = doc["polarity"]
    if polarity not in POLARITIES:
        raise ParseError(f"{where}: bad polarity {polarity!r}")
    artifact_kind = doc.get("artifact_kind", "commit")
    if artifact_kind not in ARTIFACT_KINDS:
        raise ParseError(f"{where}: bad artifact_kind {artifact_kind!r}")

    params = dict(doc.get("params") or {})
    for key, value in doc.items():
        if key not in _SPEC_KEYS:
            params[key] = value
    unknown = set(params) - _PARAM_KEYS[kind]
    if unknown:
        raise ParseError(f"{where}: unknown parameters {sorted(unknown)} for kind {kind!r}")

    fn = None
    if kind == "keyword":
        params = _check_keyword_params(params, artifact_kind, where, base_dir)
    elif kind == "threshold":
        _check_threshold_params(params, artifact_kind, where)
    else:
        ref = params.get("callable")
        if not isinstance(ref, str):
            raise ParseError(f"{where}: plugin needs a 'callable' reference")
        fn = _resolve_callable(ref, where)

    return HeuristicSpec(
        name=name,
        artifact_kind=artifact_kind,
        polarity=polarity,
        kind=kind,
        params=params,
        description=str(doc.get("description", "")),
        source=origin,
        fn=fn,
    )


def _check_keyword_params(params: dict, artifact_kind: str, where: str, base_dir: Path | None) -> dict:
    params.setdefault("field", "message")
    params.setdefault("mode", "token")
    if params["field"] not in KEYWORD_FIELDS:
        raise ParseError(f"{where}: bad keyword field {params['field']!r}")
    if artifact_kind == "issue" and params["field"] == "message":
        raise ParseError(f"{where}: issue heuristics cannot match the commit message")
    if params["mode"] not in MATCH_MODES:
        raise ParseError(f"{where}: bad match mode {params['mode']!r}")

    keywords = list(params.get("keywords") or [])
    if "keywords_file" in params:
        kw_path = Path(params.pop("keywords_file"))
        if not kw_path.is_absolute() and base_dir is not None:
            kw_path = base_dir / kw_path
        keywords += _read_keyword_file(kw_path)
    groups = params.get("keyword_groups")
    if groups is not None:
        if keywords:
            raise ParseError(f"{where}: use either keywords or keyword_groups, not both")
        if not isinstance(groups, list) or not groups or not all(
            isinstance(g, list) and g and all(isinstance(k, str) and k for k in g) for g in groups
        ):
            raise ParseError(f"{where}: keyword_groups must be a non-empty list of non-empty keyword lists")
        params["keyword_groups"] = [list(g) for g in groups]
        all_words = [k for g in groups for k in g]
    else:
        if not keywords or not all(isinstance(k, str) and k for k in keywords):
            raise ParseError(f"{where}: keyword heuristic needs a non-empty keyword list")
        params["keywords"] = keywords
        all_words = keywords
    if params["mode"] == "token":
        empty = [k for k in all_words if not tokenize(k)]
        if empty:
            raise ParseError(f"{where}: keywords without alphanumeric content: {empty}")
    return params


def _check_threshold_params(params: dict, artifact_kind: str, where: str) -> None:
    fields = COMMIT_NUMERIC_FIELDS if artifact_kind == "commit" else ISSUE_NUMERIC_FIELDS
    for key in ("field", "op", "bound"):
        if key not in params:
            raise ParseError(f"{where}: threshold heuristic missing {key!r}")
    if params["field"] not in fields:
        raise ParseError(f"{where}: unknown numeric field {params['field']!r} for {artifact_kind}")
    if params["op"] not in COMPARATORS:
        raise ParseError(f"{where}: bad comparator {params['op']!r}")
    bound = params["bound"]
    if not isinstance(bound, (int, float)) or isinstance(bound, bool):
        raise ParseError(f"{where}: bound must be numeric")


def load_heuristics(directory: str | Path) -> Registry:
    """Load every ``*.yaml``/``*.yml`` file directly inside ``directory``.

    Order is (file name, position within file). Subdirectories are ignored,
    which leaves room for task definitions under ``tasks/``.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ParseError(f"{directory}: heuristics directory not found")
    registry = Registry()
    files = sorted(p for p in directory.iterdir() if p.suffix in (".yaml", ".yml") and p.is_file())
    for path in files:
        try:
            docs = list(yaml.safe_load_all(path.read_text(encoding="utf-8")))
        except yaml.YAMLError as exc:
            raise ParseError(f"{path}: invalid YAML ({exc})") from exc
        k = 0
        for doc in docs:
            items = doc if isinstance(doc, list) else [doc]
            for item in items:
                if item is None:
                    continue
                k += 1
                registry.add(parse_spec(item, f"{path}#{k}", base_dir=path.parent))
    return registry


# -- application ------------------------------------------------------------


def _contains_seq(tokens: Sequence[str], needle: Sequence[str]) -> bool:
    k = len(needle)
    if k == 1:
        return needle[0] in tokens
    return any(list(tokens[i : i + k]) == list(needle) for i in range(len(tokens) - k + 1))


def _make_matcher(spec: HeuristicSpec) -> Callable[[str], bool]:
    token_mode = spec.params.get("mode", "token") == "token"
    if "keyword_groups" in spec.params:
        groups = spec.params["keyword_groups"]
    else:
        groups = [spec.params["keywords"]]
    if token_mode:
        tok_groups = [[tokenize(k) for k in g] for g in groups]

        def match(text: str) -> bool:
            toks = tokenize(text)
            return all(any(_contains_seq(toks, kw) for kw in g) for g in tok_groups)

    else:
        low_groups = [[k.lower() for k in g] for g in groups]

        def match(text: str) -> bool:
            low = text.lower()
            return all(any(kw in low for kw in g) for g in low_groups)

    return match


def _issue_texts(issue: IssueArtifact, fld: str) -> list[str]:
    if fld == "issue_title":
        return [issue.title]
    if fld == "issue_body":
        return [issue.body]
    return list(issue.labels)


def _keyword_texts(spec: HeuristicSpec, artifact) -> list[str]:
    fld = spec.params.get("field", "message")
    if isinstance(artifact, IssueArtifact):
        return _issue_texts(artifact, fld)
    if fld == "message":
        return [artifact.message]
    texts: list[str] = []
    for issue in artifact.linked_issues:
        texts += _issue_texts(issue, fld)
    return texts


def apply_keyword(spec: HeuristicSpec, artifact, _matcher=None) -> int:
    """Vote ``spec.sign`` if any keyword matches the target field, else abstain.

    Issue-targeting fields consult the commit's resolved links; an unlinked
    commit abstains. A keyword heuristic never votes the opposite class.
    """
    if spec.kind != "keyword":
        raise ValueError(f"{spec.name} is a {spec.kind} heuristic")
    match = _matcher or _make_matcher(spec)
    return spec.sign if any(match(t) for t in _keyword_texts(spec, artifact)) else ABSTAIN


def apply_threshold(spec: HeuristicSpec, artifact) -> int:
    fields = ISSUE_NUMERIC_FIELDS if isinstance(artifact, IssueArtifact) else COMMIT_NUMERIC_FIELDS
    value = fields[spec.params["field"]](artifact)
    fired = COMPARATORS[spec.params["op"]](value, spec.params["bound"])
    return spec.sign if fired else ABSTAIN


def _coerce_vote(raw) -> int:
    if raw is None:
        return ABSTAIN
    if isinstance(raw, (bool, np.bool_)):
        raise TypeError(f"booleans are not votes: {raw!r}")
    v = int(raw)
    if v != raw or v not in (-1, 0, 1):
        raise ValueError(f"vote must be -1, 0, +1 or None, got {raw!r}")
    return v


def apply_plugin(spec: HeuristicSpec, artifact) -> int:
    return spec.sign * _coerce_vote(spec.fn(artifact))


def apply_heuristic(spec: HeuristicSpec, artifact) -> int:
    if spec.kind == "keyword":
        return apply_keyword(spec, artifact)
    if spec.kind == "threshold":
        return apply_threshold(spec, artifact)
    return apply_plugin(spec, artifact)


# -- label matrix -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LabelMatrix:
    """n x m votes: rows follow dataset order, columns follow registry order."""

    row_ids: tuple[str, ...]
    column_names: tuple[str, ...]
    cells: np.ndarray
    errors: Mapping[str, int] = field(default_factory=dict)
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        cells = np.ascontiguousarray(self.cells, dtype=np.int8).reshape(len(self.row_ids), len(self.column_names))
        if cells.size and not np.isin(cells, (-1, 0, 1)).all():
            raise ValidationError("label matrix cells must be in {-1, 0, +1}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelMatrix):
            return NotImplemented
        return (
            self.row_ids == other.row_ids
            and self.column_names == other.column_names
            and np.array_equal(self.cells, other.cells)
        )

    def column(self, name: str) -> np.ndarray:
        return self.cells[:, self.column_names.index(name)]

    def select(self, names: Sequence[str]) -> LabelMatrix:
        idx = [self.column_names.index(n) for n in names]
        return LabelMatrix(self.row_ids, tuple(names), self.cells[:, idx], meta=self.meta)

    def drop(self, name: str) -> LabelMatrix:
        return self.select([n for n in self.column_names if n != name])

    def negate(self) -> LabelMatrix:
        return LabelMatrix(self.row_ids, self.column_names, -self.cells.astype(np.int8), meta=self.meta)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["artifact_id", *self.column_names])
        for rid, row in zip(self.row_ids, self.cells.tolist()):
            writer.writerow([rid, *row])
        return buf.getvalue()

    def content_hash(self) -> str:
        return sha256_text(self.to_csv_text())

    def write(self, path: str | Path, meta: Mapping[str, Any] | None = None) -> None:
        """Write the CSV and its ``.meta.json`` sidecar."""
        path = Path(path)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv_text())
        sidecar = dict(self.meta)
        sidecar.update({
            "n_rows": self.shape[0],
            "n_columns": self.shape[1],
            "matrix_hash": self.content_hash(),
            "created": int(os.environ.get("SOURCE_DATE_EPOCH", time.time())),
            "errors": dict(self.errors),
        })
        if meta:
            sidecar.update(meta)
        write_json(sidecar_path(path), sidecar)

    @classmethod
    def read(cls, path: str | Path) -> LabelMatrix:
        path = Path(path)
        if not path.is_file():
            raise ParseError(f"{path}: no such file")
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError(f"{path}:1: empty matrix file (missing header)") from None
            if not header or header[0] != "artifact_id":
                raise ParseError(f"{path}:1: header must start with 'artifact_id'")
            columns = header[1:]
            if len(set(columns)) != len(columns):
                raise ParseError(f"{path}:1: duplicate column names")
            ids: list[str] = []
            rows: list[list[int]] = []
            seen = set()
            for lineno, rec in enumerate(reader, start=2):
                if len(rec) != len(header):
                    raise ParseError(f"{path}:{lineno}: expected {len(header)} cells, got {len(rec)}")
                if rec[0] in seen:
                    raise DuplicateIdError(f"{path}:{lineno}: duplicate artifact id {rec[0]!r}")
                seen.add(rec[0])
                try:
                    vals = [int(v) for v in rec[1:]]
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: non-integer vote") from None
                if any(v not in (-1, 0, 1) for v in vals):
                    raise ParseError(f"{path}:{lineno}: votes must be -1, 0 or 1")
                ids.append(rec[0])
                rows.append(vals)
        meta = {}
        side = sidecar_path(path)
        if side.is_file():
            meta = read_json(side)
        cells = np.array(rows, dtype=np.int8).reshape(len(ids), len(columns))
        return cls(tuple(ids), tuple(columns), cells, errors=meta.get("errors", {}), meta=meta)


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def _rows_for(registry: Registry, dataset: Dataset, target: str) -> list:
    kinds = {s.artifact_kind for s in registry}
    if kinds - {target}:
        bad = [s.name for s in registry if s.artifact_kind != target]
        raise ValidationError(f"heuristics {bad} target {sorted(kinds - {target})}, rows are {target}s")
    return list(dataset.commits) if target == "commit" else list(dataset.issues.values())


def apply_all(registry: Registry, dataset: Dataset, target: str = "commit") -> LabelMatrix:
    """Apply every heuristic to every row artifact.

    A plugin that raises, or returns something other than a vote, abstains on
    that row; the failure is counted in ``LabelMatrix.errors`` and logged once
    per heuristic.
    """
    rows = _rows_for(registry, dataset, target)
    specs = list(registry)
    cells = np.zeros((len(rows), len(specs)), dtype=np.int8)
    errors: Counter[str] = Counter()
    for j, spec in enumerate(specs):
        if spec.kind == "keyword":
            matcher = _make_matcher(spec)
            for i, art in enumerate(rows):
                cells[i, j] = apply_keyword(spec, art, matcher)
        elif spec.kind == "threshold":
            for i, art in enumerate(rows):
                cells[i, j] = apply_threshold(spec, art)
        else:
            for i, art in enumerate(rows):
                try:
                    cells[i, j] = apply_plugin(spec, art)
                except Exception as exc:  # noqa: BLE001 - plugins are untrusted
                    if not errors[spec.name]:
                        log.warning("heuristic %s failed on %s: %r", spec.name, art.id, exc)
                    errors[spec.name] += 1
    return LabelMatrix(
        row_ids=tuple(a.id for a in rows),
        column_names=tuple(registry.names),
        cells=cells,
        errors=dict(errors),
        meta={"registry_hash": registry.content_hash(), "dataset_name": dataset.name},
    )


def align(matrix: LabelMatrix, names: Sequence[str]) -> LabelMatrix:
    """Reorder ``matrix`` columns to ``names``; raises if any is missing."""
    missing = [n for n in names if n not in matrix.column_names]
    if missing:
        raise DimensionError(f"matrix lacks heuristics {missing}")
    return matrix.select(names)
