"""Normalized software-repository artifacts: commits, issues and their links.

Datasets are read from UTF-8 line-delimited JSON, one artifact per line.
Everything here is immutable once loaded; ``link`` returns a new Dataset.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Literal, Mapping

from heurepo.errors import (
    DanglingLinkError,
    DuplicateIdError,
    MissingFieldError,
    ParseError,
)
from heurepo.io_utils import canonical_json, iter_jsonl, sha256_text, write_jsonl

LinkPolicy = Literal["strict", "drop", "keep"]

COMMIT_FIELDS = ("id", "message", "author", "timestamp", "files", "issue_ids")
ISSUE_FIELDS = ("id", "title", "body", "labels")
FORMATS = ("jsonl",)


@dataclass(frozen=True)
class FileChange:
    path: str
    additions: int = 0
    deletions: int = 0

    def __post_init__(self):
        if not self.path:
            raise ValueError("FileChange.path must be non-empty")
        if self.additions < 0 or self.deletions < 0:
            raise ValueError(f"negative change counts for {self.path!r}")


@dataclass(frozen=True)
class IssueArtifact:
    id: str
    title: str = ""
    body: str = ""
    labels: tuple[str, ...] = ()


@dataclass(frozen=True)
class CommitArtifact:
    id: str
    message: str
    author: str = ""
    timestamp: int = 0
    files: tuple[FileChange, ...] = ()
    issue_ids: tuple[str, ...] = ()
    # Populated by link(); not part of the serialized record.
    linked_issues: tuple[IssueArtifact, ...] = field(default=(), compare=False, repr=False)

    @property
    def file_count(self) -> int:
        return len(self.files)

    @property
    def additions(self) -> int:
        return sum(f.additions for f in self.files)

    @property
    def deletions(self) -> int:
        return sum(f.deletions for f in self.files)


@dataclass(frozen=True)
class Dataset:
    commits: tuple[CommitArtifact, ...] = ()
    issues: Mapping[str, IssueArtifact] = field(default_factory=dict)
    name: str = ""
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "issues", MappingProxyType(dict(self.issues)))
        object.__setattr__(self, "provenance", MappingProxyType(dict(self.provenance)))

    def __len__(self) -> int:
        return len(self.commits)

    @property
    def commit_ids(self) -> list[str]:
        return [c.id for c in self.commits]

    def with_issues(self, issues: Mapping[str, IssueArtifact]) -> Dataset:
        return dataclasses.replace(self, issues=issues)

    def to_records(self) -> tuple[list[dict], list[dict]]:
        extra = self.provenance.get("extra_fields", {})
        commits = [commit_to_record(c, extra.get(c.id)) for c in self.commits]
        issue_extra = self.provenance.get("issue_extra_fields", {})
        issues = [issue_to_record(i, issue_extra.get(i.id)) for i in self.issues.values()]
        return commits, issues

    def content_hash(self) -> str:
        commits, issues = self.to_records()
        payload = {
            "name": self.name,
            "commits": commits,
            "issues": issues,
            "provenance": _plain(self.provenance),
        }
        return sha256_text(canonical_json(payload))


def _plain(obj):
    if isinstance(obj, Mapping):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _require(record: dict, key: str, kind: type, where: str):
    if key not in record:
        raise MissingFieldError(f"{where}: missing required field {key!r}")
    value = record[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ParseError(f"{where}: field {key!r} must be {kind.__name__}, got {type(value).__name__}")
    return value


def _optional(record: dict, key: str, kind: type, default, where: str):
    value = record.get(key, default)
    if value is None:
        return default
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ParseError(f"{where}: field {key!r} must be {kind.__name__}, got {type(value).__name__}")
    return value


def _string_list(record: dict, key: str, where: str) -> tuple[str, ...]:
    values = _optional(record, key, list, [], where)
    if not all(isinstance(v, str) for v in values):
        raise ParseError(f"{where}: field {key!r} must be a list of strings")
    return tuple(values)


def commit_from_record(record: dict, where: str) -> CommitArtifact:
    cid = _require(record, "id", str, where)
    if not cid:
        raise ParseError(f"{where}: commit id must be non-empty")
    files = []
    for k, f in enumerate(_optional(record, "files", list, [], where)):
        if not isinstance(f, dict):
            raise ParseError(f"{where}: files[{k}] must be an object")
        fwhere = f"{where}: files[{k}]"
        try:
            files.append(
                FileChange(
                    path=_require(f, "path", str, fwhere),
                    additions=_optional(f, "additions", int, 0, fwhere),
                    deletions=_optional(f, "deletions", int, 0, fwhere),
                )
            )
        except ValueError as exc:
            raise ParseError(f"{fwhere}: {exc}") from exc
    return CommitArtifact(
        id=cid,
        message=_require(record, "message", str, where),
        author=_optional(record, "author", str, "", where),
        timestamp=_optional(record, "timestamp", int, 0, where),
        files=tuple(files),
        issue_ids=_string_list(record, "issue_ids", where),
    )


def commit_to_record(commit: CommitArtifact, extra: Mapping | None = None) -> dict:
    rec = {
        "id": commit.id,
        "message": commit.message,
        "author": commit.author,
        "timestamp": commit.timestamp,
        "files": [dataclasses.asdict(f) for f in commit.files],
        "issue_ids": list(commit.issue_ids),
    }
    if extra:
        rec.update(extra)
    return rec


def issue_from_record(record: dict, where: str) -> IssueArtifact:
    iid = _require(record, "id", str, where)
    if not iid:
        raise ParseError(f"{where}: issue id must be non-empty")
    return IssueArtifact(
        id=iid,
        title=_optional(record, "title", str, "", where),
        body=_optional(record, "body", str, "", where),
        labels=_string_list(record, "labels", where),
    )


def issue_to_record(issue: IssueArtifact, extra: Mapping | None = None) -> dict:
    rec = {"id": issue.id, "title": issue.title, "body": issue.body, "labels": list(issue.labels)}
    if extra:
        rec.update(extra)
    return rec


def _resolve_format(path: Path, format: str | None) -> str:
    fmt = format or path.suffix.lstrip(".") or "jsonl"
    if fmt == "json":
        fmt = "jsonl"
    if fmt not in FORMATS:
        raise ParseError(f"{path}: unsupported dataset format {fmt!r}")
    return fmt


def load_commits(path: str | Path, format: str | None = None, name: str | None = None) -> Dataset:
    """Load commits in file order. An empty file yields an empty Dataset."""
    path = Path(path)
    _resolve_format(path, format)
    commits: list[CommitArtifact] = []
    seen: dict[str, int] = {}
    extra_fields: dict[str, dict] = {}
    for lineno, record in iter_jsonl(path):
        where = f"{path}:{lineno}"
        commit = commit_from_record(record, where)
        if commit.id in seen:
            raise DuplicateIdError(
                f"{where}: duplicate commit id {commit.id!r} (first seen on line {seen[commit.id]})"
            )
        seen[commit.id] = lineno
        extra = {k: v for k, v in record.items() if k not in COMMIT_FIELDS}
        if extra:
            extra_fields[commit.id] = extra
        commits.append(commit)
    provenance: dict[str, Any] = {"source": str(path)}
    if extra_fields:
        provenance["extra_fields"] = extra_fields
    return Dataset(commits=tuple(commits), name=name or path.stem, provenance=provenance)


def load_issues(path: str | Path) -> dict[str, IssueArtifact]:
    """Load issues keyed by id, preserving file order."""
    path = Path(path)
    issues: dict[str, IssueArtifact] = {}
    lines: dict[str, int] = {}
    for lineno, record in iter_jsonl(path):
        where = f"{path}:{lineno}"
        issue = issue_from_record(record, where)
        if issue.id in issues:
            raise DuplicateIdError(
                f"{where}: duplicate issue id {issue.id!r} (first seen on line {lines[issue.id]})"
            )
        issues[issue.id] = issue
        lines[issue.id] = lineno
    return issues


def load_issue_extras(path: str | Path) -> dict[str, dict]:
    return {
        rec["id"]: {k: v for k, v in rec.items() if k not in ISSUE_FIELDS}
        for _, rec in iter_jsonl(path)
        if any(k not in ISSUE_FIELDS for k in rec)
    }


def load_dataset(
    commits_path: str | Path,
    issues_path: str | Path | None = None,
    policy: LinkPolicy | None = "drop",
    name: str | None = None,
) -> Dataset:
    """Load commits (and optionally issues), then link them under ``policy``."""
    ds = load_commits(commits_path, name=name)
    if issues_path is None:
        return link(ds, policy) if policy else ds
    issues = load_issues(issues_path)
    extras = load_issue_extras(issues_path)
    prov = dict(ds.provenance)
    prov["issue_source"] = str(issues_path)
    if extras:
        prov["issue_extra_fields"] = extras
    ds = dataclasses.replace(ds, issues=issues, provenance=prov)
    return link(ds, policy) if policy else ds


def link(dataset: Dataset, policy: LinkPolicy = "strict") -> Dataset:
    """Resolve each commit's ``issue_ids`` against the dataset's issues.

    ``strict`` raises on the first dangling id, ``drop`` removes dangling ids,
    ``keep`` leaves them in place. Link statistics go into provenance.
    """
    if policy not in ("strict", "drop", "keep"):
        raise ValueError(f"unknown link policy {policy!r}")
    issues = dataset.issues
    commits = []
    dangling = 0
    linked = 0
    for c in dataset.commits:
        resolved = []
        kept_ids = []
        for iid in c.issue_ids:
            issue = issues.get(iid)
            if issue is None:
                if policy == "strict":
                    raise DanglingLinkError(f"commit {c.id!r} references unknown issue {iid!r}")
                dangling += 1
                if policy == "keep":
                    kept_ids.append(iid)
                continue
            resolved.append(issue)
            kept_ids.append(iid)
        if resolved:
            linked += 1
        commits.append(
            dataclasses.replace(c, issue_ids=tuple(kept_ids), linked_issues=tuple(resolved))
        )
    prov = dict(dataset.provenance)
    prov["link"] = {
        "policy": policy,
        "dangling": dangling,
        "linked_commits": linked,
        "link_fraction": linked / len(commits) if commits else 0.0,
    }
    return dataclasses.replace(dataset, commits=tuple(commits), provenance=prov)


def dump_commits(dataset: Dataset, path: str | Path) -> None:
    write_jsonl(path, dataset.to_records()[0])


def dump_issues(dataset: Dataset, path: str | Path) -> None:
    write_jsonl(path, dataset.to_records()[1])


@dataclass(frozen=True)
class ValidationReport:
    n_commits: int
    empty_messages: tuple[str, ...]
    non_ascii_dominant: tuple[str, ...]
    zero_file_commits: tuple[str, ...]
    dangling_links: int

    def _frac(self, ids) -> float:
        return len(ids) / self.n_commits if self.n_commits else 0.0

    @property
    def empty_message_fraction(self) -> float:
        return self._frac(self.empty_messages)

    @property
    def non_ascii_fraction(self) -> float:
        return self._frac(self.non_ascii_dominant)

    @property
    def zero_file_fraction(self) -> float:
        return self._frac(self.zero_file_commits)

    def to_dict(self) -> dict:
        return {
            "n_commits": self.n_commits,
            "empty_messages": len(self.empty_messages),
            "empty_message_fraction": self.empty_message_fraction,
            "non_ascii_dominant": len(self.non_ascii_dominant),
            "non_ascii_fraction": self.non_ascii_fraction,
            "zero_file_commits": len(self.zero_file_commits),
            "zero_file_fraction": self.zero_file_fraction,
            "dangling_links": self.dangling_links,
            "ids": {
                "empty_messages": list(self.empty_messages),
                "non_ascii_dominant": list(self.non_ascii_dominant),
                "zero_file_commits": list(self.zero_file_commits),
            },
        }


def is_non_ascii_dominant(text: str) -> bool:
    chars = [ch for ch in text if not ch.isspace()]
    if not chars:
        return False
    return sum(1 for ch in chars if ord(ch) > 127) * 2 > len(chars)


def validate(dataset: Dataset) -> ValidationReport:
    """Report data-quality issues. Never modifies the dataset."""
    empty, foreign, no_files = [], [], []
    dangling = 0
    for c in dataset.commits:
        if not c.message.strip():
            empty.append(c.id)
        elif is_non_ascii_dominant(c.message):
            foreign.append(c.id)
        if not c.files:
            no_files.append(c.id)
        dangling += sum(1 for iid in c.issue_ids if iid not in dataset.issues)
    return ValidationReport(
        n_commits=len(dataset.commits),
        empty_messages=tuple(empty),
        non_ascii_dominant=tuple(foreign),
        zero_file_commits=tuple(no_files),
        dangling_links=dangling,
    )
