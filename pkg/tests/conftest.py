from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pytest

from heurepo.artifacts import CommitArtifact, Dataset, FileChange


def write_jsonl(path: Path, records) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def commit(cid: str, message: str = "", n_files: int = 0, issue_ids=()) -> CommitArtifact:
    files = tuple(FileChange(f"src/f{i}.py", 1, 0) for i in range(n_files))
    return CommitArtifact(id=cid, message=message, author="a", timestamp=0, files=files,
                          issue_ids=tuple(issue_ids))


def dataset(*commits: CommitArtifact, name: str = "t") -> Dataset:
    return Dataset(commits=tuple(commits), name=name)


@pytest.fixture
def fixture_dir() -> Path:
    return Path(str(resources.files("heurepo") / "data" / "fixture"))


@pytest.fixture
def bundled_heuristics() -> Path:
    return Path(str(resources.files("heurepo") / "data" / "heuristics"))


# acceptance results, printed as one line per criterion at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
