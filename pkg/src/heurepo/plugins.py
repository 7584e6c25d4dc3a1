"""Built-in plugin heuristics referenced from the bundled spec files."""

from __future__ import annotations

import re

from heurepo.artifacts import CommitArtifact
from heurepo.heuristics import tokenize

FIX_WORDS = frozenset({"fix", "fixes", "fixed", "fixing", "bugfix", "hotfix"})
_TEST_PATH = re.compile(r"(^|/)(tests?|spec)/|(^|/)test_[^/]*$|_test\.\w+$|Tests?\.\w+$")


def is_test_path(path: str) -> bool:
    return bool(_TEST_PATH.search(path))


def test_file_fix(commit: CommitArtifact) -> int | None:
    """Vote bug fix when a fix-worded commit touches only test files."""
    if not commit.files or not FIX_WORDS.intersection(tokenize(commit.message)):
        return None
    return 1 if all(is_test_path(f.path) for f in commit.files) else None


# keep pytest from collecting the plugin as a test when imported into tests
test_file_fix.__test__ = False
