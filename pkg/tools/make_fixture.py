#!/usr/bin/env python3
"""Regenerate the bundled gold-labelled commit fixture.

Messages come from hand-written templates. Each template carries the label a
human annotator would give the commit (bug fix or not). The label never
depends on which heuristics happen to fire. Output is deterministic for a
given seed.

    python tools/make_fixture.py [--seed 2021] [--n 320] [--out src/heurepo/data/fixture]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import random
from pathlib import Path

COMPONENTS = [
    "parser", "scheduler", "cache", "login page", "http client", "config loader",
    "serializer", "settings dialog", "database layer", "auth module", "exporter",
    "command line", "thumbnail service", "search index", "upload handler",
]
THINGS = [
    "timestamps", "empty strings", "file names", "user ids", "UTF-8 input",
    "large payloads", "negative offsets", "nested lists", "trailing slashes",
    "locale settings", "null headers", "zero-length arrays",
]
CONDITIONS = [
    "the config file is missing", "the user logs out twice", "the cache is cold",
    "two uploads race", "the session expires", "input has a BOM",
    "the disk is full", "the network drops mid-request",
]
FEATURES = [
    "dark mode", "CSV export", "OAuth login", "retry policy", "bulk delete",
    "keyboard shortcuts", "pagination", "webhook notifications", "audit log",
]
DEPS = ["jackson-databind", "lodash", "requests", "guava", "junit", "numpy", "spring-core"]
DOCS = ["README", "CONTRIBUTING.md", "the install guide", "API docs", "javadoc of Cache"]
AUTHORS = ["alice", "bob", "chen", "dana", "emeka", "farah", "goran", "hiro", "ines", "jonas"]

SRC_DIRS = ["src/main/java/app", "lib/core", "src/app", "pkg/server"]
TEST_DIRS = ["src/test/java/app", "tests", "test"]


def src_files(rng: random.Random, k: int) -> list[str]:
    d = rng.choice(SRC_DIRS)
    names = rng.sample(["Parser", "Cache", "Client", "Loader", "Session", "Index", "Store",
                        "Handler", "Util", "Config", "Router", "Model", "View", "Queue"], k)
    return [f"{d}/{n}.java" for n in names]


def test_files(rng: random.Random, k: int) -> list[str]:
    d = rng.choice(TEST_DIRS)
    names = rng.sample(["Parser", "Cache", "Client", "Loader", "Session"], k)
    return [f"{d}/{n}Test.java" for n in names]


def fill(template: str, rng: random.Random) -> str:
    c1, c2 = rng.sample(COMPONENTS, 2)
    t1, t2 = rng.sample(THINGS, 2)
    v1 = f"{rng.randint(1, 4)}.{rng.randint(0, 12)}.{rng.randint(0, 9)}"
    v2 = f"{v1.rsplit('.', 1)[0]}.{int(v1.rsplit('.', 1)[1]) + 1}"
    return template.format(
        C=c1, C2=c2, T=t1, T2=t2, cond=rng.choice(CONDITIONS), F=rng.choice(FEATURES),
        dep=rng.choice(DEPS), v1=v1, v2=v2, doc=rng.choice(DOCS), n=rng.randint(10, 999),
        user=rng.choice(AUTHORS), Cc=c1.title().replace(" ", ""),
    )


# (weight, gold, message template, file kind, link kind)
# file kind: "src" 1-3 source files, "test" test files only, "many" 8-15 files,
#            "none" no files. link kind: None, "bug", "feature", "dangling".
BUG_TEMPLATES = [
    (5, "Fix NPE in {C} when {cond}", "src", None),
    (4, "fixed crash when {cond}", "src", None),
    (4, "Fix #{n}: {C} returns wrong result for {T}", "src", "bug"),
    (4, "{C}: handle {T} correctly", "src", None),
    (3, "Correct off-by-one in {C} pagination", "src", None),
    (3, "prevent memory leak in {C}", "src", None),
    (3, "{C} failed to parse {T}", "src", None),
    (2, "resolve deadlock between {C} and {C2}", "src", None),
    (6, "closes #{n}", "src", "bug"),
    (3, "Make {C} thread-safe", "src", None),
    (3, "Don't throw when {T} are missing", "src", None),
    (2, "corrige le plantage du {C}", "src", None),
    (2, "修复{C}中的错误", "src", None),
    (3, "Fix failing assertion in {Cc}Test", "test", None),
    (5, "Update {C}", "src", "bug"),
    (2, "Regression: {C} ignores {T} since {v1}", "src", None),
    (3, "Properly escape {T} in {C}", "src", None),
    (4, "Fix issue with {T} not being saved", "src", None),
    (3, "bugfix: {C} timeout too short", "src", None),
    (2, "Fixes #{n}", "src", "dangling"),
    (2, "{C} throws exception on {T}", "src", None),
    (2, "Use correct encoding for {T} in {C}", "src", None),
    (2, "Revert broken change to {C}", "src", None),
    (2, "Add missing null check in {C}", "src", None),
]
CLEAN_TEMPLATES = [
    (6, "Add {F} to {C}", "src", None),
    (4, "Refactor {C} to use {T2}", "src", None),
    (4, "Fix typo in {doc}", "none", None),
    (3, "fix formatting of {C}", "src", None),
    (4, "Bump {dep} from {v1} to {v2}", "none", None),
    (3, "Merge pull request #{n} from {user}/fix-{n}", "many", None),
    (3, "Update documentation for {C}", "none", None),
    (3, "Implement {F}", "src", "feature"),
    (3, "Improve error messages in {C}", "src", None),
    (3, "Add tests for {C} error handling", "test", None),
    (2, "Release {v1}", "none", None),
    (3, "", "src", None),
    (2, "wip", "src", None),
    (3, "Clean up unused imports in {C}", "src", None),
    (2, "Rename {T} to {T2}", "src", None),
    (2, "Add issue template", "none", None),
    (2, "Reorganize package structure", "many", None),
    (5, "Update {C}", "src", "feature"),
    (2, "Initial commit", "many", None),
    (3, "Move {C} into its own module", "many", None),
    (2, "Speed up {C} startup", "src", None),
    (2, "Update CHANGELOG", "none", None),
    (2, "Configure travis build", "none", None),
    (3, "Translate messages to German", "src", None),
    (2, "Polish {C} layout", "src", None),
    (2, "Log {T} at debug level", "src", None),
]


def make(n: int, seed: int):
    rng = random.Random(seed)
    commits, issues, gold = [], [], []
    pool = [(w, "positive", *t) for w, *t in BUG_TEMPLATES] + [
        (w, "negative", *t) for w, *t in CLEAN_TEMPLATES
    ]
    weights = [p[0] for p in pool]
    ts = 1_500_000_000
    next_issue = 100
    for i in range(n):
        _, label, template, fkind, lkind = rng.choices(pool, weights=weights)[0]
        message = fill(template, rng)
        if fkind == "src":
            paths = src_files(rng, rng.randint(1, 3))
        elif fkind == "test":
            paths = test_files(rng, rng.randint(1, 2))
        elif fkind == "many":
            paths = src_files(rng, rng.randint(8, 14))
        else:
            paths = ["README.md"] if "doc" in template.lower() or "typo" in template.lower() else ["build.gradle"]
        files = [
            {"path": p, "additions": rng.randint(0, 80), "deletions": rng.randint(0, 40)} for p in paths
        ]
        issue_ids = []
        if lkind in ("bug", "feature"):
            iid = f"ISSUE-{next_issue}"
            next_issue += 1
            issue_ids.append(iid)
            comp = rng.choice(COMPONENTS)
            if lkind == "bug":
                title = rng.choice([
                    f"{comp} crashes on {rng.choice(THINGS)}",
                    f"NPE when {rng.choice(CONDITIONS)}",
                    f"Wrong totals in {comp}",
                    f"{comp} hangs after upgrade",
                ])
                labels = rng.choice([["bug"], ["type: bug", "priority: high"], ["bug", "crash"], ["regression"]])
            else:
                title = rng.choice([
                    f"Support {rng.choice(FEATURES)}",
                    f"Feature request: {rng.choice(FEATURES)}",
                    f"Allow configuring the {comp}",
                ])
                labels = rng.choice([["enhancement"], ["feature"], ["type: feature", "good first issue"]])
            issues.append({"id": iid, "title": title, "body": f"Reported against {comp}.", "labels": labels})
        elif lkind == "dangling":
            issue_ids.append(f"ISSUE-{9000 + i}")
        ts += rng.randint(60, 86_400)
        cid = hashlib.sha1(f"{seed}:{i}".encode()).hexdigest()
        commits.append({
            "id": cid,
            "message": message,
            "author": rng.choice(AUTHORS),
            "timestamp": ts,
            "files": files,
            "issue_ids": issue_ids,
        })
        gold.append({"artifact_id": cid, "label": label})
    return commits, issues, gold


def write_jsonl(path: Path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=2021)
    ap.add_argument("--n", type=int, default=320)
    ap.add_argument("--out", type=Path, default=Path("src/heurepo/data/fixture"))
    args = ap.parse_args()
    commits, issues, gold = make(args.n, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    write_jsonl(args.out / "commits.jsonl", commits)
    write_jsonl(args.out / "issues.jsonl", issues)
    write_jsonl(args.out / "gold.jsonl", gold)
    pos = sum(g["label"] == "positive" for g in gold)
    print(f"wrote {len(commits)} commits ({pos} bug fixes), {len(issues)} issues to {args.out}")


if __name__ == "__main__":
    main()
