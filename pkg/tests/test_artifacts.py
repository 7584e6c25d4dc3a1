from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heurepo.artifacts import (
    CommitArtifact,
    FileChange,
    dump_commits,
    dump_issues,
    link,
    load_commits,
    load_dataset,
    load_issues,
    validate,
)
from heurepo.errors import (
    DanglingLinkError,
    DuplicateIdError,
    MissingFieldError,
    ParseError,
)

from conftest import commit, dataset, write_jsonl


def test_single_record_loads(tmp_path):
    p = write_jsonl(tmp_path / "c.jsonl", [{"id": "a1", "message": "fix bug #1234", "files": []}])
    ds = load_commits(p)
    assert len(ds) == 1
    assert ds.commits[0].message == "fix bug #1234"
    assert ds.commits[0].files == ()


def test_duplicate_commit_id(tmp_path):
    p = write_jsonl(tmp_path / "c.jsonl", [{"id": "a1", "message": "x"}, {"id": "a1", "message": "y"}])
    with pytest.raises(DuplicateIdError):
        load_commits(p)


def test_empty_file_is_empty_dataset(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text("")
    ds = load_commits(p)
    assert len(ds) == 0
    assert validate(ds).n_commits == 0


def test_missing_id_is_parse_error(tmp_path):
    p = write_jsonl(tmp_path / "c.jsonl", [{"message": "x"}])
    with pytest.raises(MissingFieldError):
        load_commits(p)


def test_malformed_json_reports_line(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "a", "message": "m"}\n{oops\n')
    with pytest.raises(ParseError, match=":2"):
        load_commits(p)


def test_negative_additions_rejected(tmp_path):
    with pytest.raises(ValueError):
        FileChange("a.py", -1, 0)
    p = write_jsonl(tmp_path / "c.jsonl", [{"id": "a", "message": "m", "files": [{"path": "a", "additions": -1}]}])
    with pytest.raises(ParseError, match="negative"):
        load_commits(p)


def test_issues_load_and_duplicates(tmp_path):
    p = write_jsonl(tmp_path / "i.jsonl", [{"id": "I-1", "title": "NPE on save", "body": "...", "labels": ["bug"]}])
    issues = load_issues(p)
    assert list(issues) == ["I-1"] and issues["I-1"].labels == ("bug",)
    write_jsonl(p, [{"id": "I-1", "title": "a", "labels": []}, {"id": "I-1", "title": "b"}])
    with pytest.raises(DuplicateIdError):
        load_issues(p)
    write_jsonl(p, [{"id": "I-2", "title": "a", "labels": []}])
    assert load_issues(p)["I-2"].labels == ()


def _linked_files(tmp_path, commits, issues):
    c = write_jsonl(tmp_path / "c.jsonl", commits)
    i = write_jsonl(tmp_path / "i.jsonl", issues)
    return c, i


def test_link_resolved(tmp_path):
    c, i = _linked_files(tmp_path, [{"id": "c", "message": "m", "issue_ids": ["I-1"]}],
                         [{"id": "I-1", "title": "t"}])
    ds = load_dataset(c, i, policy="strict")
    assert ds.provenance["link"]["link_fraction"] == 1.0
    assert ds.commits[0].linked_issues[0].id == "I-1"


def test_link_policies(tmp_path):
    c, i = _linked_files(tmp_path, [{"id": "c", "message": "m", "issue_ids": ["I-9"]}], [])
    with pytest.raises(DanglingLinkError):
        load_dataset(c, i, policy="strict")
    dropped = load_dataset(c, i, policy="drop")
    assert dropped.commits[0].issue_ids == ()
    assert dropped.provenance["link"]["dangling"] == 1
    kept = load_dataset(c, i, policy="keep")
    assert kept.commits[0].issue_ids == ("I-9",)
    assert kept.provenance["link"]["dangling"] == 1
    # relinking a kept dataset with drop equals dropping directly
    assert link(kept, "drop").commits == dropped.commits


def test_link_fraction_68_of_200(tmp_path):
    commits = [
        {"id": f"c{k}", "message": "m", "issue_ids": [f"I-{k}"] if k < 68 else []} for k in range(200)
    ]
    issues = [{"id": f"I-{k}", "title": "t"} for k in range(68)]
    c, i = _linked_files(tmp_path, commits, issues)
    ds = load_dataset(c, i, policy="strict")
    assert ds.provenance["link"]["linked_commits"] == 68
    assert ds.provenance["link"]["link_fraction"] == pytest.approx(0.34, abs=0)


def test_validate_counts():
    ds = dataset(*(commit(f"c{k}", "" if k < 3 else "fix it") for k in range(10)))
    report = validate(ds)
    assert len(report.empty_messages) == 3
    assert report.empty_message_fraction == 0.3
    assert validate(dataset(commit("x", ""))).to_dict()["empty_messages"] == 1


def test_validate_clean_is_zero():
    report = validate(dataset(commit("a", "fix", 1), commit("b", "feature", 2)))
    d = report.to_dict()
    assert d["empty_messages"] == 0 and d["non_ascii_dominant"] == 0 and d["zero_file_commits"] == 0


def test_validate_non_ascii_and_whitespace():
    ds = dataset(commit("a", "   ", 1), commit("b", "修复错误", 1), commit("c", "fix é", 1))
    r = validate(ds)
    assert len(r.empty_messages) == 1
    assert len(r.non_ascii_dominant) == 1


def test_validate_does_not_mutate():
    ds = dataset(commit("a", ""), commit("b", "x"))
    before = ds.to_records()
    validate(ds)
    assert ds.to_records() == before


def test_unknown_fields_preserved(tmp_path):
    p = write_jsonl(tmp_path / "c.jsonl", [{"id": "a", "message": "m", "repo": "x/y"}])
    ds = load_commits(p)
    out = tmp_path / "o.jsonl"
    dump_commits(ds, out)
    assert load_commits(out).provenance["extra_fields"] == ds.provenance["extra_fields"]


_text = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=30)
_file = st.builds(FileChange, st.text(min_size=1, max_size=10).filter(str.strip),
                  st.integers(0, 1000), st.integers(0, 1000))


@st.composite
def _commits(draw):
    ids = draw(st.lists(st.text(min_size=1, max_size=8), unique=True, max_size=6))
    return [
        CommitArtifact(id=i, message=draw(_text), author=draw(_text), timestamp=draw(st.integers(0, 2**40)),
                       files=tuple(draw(st.lists(_file, max_size=3))),
                       issue_ids=tuple(draw(st.lists(st.text(min_size=1, max_size=5), max_size=2))))
        for i in ids
    ]


@settings(max_examples=50, deadline=None)
@given(_commits())
def test_roundtrip_property(tmp_path_factory, commits):
    d = tmp_path_factory.mktemp("rt")
    ds = dataset(*commits)
    dump_commits(ds, d / "c.jsonl")
    dump_issues(ds, d / "i.jsonl")
    again = load_commits(d / "c.jsonl")
    assert again.commits == ds.commits
    assert again.to_records() == ds.to_records()
