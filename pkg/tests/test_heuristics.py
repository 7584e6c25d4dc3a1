from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heurepo.artifacts import IssueArtifact
from heurepo.errors import DimensionError, ParseError, ValidationError
from heurepo.heuristics import (
    HeuristicSpec,
    LabelMatrix,
    Registry,
    align,
    apply_all,
    apply_heuristic,
    apply_keyword,
    load_heuristics,
    parse_spec,
    tokenize,
)

from conftest import commit, dataset


def kw(name, keywords, polarity="positive", mode="token", field="message"):
    return parse_spec({"name": name, "kind": "keyword", "polarity": polarity,
                       "params": {"keywords": keywords, "mode": mode, "field": field}}, "<test>")


BIG_CHANGE = {"name": "big_change", "kind": "threshold", "polarity": "negative",
              "params": {"field": "file_count", "op": ">", "bound": 6}}


@pytest.mark.parametrize("text,tokens", [
    ("Fix bug #1234", ["fix", "bug", "1234"]),
    ("", []),
    ("re-fix/bug_X", ["re", "fix", "bug", "x"]),
    ("Ünïcode·Wörter 修复", ["ünïcode", "wörter", "修复"]),
])
def test_tokenize(text, tokens):
    assert tokenize(text) == tokens


def test_keyword_examples():
    assert apply_keyword(kw("kw_bugfix", ["bug", "fix"]), commit("a", "fix bug #1234")) == 1
    assert apply_keyword(kw("typo", ["typo"], "negative"), commit("a", "fix a small typo")) == -1
    assert apply_keyword(kw("k", ["fix"]), commit("a", "prefix cleanup")) == 0
    assert apply_keyword(kw("k", ["fix"], mode="substring"), commit("a", "PREFIX cleanup")) == 1


def test_multiword_keyword_is_contiguous():
    spec = kw("k", ["null pointer"])
    assert apply_keyword(spec, commit("a", "Null-pointer guard")) == 1
    assert apply_keyword(spec, commit("a", "pointer to null")) == 0


def test_keyword_groups_are_conjunctive():
    spec = parse_spec({"name": "g", "kind": "keyword", "polarity": "positive", "mode": "substring",
                       "keyword_groups": [["fix"], ["bug", "issue"]]}, "<t>")
    assert apply_keyword(spec, commit("a", "fixed an issue")) == 1
    assert apply_keyword(spec, commit("a", "fixed typo")) == 0
    assert apply_keyword(spec, commit("a", "bug report")) == 0


def test_issue_field_without_link_abstains():
    spec = kw("il", ["bug"], field="issue_labels")
    c = commit("a", "something", issue_ids=["I-1"])
    assert apply_keyword(spec, c) == 0
    import dataclasses
    linked = dataclasses.replace(c, linked_issues=(IssueArtifact("I-1", "t", "", ("bug",)),))
    assert apply_keyword(spec, linked) == 1


def test_file_count_threshold():
    spec = parse_spec(BIG_CHANGE, "<t>")
    assert apply_heuristic(spec, commit("a", "x", n_files=7)) == -1
    assert apply_heuristic(spec, commit("a", "x", n_files=6)) == 0


def test_apply_all_example():
    reg = Registry([kw("kw_bugfix", ["bug", "fix"]), kw("typo", ["typo"], "negative")])
    ds = dataset(commit("c1", "fix bug #1234"), commit("c2", "fix a small typo"))
    m = apply_all(reg, ds)
    assert m.cells.tolist() == [[1, 0], [1, -1]]
    assert m.column_names == ("kw_bugfix", "typo")
    assert m.row_ids == ("c1", "c2")


def test_degenerate_shapes():
    reg = Registry([kw("a", ["x"]), kw("b", ["y"])])
    assert apply_all(reg, dataset()).shape == (0, 2)
    assert apply_all(Registry(), dataset(commit("c", "x"), commit("d", "y"))).shape == (2, 0)


def test_plugins_constant_and_threshold_mirror():
    ds = dataset(*(commit(f"c{k}", "m", n_files=k) for k in range(10)))
    reg = Registry([parse_spec(BIG_CHANGE, "<t>")])
    reg.register_plugin("never", "commit", lambda c: 0)
    reg.register_plugin("always", "commit", lambda c: 1)
    reg.register_plugin("mirror", "commit", lambda c: -1 if len(c.files) > 6 else None)
    m = apply_all(reg, ds)
    assert (m.column("never") == 0).all()
    assert (m.column("always") == 1).all()
    assert np.array_equal(m.column("mirror"), m.column("big_change"))


def test_plugin_negative_polarity_negates():
    reg = Registry()
    reg.register_plugin("neg", "commit", lambda c: 1, polarity="negative")
    assert apply_all(reg, dataset(commit("a", "x"))).cells.tolist() == [[-1]]


def test_plugin_failures_abstain_and_are_counted():
    reg = Registry()
    reg.register_plugin("boom", "commit", lambda c: 1 / 0 if c.id == "b" else 1)
    reg.register_plugin("bool", "commit", lambda c: True)
    reg.register_plugin("two", "commit", lambda c: 2)
    m = apply_all(reg, dataset(commit("a", "x"), commit("b", "y")))
    assert m.column("boom").tolist() == [1, 0]
    assert m.errors == {"boom": 1, "bool": 2, "two": 2}
    assert (m.column("bool") == 0).all()


def test_duplicate_names(tmp_path):
    for f in ("a.yaml", "b.yaml"):
        (tmp_path / f).write_text("name: kw_bugfix\nkind: keyword\npolarity: positive\nkeywords: [bug, fix]\n")
    with pytest.raises(ValidationError, match="a.yaml.*b.yaml"):
        load_heuristics(tmp_path)


def test_load_errors(tmp_path):
    with pytest.raises(ParseError):
        load_heuristics(tmp_path / "missing")
    (tmp_path / "bad.yaml").write_text("name: x\nkind: keyword\npolarity: positive\nkeywords: [a]\nbogus: 1\n")
    with pytest.raises(ParseError, match="bogus"):
        load_heuristics(tmp_path)
    (tmp_path / "bad.yaml").write_text("name: x\nkind: threshold\npolarity: negative\nfield: file_count\nop: '~'\nbound: 1\n")
    with pytest.raises(ParseError, match="comparator"):
        load_heuristics(tmp_path)
    (tmp_path / "bad.yaml").write_text("name: x\nkind: keyword\npolarity: sideways\nkeywords: [a]\n")
    with pytest.raises(ParseError, match="polarity"):
        load_heuristics(tmp_path)


def test_keywords_file_relative(tmp_path):
    (tmp_path / "kw.txt").write_text("# comment\nfix\n\nbug\n")
    (tmp_path / "h.yaml").write_text("name: x\nkind: keyword\npolarity: positive\nkeywords_file: kw.txt\n")
    reg = load_heuristics(tmp_path)
    assert list(reg["x"].params["keywords"]) == ["fix", "bug"]


def test_bundled_registry_loads(bundled_heuristics):
    reg = load_heuristics(bundled_heuristics)
    assert "big_change" in reg and "test_file_fix" in reg
    assert reg["big_change"].params["bound"] == 6
    assert reg.content_hash() == load_heuristics(bundled_heuristics).content_hash()


def test_align_and_select():
    m = LabelMatrix(("a", "b"), ("x", "y"), np.array([[1, 0], [0, -1]], dtype=np.int8))
    assert align(m, ["y", "x"]).cells.tolist() == [[0, 1], [-1, 0]]
    with pytest.raises(DimensionError):
        align(m, ["z"])


def test_matrix_csv_roundtrip(tmp_path):
    m = LabelMatrix(("a", "b,c"), ("x", "y"), np.array([[1, 0], [0, -1]], dtype=np.int8))
    m.write(tmp_path / "m.csv", meta={"dataset_name": "d"})
    back = LabelMatrix.read(tmp_path / "m.csv")
    assert back == m
    assert back.meta["dataset_name"] == "d"
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "artifact_id,x,y"


def test_matrix_read_rejects_bad_cells(tmp_path):
    (tmp_path / "m.csv").write_text("artifact_id,x\na,2\n")
    with pytest.raises(ParseError):
        LabelMatrix.read(tmp_path / "m.csv")


def test_matrix_is_read_only():
    m = LabelMatrix(("a",), ("x",), np.array([[1]], dtype=np.int8))
    with pytest.raises(ValueError):
        m.cells[0, 0] = 0


words = st.sampled_from(["fix", "bug", "typo", "crash", "docs", "refactor", "error", "the", "a"])
messages = st.lists(words, max_size=8).map(" ".join)


@settings(max_examples=60, deadline=None)
@given(st.lists(messages, max_size=12), st.lists(st.lists(words, min_size=1, max_size=3), min_size=1, max_size=4),
       st.lists(st.booleans(), min_size=4, max_size=4))
def test_apply_properties(msgs, keyword_sets, negs):
    specs = [kw(f"h{j}", ks, "negative" if negs[j] else "positive") for j, ks in enumerate(keyword_sets)]
    ds = dataset(*(commit(f"c{i}", m) for i, m in enumerate(msgs)))
    m1 = apply_all(Registry(specs), ds)
    # deterministic
    assert m1 == apply_all(Registry(specs), ds)
    # one-sided: a column only ever holds its own polarity or abstain
    for j, spec in enumerate(specs):
        assert set(m1.cells[:, j].tolist()) <= {0, spec.sign}
    # columns are independent of the rest of the registry
    for j, spec in enumerate(specs):
        alone = apply_all(Registry([spec]), ds)
        assert np.array_equal(alone.cells[:, 0], m1.cells[:, j])
    # shape
    assert m1.shape == (len(msgs), len(specs))


def test_spec_flip_roundtrip():
    s = kw("a", ["x"])
    assert s.flipped().flipped() == s
    assert s.flipped().sign == -s.sign
    assert isinstance(s, HeuristicSpec)
