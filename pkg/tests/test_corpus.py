import json
import logging

import pytest
from hypothesis import given
from hypothesis import strategies as st

from millqe.corpus import (
    AnalyzerConfig,
    Document,
    RecordError,
    analyze,
    ingest_jsonl,
    ingest_tsv,
    read_queries,
)


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def test_jsonl_field_mapping(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", [
        json.dumps({"_id": "d1", "title": "", "text": "hello world"}),
        json.dumps({"_id": "d2", "title": "T", "text": "body"}),
    ])
    docs = list(ingest_jsonl(p))
    assert docs[0].doc_id == "d1" and docs[0].text == "hello world"
    assert docs[1].text == "T body"


def test_jsonl_missing_id_is_record_error(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", [json.dumps({"_id": "a", "text": "x"}), json.dumps({"text": "no id"})])
    with pytest.raises(RecordError) as info:
        list(ingest_jsonl(p, on_error="raise"))
    assert info.value.line_no == 2


def test_jsonl_skip_mode_warns_and_keeps_count(tmp_path, caplog):
    p = write_lines(tmp_path / "c.jsonl", [
        json.dumps({"_id": "a", "text": "x"}),
        "{not json",
        json.dumps({"text": "no id"}),
        json.dumps({"_id": "b", "text": "y"}),
    ])
    with caplog.at_level(logging.WARNING):
        docs = list(ingest_jsonl(p))
    assert [d.doc_id for d in docs] == ["a", "b"]
    assert "c.jsonl:2" in caplog.text and "c.jsonl:3" in caplog.text


def test_tsv_basic_and_errors(tmp_path):
    p = write_lines(tmp_path / "c.tsv", ["7\tcat facts"])
    assert list(ingest_tsv(p)) == [Document("7", "cat facts")]
    bad = write_lines(tmp_path / "bad.tsv", ["1\tok", "2\ttoo\tmany"])
    with pytest.raises(RecordError) as info:
        list(ingest_tsv(bad, on_error="raise"))
    assert info.value.line_no == 2
    empty = tmp_path / "empty.tsv"
    empty.write_text("")
    assert list(ingest_tsv(empty)) == []


def test_read_queries_both_formats(tmp_path):
    tsv = write_lines(tmp_path / "q.tsv", ["q1\twhat is bm25", "q2\tcats"])
    jsonl = write_lines(tmp_path / "q.jsonl", [json.dumps({"_id": "q1", "text": "what is bm25"})])
    assert [q.query_id for q in read_queries(tsv)] == ["q1", "q2"]
    assert read_queries(jsonl)[0].text == "what is bm25"
    dup = write_lines(tmp_path / "dup.tsv", ["q1\ta", "q1\tb"])
    with pytest.raises(ValueError, match="duplicate"):
        read_queries(dup)


def test_analyze_examples():
    assert analyze("The CATS sat!") == ["cat", "sat"]
    assert analyze("") == []
    assert analyze("a b a", AnalyzerConfig(stopwords=False, stemming=False)) == ["a", "b", "a"]


def test_analyze_splits_on_punctuation_and_underscores():
    assert analyze("foo_bar-baz/qux", AnalyzerConfig(stemming=False)) == ["foo", "bar", "baz", "qux"]


def test_stages_toggle_independently():
    text = "Running DOGS"
    assert analyze(text, AnalyzerConfig(lowercase=False, stopwords=False, stemming=False)) == ["Running", "DOGS"]
    assert analyze(text, AnalyzerConfig(stopwords=False, stemming=False)) == ["running", "dogs"]
    assert analyze(text, AnalyzerConfig(stopwords=False)) == ["run", "dog"]


# Porter fixed points: stemming these again changes nothing.
STABLE = ["cat", "dog", "sat", "run", "retriev", "queri", "expans", "document", "bm25", "search", "index"]


@given(st.lists(st.sampled_from(STABLE + ["the", "and", "of"]), max_size=30))
def test_analyze_idempotent_on_stable_vocabulary(words):
    once = analyze(" ".join(words))
    assert analyze(" ".join(once)) == once


@given(st.text(max_size=200))
def test_analyze_tokens_nonempty_and_deterministic(text):
    toks = analyze(text)
    assert all(toks)
    assert analyze(text) == toks
