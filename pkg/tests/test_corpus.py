import json
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lyrnet.corpus import (
    PAD_ID, UNK_ID, EmotionLabel, LyricsDocument, Quadrant, Vocabulary, detokenize, document_from_record,
    generate_synthetic, hemispheres_of, import_crawl_records, import_csv, load_corpus, quadrant_of,
    read_jsonl_documents, split, tokenize, words, write_corpus,
)
from lyrnet.errors import DataError, InvalidParameterError
from oracles import RUSSELL, inconsistent_records


@pytest.mark.parametrize("quadrant", ["Q1", "Q2", "Q3", "Q4"])
def test_quadrant_hemisphere_bijection(quadrant):
    v, a = hemispheres_of(quadrant)
    assert (v.value, a.value) == RUSSELL[quadrant]
    assert quadrant_of(v, a) is Quadrant(quadrant)


def test_hemisphere_map_is_a_bijection():
    images = {hemispheres_of(q) for q in Quadrant}
    assert len(images) == 4


def test_label_indices():
    assert EmotionLabel.from_quadrant("Q3").indices() == {"quadrant": 2, "valence": 1, "arousal": 1}
    assert EmotionLabel.from_hemispheres("positive", "high").quadrant is Quadrant.Q1


def test_inconsistent_label_rejected():
    with pytest.raises(DataError, match="inconsistent"):
        EmotionLabel("Q1", "negative", "high")


def test_every_constructed_inconsistent_record_is_rejected(tmp_path):
    bad = inconsistent_records()
    for rec in bad:
        with pytest.raises(DataError):
            document_from_record(rec, "test")
    for rec in bad:
        path = tmp_path / f"{rec['id']}.jsonl"
        path.write_text(json.dumps(rec) + "\n")
        with pytest.raises(DataError, match=r"\.jsonl:1"):
            read_jsonl_documents(path)


def test_partial_labels_are_completed():
    doc = document_from_record({"id": "a", "lyrics": "x", "quadrant": "Q2", "valence": "negative"}, "t")
    assert doc.label == EmotionLabel.from_quadrant("Q2")
    doc = document_from_record({"id": "b", "lyrics": "x", "valence": "positive", "arousal": "low"}, "t")
    assert doc.label.quadrant is Quadrant.Q4
    assert document_from_record({"id": "c", "lyrics": "x"}, "t").label is None


@pytest.mark.parametrize("line", ['{"id": 1, "lyrics": "x"}', '{"lyrics": "x"}', "[1, 2]", "{not json"])
def test_malformed_lines_are_data_errors(tmp_path, line):
    path = tmp_path / "c.jsonl"
    path.write_text(line + "\n")
    with pytest.raises(DataError):
        read_jsonl_documents(path)


def test_duplicate_ids_rejected(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id": "a", "lyrics": "x"}\n{"id": "a", "lyrics": "y"}\n')
    with pytest.raises(DataError, match="duplicate"):
        read_jsonl_documents(path)


def test_words_lowercase_and_strip_punctuation():
    assert words("Hello, WORLD! It's_ok") == ["hello", "world", "it", "s", "ok"]


def test_vocabulary_reserves_pad_and_unk():
    vocab = Vocabulary.build(["b a b", "c"])
    assert vocab.tokens == ["b", "a", "c"]
    assert vocab.id("<pad>") == PAD_ID and vocab.id("zzz") == UNK_ID
    assert tokenize("a c zzz", vocab) == [3, 4, UNK_ID]
    with pytest.raises(DataError):
        vocab.add("new")


def test_tokenize_truncates():
    vocab = Vocabulary.build(["a b c d"])
    assert tokenize("a b c d", vocab, max_len=2) == [2, 3]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.text(alphabet="abcxyz", min_size=1, max_size=5), min_size=1, max_size=20))
def test_tokenize_detokenize_round_trip(ws):
    text = " ".join(ws)
    vocab = Vocabulary.build([text])
    assert detokenize(tokenize(text, vocab), vocab) == text


def test_jsonl_round_trip(tmp_path):
    docs = generate_synthetic(2, seed=1)
    path = tmp_path / "c.jsonl"
    write_corpus(docs, path)
    loaded, vocab = load_corpus(path)
    assert [d.to_record() for d in loaded] == [d.to_record() for d in docs]
    assert all(d.tokens for d in loaded) and vocab.frozen


def test_import_csv(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("ID,Lyrics,Artist,Quadrant\nx1,\"la la, la\",Someone,Q4\nx2,oh oh,,\n")
    docs = import_csv(path)
    assert docs[0].label.quadrant is Quadrant.Q4 and docs[0].artist == "Someone"
    assert docs[1].label is None


def test_import_csv_rejects_inconsistent_row(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("id,lyrics,quadrant,valence\nx1,words,Q1,negative\n")
    with pytest.raises(DataError, match=":2"):
        import_csv(path)


def test_import_crawl_records_keeps_fetched_only(tmp_path):
    path = tmp_path / "crawl.jsonl"
    recs = [
        {"status": "fetched", "lyrics": "hi there", "resolved_url": "http://x/a",
         "query": {"id": "s1", "artist": "A", "title": "T", "extra": {"quadrant": "Q2"}}},
        {"status": "not_found", "query": {"id": "s2", "artist": "B", "title": "U"}},
    ]
    path.write_text("".join(json.dumps(r) + "\n" for r in recs))
    docs = import_crawl_records(path)
    assert len(docs) == 1 and docs[0].url == "http://x/a" and docs[0].label.quadrant is Quadrant.Q2


def test_split_is_stratified_disjoint_and_deterministic():
    docs = generate_synthetic(10, seed=0)
    parts = split(docs, [0.8, 0.2], seed=3)
    assert len(parts["train"]) == 32 and len(parts["test"]) == 8
    ids = [d.id for p in parts.values() for d in p]
    assert sorted(ids) == sorted(d.id for d in docs)
    assert Counter(d.label.quadrant for d in parts["test"]) == {q: 2 for q in Quadrant}
    again = split(docs, [0.8, 0.2], seed=3)
    assert [d.id for d in again["test"]] == [d.id for d in parts["test"]]
    assert [d.id for d in split(docs, [0.8, 0.2], seed=4)["test"]] != [d.id for d in parts["test"]]


def test_split_validation():
    docs = generate_synthetic(2, seed=0)
    with pytest.raises(InvalidParameterError):
        split(docs, [0.5, 0.4], seed=0)
    with pytest.raises(InvalidParameterError):
        split(docs, [0.5, 0.5], seed=0, names=["a"])
    with pytest.raises(DataError, match="empty"):
        split(docs, [0.9, 0.1], seed=0)
    with pytest.raises(DataError):
        split([LyricsDocument("x", "y")], [1.0], seed=0)


def test_synthetic_corpus_is_balanced_and_separable():
    docs = generate_synthetic(25, vocab_size=200, seed=7)
    assert Counter(d.label.quadrant for d in docs) == {q: 25 for q in Quadrant}
    stems = {"Q1": "bright", "Q2": "storm", "Q3": "grey", "Q4": "calm"}
    for d in docs:
        keywords = {w.rstrip("0123456789") for w in words(d.lyrics) if not w.startswith("la")}
        assert keywords == {stems[d.label.quadrant.value]}
    assert generate_synthetic(3, seed=7)[0].lyrics == generate_synthetic(3, seed=7)[0].lyrics


def test_synthetic_rejects_bad_size():
    with pytest.raises(InvalidParameterError):
        generate_synthetic(0)
