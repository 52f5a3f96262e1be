import math

import pytest
from hypothesis import given, strategies as st

from scisumm.textproc import (cosine, cosine_matrix, normalize, stopwords, tfidf_vectors, tokenize,
                              word_count)

words = st.lists(st.sampled_from(["the", "cat", "model", "of", "graph", "resolution", "a", "gcn", "x1"]),
                 max_size=12)


@pytest.mark.parametrize("text, expected", [
    ("Tf-idf Cosine.", ["tf", "idf", "cosine"]),
    ("", []),
    ("GCNs (2017)!", ["gcns", "2017"]),
    ("state-of-the-art", ["state", "of", "the", "art"]),
    ("snake_case", ["snake", "case"]),
])
def test_tokenize(text, expected):
    assert tokenize(text) == expected


def test_word_count_counts_raw_tokens():
    assert word_count("The resolution of pronouns, in 2005.") == 6


def test_stopword_list_is_bundled():
    sw = stopwords()
    assert len(sw) > 500
    assert {"the", "of", "a", "which"} <= sw
    assert "resolution" not in sw


def test_normalize_drop_stopwords():
    assert normalize(["the", "resolution", "of", "pronouns"], drop_stopwords=True) == ["resolution", "pronouns"]


def test_normalize_stem():
    # Porter: step 1a strips -s, step 4 strips -ion after t with measure > 1
    assert normalize(["resolutions"], stem=True) == ["resolut"]


def test_normalize_identity():
    assert normalize(["cat"]) == ["cat"]


def test_stopwords_removed_before_stemming():
    # "others" stems to "other"; only the unstemmed form is looked up in the list
    assert normalize(["others"], stem=True, drop_stopwords=True) == []


@given(words)
def test_normalize_idempotent_without_stemming(tokens):
    once = normalize(tokens, drop_stopwords=True)
    assert normalize(once, drop_stopwords=True) == once
    assert normalize(normalize(tokens)) == normalize(tokens)


def test_porter_is_not_idempotent():
    once = normalize(["because"], stem=True)
    assert once == ["becaus"]
    assert normalize(once, stem=True) == ["becau"]


def test_tfidf_single_item():
    (v,) = tfidf_vectors([["a", "a", "b"]])
    # idf = ln(2/2) + 1 = 1
    assert v == pytest.approx({"a": 2.0, "b": 1.0})


def test_tfidf_term_in_every_item():
    vecs = tfidf_vectors([["x", "y"], ["x"], ["x", "z"]])
    assert all(v["x"] == pytest.approx(1.0) for v in vecs)
    assert vecs[0]["y"] == pytest.approx(math.log(4 / 2) + 1)


def test_tfidf_identical_items():
    a, b = tfidf_vectors([["p", "q", "q"], ["p", "q", "q"]])
    assert a == b


def test_tfidf_empty_items_give_zero_vectors():
    assert tfidf_vectors([[], []]) == [{}, {}]


def test_cosine_examples():
    assert cosine({"a": 1.0, "b": 2.0}, {"a": 1.0, "b": 2.0}) == pytest.approx(1.0)
    assert cosine({"a": 1.0}, {"b": 1.0}) == 0.0
    assert cosine({"a": 1.0, "b": 1.0}, {"a": 1.0}) == pytest.approx(1 / math.sqrt(2))
    assert cosine({}, {"a": 1.0}) == 0.0


vectors = st.dictionaries(st.sampled_from("abcdefg"), st.floats(0, 10, allow_nan=False), max_size=6)


@given(vectors, vectors)
def test_cosine_symmetric_and_bounded(u, v):
    c = cosine(u, v)
    assert c == pytest.approx(cosine(v, u), abs=1e-12)
    assert 0.0 <= c <= 1.0 + 1e-12


def _idf(collection, vectors):
    out = {}
    for doc, vec in zip(collection, vectors):
        for t in doc:
            out[t] = vec[t] / doc.count(t)
    return out


@given(st.lists(words.filter(bool), min_size=1, max_size=6))
def test_duplicating_collection_keeps_support_and_idf_order(collection):
    # smoothed idf is not scale-free, so directions move slightly; support and idf order do not
    before = tfidf_vectors(collection)
    after = tfidf_vectors(collection + collection)
    assert [set(u) for u in before] == [set(v) for v in after[:len(before)]]
    idf_a, idf_b = _idf(collection, before), _idf(collection, after)
    terms = sorted(idf_a)
    for s in terms:
        for t in terms:
            if idf_a[s] < idf_a[t] - 1e-12:
                assert idf_b[s] < idf_b[t]


def test_duplicating_collection_changes_smoothed_direction():
    u = tfidf_vectors([["the"], ["the", "cat"]])[1]
    v = tfidf_vectors([["the"], ["the", "cat"]] * 2)[1]
    # idf(cat): ln(3/2)+1 before, ln(5/3)+1 after; idf(the) = 1 in both
    assert u["cat"] == pytest.approx(math.log(1.5) + 1)
    assert v["cat"] == pytest.approx(math.log(5 / 3) + 1)
    assert cosine(u, v) < 1.0


def test_cosine_matrix_matches_pairwise():
    vecs = tfidf_vectors([["a", "b"], ["b", "c", "c"], ["d"], []])
    m = cosine_matrix(vecs)
    for i in range(4):
        for j in range(4):
            assert m[i, j] == pytest.approx(cosine(vecs[i], vecs[j]), abs=1e-12)
