import pytest

from halluscore_extractor.errors import ModelError
from halluscore_extractor.textproc import (
    KEYWORD_POS,
    get_tagger,
    rule_ner,
    rule_pos,
    segment_words,
    tokenize_subwords,
    tokenize_words,
)

TEXT = "Marie Curie was born in Warsaw in 1867. She won two Nobel Prizes."


def test_segment_words_spans_and_indices():
    words = segment_words(TEXT)
    assert [w.core for w in words] == [
        "Marie", "Curie", "was", "born", "in", "Warsaw", "in", "1867",
        "She", "won", "two", "Nobel", "Prizes",
    ]
    for w in words:
        assert TEXT[w.char_start : w.char_end] == w.core
        assert w.chunk_start <= w.char_start <= w.char_end <= w.chunk_end
    # sentence boundary after "1867." and word indices restart there
    assert [w.sentence_index for w in words] == [0] * 8 + [1] * 5
    assert [w.word_index for w in words] == list(range(8)) + list(range(5))


def test_segment_words_strips_punctuation_to_core():
    words = segment_words('"Hello," she said.')
    hello = words[0]
    assert hello.core == "Hello"
    assert '"Hello,"'[hello.char_start : hello.char_end] == "Hello"
    assert (hello.chunk_start, hello.chunk_end) == (0, 8)


def test_segment_words_punctuation_only_chunk():
    words = segment_words("yes -- no.")
    dash = words[1]
    assert dash.core == ""
    assert dash.char_start == dash.char_end  # empty core span
    assert (dash.chunk_start, dash.chunk_end) == (4, 6)
    assert dash.word_index == 1  # still counts as a word


def test_hyphens_strip_at_edges_only():
    words = segment_words("a state-of-the-art design")
    assert words[1].core == "state-of-the-art"  # interior hyphens survive
    trailing = segment_words("yes- no")
    assert trailing[0].core == "yes"


def test_segment_words_all_sentence_enders():
    words = segment_words("Stop! Really? Yes.")
    assert [w.sentence_index for w in words] == [0, 1, 2]
    assert [w.word_index for w in words] == [0, 0, 0]


def test_tokenize_words_covers_non_space_text():
    tokens = tokenize_words(TEXT)
    rebuilt = "".join(t.text for t in tokens)
    assert rebuilt == TEXT.replace(" ", "")
    for t in tokens:
        assert TEXT[t.char_start : t.char_end] == t.text
    # punctuation comes out as 1-char non-core tokens tied to their word
    dots = [t for t in tokens if t.text == "."]
    assert len(dots) == 2
    assert all(not t.is_core for t in dots)
    assert dots[0].word.core == "1867"


def test_tokenize_words_spans_sorted_non_overlapping():
    tokens = tokenize_words('"Hello," she said. Goodbye!')
    for prev, cur in zip(tokens, tokens[1:]):
        assert prev.char_end <= cur.char_start
    for t in tokens:
        assert t.char_start < t.char_end


def test_tokenize_subwords_splits_long_cores():
    tokens = tokenize_subwords("Marie won two")
    assert [t.text for t in tokens] == ["Ma", "rie", "won", "two"]
    ma, rie = tokens[0], tokens[1]
    assert (ma.char_start, ma.char_end) == (0, 2)
    assert (rie.char_start, rie.char_end) == (2, 5)
    assert ma.word is rie.word and ma.is_core and rie.is_core
    assert len(tokenize_subwords(TEXT)) > len(tokenize_words(TEXT))


def test_rule_pos():
    assert rule_pos("1867") == "NUM"
    assert rule_pos("the") == "DET"
    assert rule_pos("in") == "ADP"
    assert rule_pos("and") == "CCONJ"
    assert rule_pos("She") == "PRON"
    assert rule_pos("was") == "AUX"
    assert rule_pos("Warsaw") == "PROPN"
    assert rule_pos("machine") == "NOUN"
    assert rule_pos("") == "PUNCT"
    assert set(KEYWORD_POS) == {"PROPN", "NOUN", "NUM"}


def test_rule_ner():
    assert rule_ner("1867") == "DATE"
    assert rule_ner("Warsaw") == "PERSON"
    assert rule_ner("machine") is None
    assert rule_ner("") is None


def test_get_tagger_rule_and_unknown():
    pos_fn, ner_fn = get_tagger("rule")
    assert pos_fn("Warsaw") == "PROPN"
    assert ner_fn("machine") is None
    # any other tagger needs spacy plus a locally installed model
    with pytest.raises(ModelError):
        get_tagger("nonexistent_tagger_model")
