"""Records, preprocessing, splitting, vocabulary, statistics."""

import json

import numpy as np
import pytest

from aste.data import (
    END_ID,
    PAD_ID,
    START_ID,
    UNK_ID,
    Corpus,
    Sentence,
    Span,
    Triplet,
    Vocabulary,
    chunk_review,
    convert_triple_format,
    parse_record,
    preprocess,
    serialize_record,
    split_corpus,
    stats,
)
from aste.errors import ParseError, ValidationError
from aste.synth import random_gold_sentences


class TestParseRecord:
    def test_basic_record(self):
        line = ('{"tokens": ["Great", "food"], "triplets": '
                '[{"aspect": [1, 1], "opinion": [0, 0], "sentiment": "POS"}]}')
        sentence = parse_record(line)
        assert sentence.tokens == ["Great", "food"]
        assert sentence.triplets == [Triplet(Span(1, 1), Span(0, 0), "POS")]

    def test_inverted_span_rejected(self):
        line = ('{"tokens": ["a", "b"], "triplets": '
                '[{"aspect": [1, 0], "opinion": [0, 0], "sentiment": "POS"}]}')
        with pytest.raises(ParseError):
            parse_record(line, line_no=7)

    def test_missing_triplets_field_means_empty(self):
        assert parse_record('{"tokens": ["a"]}').triplets == []

    def test_unknown_field_rejected(self):
        with pytest.raises(ParseError):
            parse_record('{"tokens": ["a"], "label": 1}')

    def test_bad_sentiment(self):
        line = ('{"tokens": ["a", "b"], "triplets": '
                '[{"aspect": [0, 0], "opinion": [1, 1], "sentiment": "MEH"}]}')
        with pytest.raises(ParseError):
            parse_record(line)

    def test_span_outside_sentence(self):
        line = ('{"tokens": ["a"], "triplets": '
                '[{"aspect": [0, 0], "opinion": [1, 1], "sentiment": "POS"}]}')
        with pytest.raises(ParseError):
            parse_record(line)

    def test_heads_length_checked(self):
        with pytest.raises(ParseError):
            parse_record('{"tokens": ["a", "b"], "heads": [-1]}')

    def test_error_names_line_number(self):
        with pytest.raises(ParseError, match="line 42"):
            parse_record("not json", line_no=42)


class TestRoundTrip:
    def test_serialize_then_parse_is_identity(self):
        for sentence in random_gold_sentences(50, seed=1):
            recovered = parse_record(serialize_record(sentence))
            assert recovered.tokens == sentence.tokens
            assert recovered.triplets == sentence.triplets
            assert recovered.heads == sentence.heads

    def test_byte_stable_field_order(self):
        sentence = Sentence(
            tokens=["a", "b"], heads=[-1, 0],
            triplets=[Triplet(Span(0, 0), Span(1, 1), "NEU")],
        )
        once = serialize_record(sentence)
        twice = serialize_record(parse_record(once))
        assert once == twice
        assert list(json.loads(once)) == ["tokens", "heads", "triplets"]


def sentence_with(n_tokens, n_triplets=1, aspect_len=1, opinion_len=1):
    tokens = [f"w{i}" for i in range(n_tokens)]
    triplets = []
    cursor = 0
    for _ in range(n_triplets):
        a = Span(cursor, cursor + aspect_len - 1)
        o = Span(cursor + aspect_len, cursor + aspect_len + opinion_len - 1)
        triplets.append(Triplet(a, o, "POS"))
        cursor = o.end + 1
    return Sentence(tokens=tokens, triplets=triplets)


class TestPreprocess:
    def test_short_example_removed(self):
        kept, report = preprocess([sentence_with(3)])
        assert kept == [] and report.removed_too_short == 1

    def test_long_example_removed(self):
        kept, report = preprocess([sentence_with(130)])
        assert kept == [] and report.removed_too_long == 1

    def test_annotation_less_removed(self):
        kept, report = preprocess([Sentence(tokens=["a"] * 10)])
        assert kept == [] and report.removed_no_annotations == 1

    def test_long_aspect_triplet_dropped_example_kept(self):
        sentence = sentence_with(30, n_triplets=2, aspect_len=9)
        kept, report = preprocess([sentence])
        assert report.triplets_dropped_long_aspect == 2
        assert report.removed_emptied == 1
        mixed = Sentence(
            tokens=["w"] * 30,
            triplets=[
                Triplet(Span(0, 8), Span(9, 9), "POS"),   # 9-token aspect: dropped
                Triplet(Span(10, 10), Span(11, 11), "NEG"),
            ],
        )
        kept, report = preprocess([mixed])
        assert len(kept) == 1
        assert kept[0].triplets == [Triplet(Span(10, 10), Span(11, 11), "NEG")]
        assert report.triplets_dropped_long_aspect == 1

    def test_long_opinion_triplet_dropped(self):
        sentence = Sentence(
            tokens=["w"] * 40,
            triplets=[Triplet(Span(0, 0), Span(1, 17), "POS")],  # 17-token opinion
        )
        kept, report = preprocess([sentence])
        assert kept == []
        assert report.triplets_dropped_long_opinion == 1
        assert report.removed_emptied == 1

    def test_boundaries_kept(self):
        four = sentence_with(4)
        with_128 = sentence_with(128)
        eight_aspect = Sentence(
            tokens=["w"] * 30, triplets=[Triplet(Span(0, 7), Span(8, 8), "POS")]
        )
        sixteen_opinion = Sentence(
            tokens=["w"] * 30, triplets=[Triplet(Span(0, 0), Span(1, 16), "POS")]
        )
        kept, report = preprocess([four, with_128, eight_aspect, sixteen_opinion])
        assert len(kept) == 4 and report.kept == 4

    def test_idempotent(self):
        raw = [
            sentence_with(3), sentence_with(10), sentence_with(130),
            Sentence(tokens=["a"] * 12),
            Sentence(tokens=["w"] * 30, triplets=[Triplet(Span(0, 8), Span(9, 9), "POS")]),
        ]
        once, _ = preprocess(raw)
        twice, report = preprocess(once)
        assert [s.tokens for s in twice] == [s.tokens for s in once]
        assert report.kept == len(once)
        assert report.removed_no_annotations == 0
        assert report.triplets_dropped_long_aspect == 0


class TestSplit:
    def test_1000_split(self):
        corpus = split_corpus(random_gold_sentences(1000, seed=2), seed=0)
        assert (len(corpus.train), len(corpus.dev), len(corpus.test)) == (700, 100, 200)

    def test_minimum_split(self):
        corpus = split_corpus(random_gold_sentences(10, seed=3), seed=0)
        assert (len(corpus.train), len(corpus.dev), len(corpus.test)) == (7, 1, 2)

    def test_deterministic(self):
        sentences = random_gold_sentences(40, seed=4)
        a = split_corpus(sentences, seed=9)
        b = split_corpus(sentences, seed=9)
        assert [s.tokens for s in a.train] == [s.tokens for s in b.train]

    def test_partition_preserves_multiset(self):
        sentences = random_gold_sentences(53, seed=5)
        corpus = split_corpus(sentences, seed=1)
        combined = sorted(
            serialize_record(s) for s in corpus.train + corpus.dev + corpus.test
        )
        assert combined == sorted(serialize_record(s) for s in sentences)

    def test_too_small_rejected(self):
        with pytest.raises(ValidationError):
            split_corpus(random_gold_sentences(9, seed=6), seed=0)


class TestVocabulary:
    def test_reserved_plus_content(self):
        vocab = Vocabulary.build([Sentence(tokens=["a", "b", "a"])], min_count=1)
        assert len(vocab) == 4 + 2
        assert (PAD_ID, UNK_ID, START_ID, END_ID) == (0, 1, 2, 3)

    def test_unseen_token_maps_to_unknown(self):
        vocab = Vocabulary.build([Sentence(tokens=["a"])])
        assert vocab.encode(["zzz"])[0] == UNK_ID

    def test_frequency_then_lexicographic_order(self):
        vocab = Vocabulary.build([Sentence(tokens=["b", "b", "c", "a", "c", "b"])])
        assert vocab.token_to_id["b"] == 4
        assert vocab.token_to_id["c"] == 5
        assert vocab.token_to_id["a"] == 6

    def test_min_count_filters(self):
        vocab = Vocabulary.build([Sentence(tokens=["a", "a", "b"])], min_count=2)
        assert "b" not in vocab.token_to_id
        assert vocab.encode(["b"])[0] == UNK_ID

    def test_id_list_round_trip(self):
        vocab = Vocabulary.build([Sentence(tokens=["x", "y"])])
        rebuilt = Vocabulary.from_token_list(vocab.id_list())
        assert rebuilt.token_to_id == vocab.token_to_id

    def test_empty_split_rejected(self):
        with pytest.raises(ValidationError):
            Vocabulary.build([])


class TestStats:
    def test_triplets_per_sentence(self):
        corpus = Corpus(name="c", train=[sentence_with(8, 1), sentence_with(12, 3)])
        per_split = stats(corpus)
        assert per_split["train"].triplets_per_sentence == 2.0
        assert per_split["train"].sentences == 2

    def test_empty_split_zeros(self):
        per_split = stats(Corpus(name="c"))
        assert per_split["dev"].sentences == 0
        assert per_split["dev"].triplets_per_sentence == 0.0

    def test_published_shape_fixture(self):
        # 19,485 sentences carrying 38,050 triplets: mean rounds to 1.95
        base = sentence_with(6, 1)
        extra = sentence_with(8, 2)
        n_extra = 38050 - 19485
        sentences = [extra] * n_extra + [base] * (19485 - n_extra)
        per_split = stats(Corpus(name="large", train=sentences))
        assert per_split["train"].sentences == 19485
        assert per_split["train"].triplets == 38050
        assert round(per_split["train"].triplets_per_sentence, 2) == 1.95


class TestConverter:
    def test_good_line(self):
        line = "Great food but the service was dreadful ! ####[([1], [0], 'POS'), ([4], [6], 'NEG')]"
        sentences, failures = convert_triple_format([line])
        assert failures == []
        assert sentences[0].tokens[1] == "food"
        assert sentences[0].triplets[0] == Triplet(Span(1, 1), Span(0, 0), "POS")

    def test_multi_token_spans(self):
        line = "the battery life is short ####[([1,2], [4], 'NEG')]"
        sentences, failures = convert_triple_format([line])
        assert sentences[0].triplets[0].aspect == Span(1, 2)

    def test_non_contiguous_indices_reported(self):
        line = "a b c d ####[([0,2], [3], 'POS')]"
        sentences, failures = convert_triple_format([line])
        assert sentences == []
        assert len(failures) == 1 and "line 1" in failures[0]

    def test_missing_separator_reported(self):
        sentences, failures = convert_triple_format(["just a sentence"])
        assert sentences == [] and len(failures) == 1

    def test_failures_carry_line_numbers(self):
        lines = ["a b ####[([0], [1], 'POS')]", "broken", "c d ####[([0], [1], 'NEU')]"]
        sentences, failures = convert_triple_format(lines)
        assert len(sentences) == 2
        assert "line 2" in failures[0]


class TestChunking:
    def test_splits_at_sentence_final_punctuation(self):
        tokens = ["a", "b", ".", "c", "d", "!"]
        assert chunk_review(tokens, max_len=4) == [["a", "b", "."], ["c", "d", "!"]]

    def test_merges_while_fitting(self):
        tokens = ["a", ".", "b", ".", "c", "."]
        assert chunk_review(tokens, max_len=10) == [tokens]

    def test_hard_splits_oversize_runs(self):
        tokens = ["w"] * 10
        pieces = chunk_review(tokens, max_len=4)
        assert all(len(p) <= 4 for p in pieces)
        assert sum(len(p) for p in pieces) == 10


class TestRecordTypes:
    def test_identical_spans_rejected(self):
        with pytest.raises(ValidationError):
            Triplet(Span(0, 0), Span(0, 0), "POS")

    def test_span_ordering_validated(self):
        with pytest.raises(ValidationError):
            Span(3, 1)

    def test_triplet_hashable_set_semantics(self):
        a = Triplet(Span(0, 0), Span(1, 1), "POS")
        b = Triplet(Span(0, 0), Span(1, 1), "POS")
        assert {a} == {b}
