import string
from collections import Counter

import pytest

from charmt.corpus_io import Alignment, Corpus, SentenceRecord
from charmt.errors import ValidationError
from charmt.word_accuracy import (
    AlignmentSet,
    WordPair,
    accuracy_by_frequency,
    accuracy_by_similarity,
    build_frequency_table,
    extract_word_pairs,
    normalize_token,
    word_correct,
)


def _align(spec: str) -> Alignment:
    return Alignment(frozenset(tuple(map(int, t.split("-"))) for t in spec.split()))


def _record(rec_id, src, ref, byt5, mt5):
    return SentenceRecord(id=rec_id, source=src, reference=ref, hypotheses={"byt5": byt5, "mt5": mt5})


# Three-sentence corpus with hand-built alignments; per-pair correctness
# enumerated by hand in _EXPECTED below.
CORPUS = Corpus(
    records=(
        _record("w1", "der Hund schläft", "the dog sleeps", "the dog sleeps", "a dog rests"),
        _record(
            "w2", "die Katze trinkt Milch", "the cat drinks milk",
            "the cat drinks water", "cat the drinks milk",
        ),
        _record("w3", "Gesundheit ist gut", "gezondheid is goed", "gezondheid is goed", "health is goed"),
    )
)

ALIGNMENTS = AlignmentSet(
    src_ref={"w1": _align("0-0 1-1 2-2"), "w2": _align("0-0 1-1 2-2 3-3"), "w3": _align("0-0 1-1 2-2")},
    src_hyp={
        "byt5": {"w1": _align("0-0 1-1 2-2"), "w2": _align("0-0 1-1 2-2 3-3"), "w3": _align("0-0 1-1 2-2")},
        # mt5's w2 hypothesis swaps the first two words; the alignment follows.
        "mt5": {"w1": _align("0-0 1-1 2-2"), "w2": _align("0-1 1-0 2-2 3-3"), "w3": _align("0-0 1-1 2-2")},
    },
)

_EXPECTED = {
    "byt5": {"w1": [True, True, True], "w2": [True, True, True, False], "w3": [True, True, True]},
    "mt5": {"w1": [False, True, False], "w2": [True, True, True, True], "w3": [False, True, True]},
}


class TestExtractWordPairs:
    def test_paper_similarity(self):
        record = _record("x", "gesundheit", "gezondheid", "a", "b")
        pairs = extract_word_pairs(record, _align("0-0"))
        assert len(pairs) == 1
        assert pairs[0].similarity == pytest.approx(0.70)

    def test_empty_alignment(self):
        record = CORPUS.records[0]
        assert extract_word_pairs(record, Alignment(frozenset())) == []

    def test_out_of_range_names_record(self):
        record = CORPUS.records[0]
        with pytest.raises(ValidationError, match="w1"):
            extract_word_pairs(record, _align("5-0"))

    def test_case_insensitive_similarity(self):
        record = _record("x", "Berlin,", "berlin", "a", "b")
        pairs = extract_word_pairs(record, _align("0-0"))
        assert pairs[0].src_word == "berlin"
        assert pairs[0].similarity == 1.0


class TestWordCorrect:
    @pytest.mark.parametrize("system", ["byt5", "mt5"])
    def test_hand_enumerated_truth_values(self, system):
        for record in CORPUS:
            pairs = extract_word_pairs(record, ALIGNMENTS.for_record(record.id))
            got = [
                word_correct(
                    p, record.hypotheses[system], ALIGNMENTS.for_hypothesis(system, record.id)
                )
                for p in pairs
            ]
            assert got == _EXPECTED[system][record.id]

    def test_identity_hypothesis_all_true(self):
        record = CORPUS.records[0]
        pairs = extract_word_pairs(record, ALIGNMENTS.for_record("w1"))
        assert all(
            word_correct(p, record.reference, _align("0-0 1-1 2-2")) for p in pairs
        )

    def test_disjoint_hypothesis_all_false(self):
        record = CORPUS.records[0]
        pairs = extract_word_pairs(record, ALIGNMENTS.for_record("w1"))
        assert not any(word_correct(p, "x y z", _align("0-0 1-1 2-2")) for p in pairs)

    def test_word_order_invariance(self):
        # mt5's scrambled w2 output is fully correct because alignment follows the words
        assert _EXPECTED["mt5"]["w2"] == [True, True, True, True]


class TestAccuracyBySimilarity:
    def test_threshold_zero_equals_overall(self):
        report = accuracy_by_similarity(CORPUS, ALIGNMENTS, ("byt5", "mt5"), [0.0, 0.5])
        overall = report.bins[0]
        assert overall.n_pairs == 10
        assert overall.accuracy["byt5"] == pytest.approx(9 / 10)
        assert overall.accuracy["mt5"] == pytest.approx(7 / 10)
        assert overall.delta == pytest.approx(2 / 10)

    def test_identical_hypotheses_zero_delta(self):
        corpus = Corpus(
            records=tuple(
                _record(r.id, r.source, r.reference, r.hypotheses["byt5"], r.hypotheses["byt5"])
                for r in CORPUS
            )
        )
        alignments = AlignmentSet(
            src_ref=ALIGNMENTS.src_ref,
            src_hyp={"byt5": ALIGNMENTS.src_hyp["byt5"], "mt5": ALIGNMENTS.src_hyp["byt5"]},
        )
        report = accuracy_by_similarity(corpus, alignments, ("byt5", "mt5"))
        assert all(b.delta == 0.0 for b in report.bins if b.n_pairs)

    def test_constructed_high_similarity_delta_one(self):
        corpus = Corpus(
            records=(
                SentenceRecord(
                    id="d1",
                    source="Gesundheit Berlin kommt",
                    reference="gezondheid Berlin comes",
                    hypotheses={"A": "gezondheid Berlin arrives", "B": "health Hamburg comes"},
                ),
            )
        )
        identity = {"d1": _align("0-0 1-1 2-2")}
        alignments = AlignmentSet(src_ref=identity, src_hyp={"A": identity, "B": identity})
        report = accuracy_by_similarity(
            corpus, alignments, ("A", "B"), [0.0, 0.7, 0.8, 0.9, 1.0]
        )
        by_label = {b.label: b for b in report.bins}
        assert by_label[">=0"].delta == pytest.approx(2 / 3 - 1 / 3)
        for label in (">=0.7", ">=0.8", ">=0.9", ">=1"):
            assert by_label[label].delta == 1.0

    def test_empty_bin_flagged(self):
        report = accuracy_by_similarity(CORPUS, ALIGNMENTS, ("byt5", "mt5"), [0.0, 0.99])
        top = report.bins[-1]
        assert top.n_pairs == 0 and top.delta is None

    def test_disjoint_bins_partition(self):
        report = accuracy_by_similarity(
            CORPUS, ALIGNMENTS, ("byt5", "mt5"),
            [t / 10 for t in range(11)], cumulative=False,
        )
        assert sum(b.n_pairs for b in report.bins) == 10

    def test_accuracy_in_unit_interval(self):
        report = accuracy_by_similarity(CORPUS, ALIGNMENTS, ("byt5", "mt5"))
        for bin_ in report.bins:
            for value in bin_.accuracy.values():
                assert value is None or 0.0 <= value <= 1.0

    def test_bad_thresholds(self):
        with pytest.raises(ValidationError):
            accuracy_by_similarity(CORPUS, ALIGNMENTS, ("byt5", "mt5"), [0.5, 0.5])


class TestFrequencyTable:
    def test_basic(self):
        assert build_frequency_table(["a a b"]).counts == {"a": 2, "b": 1}

    def test_empty(self):
        assert build_frequency_table([]).counts == {}

    def test_oracle_recount_on_100_lines(self):
        vocab = ["Alpha", "beta", "Gamma,", "delta.", "(epsilon)", "zeta!", "ETA", "theta"]
        lines = [" ".join(vocab[(i + j) % len(vocab)] for j in range(7)) for i in range(100)]
        # independent recount: strip ASCII punctuation with str.strip, lowercase
        expected = Counter()
        for line in lines:
            for token in line.split():
                cleaned = token.strip(string.punctuation).lower()
                if cleaned:
                    expected[cleaned] += 1
        assert build_frequency_table(lines).counts == dict(expected)


class TestAccuracyByFrequency:
    FREQ = build_frequency_table(
        ["the " * 150, "is " * 200, "dog " * 15, "cat " * 5, "drinks " * 5, "goed " * 2]
    )

    def test_hand_computed_bins(self):
        report = accuracy_by_frequency(
            CORPUS, ALIGNMENTS, ("byt5", "mt5"), self.FREQ, bins=(0, 1, 10, 100)
        )
        by_label = {b.label: b for b in report.bins}
        zero = by_label["[0,1)"]  # sleeps, milk, gezondheid
        assert zero.n_pairs == 3
        assert zero.accuracy["byt5"] == pytest.approx(2 / 3)
        assert zero.accuracy["mt5"] == pytest.approx(1 / 3)
        assert zero.delta == pytest.approx(1 / 3)
        low = by_label["[1,10)"]  # cat, drinks, goed
        assert low.n_pairs == 3 and low.delta == 0.0
        mid = by_label["[10,100)"]  # dog
        assert mid.n_pairs == 1 and mid.delta == 0.0
        top = by_label["[100,inf)"]  # the, the, is
        assert top.n_pairs == 3
        assert top.delta == pytest.approx(1 / 3)

    def test_bins_partition_pairs(self):
        report = accuracy_by_frequency(CORPUS, ALIGNMENTS, ("byt5", "mt5"), self.FREQ)
        assert sum(b.n_pairs for b in report.bins) == 10

    def test_all_unseen_in_zero_bin(self):
        empty = build_frequency_table([])
        report = accuracy_by_frequency(CORPUS, ALIGNMENTS, ("byt5", "mt5"), empty, bins=(0, 1))
        assert report.bins[0].n_pairs == 10
        assert report.bins[1].n_pairs == 0

    def test_identical_systems_zero_delta(self):
        corpus = Corpus(
            records=tuple(
                _record(r.id, r.source, r.reference, r.hypotheses["byt5"], r.hypotheses["byt5"])
                for r in CORPUS
            )
        )
        alignments = AlignmentSet(
            src_ref=ALIGNMENTS.src_ref,
            src_hyp={"byt5": ALIGNMENTS.src_hyp["byt5"], "mt5": ALIGNMENTS.src_hyp["byt5"]},
        )
        out = accuracy_by_frequency(corpus, alignments, ("byt5", "mt5"), self.FREQ)
        assert all(b.delta == 0.0 for b in out.bins if b.n_pairs)

    def test_nonzero_first_boundary_rejected(self):
        with pytest.raises(ValidationError, match="partition"):
            accuracy_by_frequency(CORPUS, ALIGNMENTS, ("byt5", "mt5"), self.FREQ, bins=(1, 10))


def test_normalize_token():
    assert normalize_token("«Berlin»,") == "berlin"
    assert normalize_token("...") == ""
    assert normalize_token("don't") == "don't"


def test_word_pair_invariant():
    pair = WordPair(src_word="abc", ref_word="abd", src_index=0, ref_index=0, similarity=2 / 3)
    assert pair.similarity == pytest.approx(2 / 3)
