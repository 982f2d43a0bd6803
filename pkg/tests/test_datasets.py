import numpy as np
import pytest

from ppikit.datasets import (
    REGULAR,
    STRICT,
    DatasetSplit,
    InteractionCorpus,
    InteractionPair,
    audit_split,
    augment_mirrors,
    balance_classes,
    filter_by_length,
    ingest_pairs,
    is_mirror_closed,
    protein_occurrences,
    read_split,
    sample_negatives,
    split_regular,
    split_strict,
    write_split,
)
from ppikit.encoding import ProteinRecord
from ppikit.errors import (
    AlreadyAugmented,
    EmptyStrictTest,
    ImbalancedCorpus,
    InsufficientCandidates,
)

from helpers import make_balanced_corpus


def _rec(name, seq="ACDE"):
    return ProteinRecord(name, seq)


def _pair(a, b, label, seq_a="ACDE", seq_b="WYKL"):
    return InteractionPair(_rec(a, seq_a), _rec(b, seq_b), label)


def _corpus(*pairs):
    return InteractionCorpus(list(pairs))


# --- ingestion ---------------------------------------------------------------

def test_ingest_well_formed_rows():
    rows = ["p1\tACD\tp2\tWYK\t1", "p1\tACD\tp3\tMMM\t0"]
    result = ingest_pairs(rows)
    assert len(result.corpus) == 2
    assert result.rejections == []


def test_ingest_skips_header_and_blank_lines():
    rows = ["# id_a\tseq_a\tid_b\tseq_b\tlabel", "", "p1\tACD\tp2\tWYK\t1"]
    result = ingest_pairs(rows)
    assert len(result.corpus) == 1 and not result.rejections


def test_ingest_rejects_non_binary_label():
    result = ingest_pairs(["p1\tACD\tp2\tWYK\t2"])
    assert len(result.corpus) == 0
    assert result.rejections[0].reason == "IllegalLabel"


def test_ingest_rejects_duplicate_triple():
    rows = ["p1\tACD\tp2\tWYK\t1", "p1\tACD\tp2\tWYK\t1"]
    result = ingest_pairs(rows)
    assert len(result.corpus) == 1
    assert result.rejections[0].reason == "DuplicatePair"


def test_ingest_keeps_mirror_of_existing_couple():
    rows = ["p1\tACD\tp2\tWYK\t1", "p2\tWYK\tp1\tACD\t1"]
    result = ingest_pairs(rows)
    assert len(result.corpus) == 2 and not result.rejections


def test_ingest_rejects_malformed_row():
    result = ingest_pairs(["p1\tACD\tp2\tWYK"])
    assert result.rejections[0].reason == "MalformedRow"


def test_ingest_rejects_illegal_sequence_characters():
    result = ingest_pairs(["p1\tAC9\tp2\tWYK\t1"])
    assert result.rejections[0].reason == "UnknownResidue"


def test_ingest_rejects_conflicting_sequences_for_same_id():
    rows = ["p1\tACD\tp2\tWYK\t1", "p1\tMMM\tp3\tWYK\t0"]
    result = ingest_pairs(rows)
    assert len(result.corpus) == 1
    assert result.rejections[0].reason == "ConflictingSequence"


def test_ingest_accepts_overlong_sequences():
    # length filtering is an explicit separate step
    result = ingest_pairs([f"p1\t{'A' * 2000}\tp2\tWYK\t1"])
    assert len(result.corpus) == 1 and not result.rejections


# --- negative sampling ---------------------------------------------------------

def test_sample_negatives_excludes_positives_both_orientations():
    proteins = [_rec("P"), _rec("Q"), _rec("R")]
    positives = _corpus(_pair("P", "Q", 1))
    negatives = sample_negatives(positives, proteins, count=2, seed=0)
    assert len(negatives) == 2
    allowed = {("P", "R"), ("Q", "R"), ("P", "P"), ("Q", "Q"), ("R", "R")}
    for pair in negatives:
        key = tuple(sorted((pair.a.id, pair.b.id)))
        assert key in allowed
        assert pair.label == 0


def test_sample_negatives_insufficient_candidates():
    proteins = [_rec("P"), _rec("Q")]
    positives = _corpus(_pair("P", "Q", 1))
    with pytest.raises(InsufficientCandidates):
        sample_negatives(positives, proteins, count=5, seed=0)


def test_sample_negatives_deterministic_per_seed():
    corpus = make_balanced_corpus(40, seed=3)
    proteins = corpus.proteins()
    first = sample_negatives(corpus, proteins, count=10, seed=42)
    second = sample_negatives(corpus, proteins, count=10, seed=42)
    assert [p.key() for p in first] == [p.key() for p in second]
    third = sample_negatives(corpus, proteins, count=10, seed=43)
    assert [p.key() for p in first] != [p.key() for p in third]


def test_sample_negatives_are_unique_couples():
    corpus = make_balanced_corpus(20, seed=4)
    negatives = sample_negatives(corpus, corpus.proteins(), count=15, seed=1)
    keys = {tuple(sorted((p.a.id, p.b.id))) for p in negatives}
    assert len(keys) == 15


# --- length filter ---------------------------------------------------------------

def test_filter_by_length_boundary_inclusive():
    long_seq = "A" * 1166
    corpus = _corpus(_pair("P", "Q", 1, seq_a=long_seq, seq_b=long_seq))
    assert len(filter_by_length(corpus, 1166)) == 1


def test_filter_by_length_removes_one_long_partner():
    corpus = _corpus(_pair("P", "Q", 1, seq_a="A" * 10, seq_b="A" * 1167))
    assert len(filter_by_length(corpus, 1166)) == 0


def test_filter_by_length_empty_corpus():
    assert len(filter_by_length(_corpus(), 1166)) == 0


# --- occurrences ------------------------------------------------------------------

def test_protein_occurrences_counts_both_slots():
    corpus = _corpus(_pair("P", "Q", 1), _pair("P", "R", 0))
    assert protein_occurrences(corpus) == {"P": 2, "Q": 1, "R": 1}


def test_protein_occurrences_self_pair_counts_twice():
    corpus = _corpus(_pair("P", "P", 1))
    assert protein_occurrences(corpus) == {"P": 2}


def test_protein_occurrences_empty():
    assert protein_occurrences(_corpus()) == {}


# --- regular split ----------------------------------------------------------------

def test_split_regular_100_couples():
    corpus = make_balanced_corpus(100, seed=0)
    split = split_regular(corpus, (0.8, 0.1, 0.1), seed=7)
    assert split.sizes() == {"train": 80, "validation": 10, "test": 10}
    for subset in split.sets().values():
        assert subset.positive_fraction() == 0.5


def test_split_regular_all_in_train():
    corpus = make_balanced_corpus(40, seed=1)
    split = split_regular(corpus, (1.0, 0.0, 0.0), seed=0)
    assert split.sizes() == {"train": 40, "validation": 0, "test": 0}


def test_split_regular_rejects_imbalance():
    corpus = _corpus(_pair("P", "Q", 1), _pair("P", "R", 1))
    with pytest.raises(ImbalancedCorpus):
        split_regular(corpus, seed=0)


def test_split_regular_partitions_corpus():
    corpus = make_balanced_corpus(60, seed=2)
    for seed in (0, 1, 99):
        split = split_regular(corpus, (0.6, 0.2, 0.2), seed=seed)
        keys = [p.key() for s in split.sets().values() for p in s.pairs]
        assert len(keys) == len(corpus)
        assert set(keys) == {p.key() for p in corpus.pairs}
        assert len(split.discarded) == 0


def test_split_regular_reproducible_per_seed():
    corpus = make_balanced_corpus(30, seed=5)
    a = split_regular(corpus, seed=11)
    b = split_regular(corpus, seed=11)
    assert [p.key() for p in a.train.pairs] == [p.key() for p in b.train.pairs]


# --- strict split -----------------------------------------------------------------

def test_split_strict_rare_couple_lands_in_test():
    # Z and Y appear once each (rare); every other protein appears 3+ times,
    # and the rare couples carry one label each so the test set can balance.
    pairs = [
        _pair("Z", "W", 1), _pair("Y", "V", 0),
        _pair("A", "B", 1), _pair("A", "C", 0), _pair("A", "D", 1),
        _pair("B", "C", 0), _pair("B", "D", 1), _pair("C", "D", 0),
        _pair("W", "A", 0), _pair("W", "B", 1), _pair("W", "C", 0),
        _pair("V", "A", 1), _pair("V", "B", 0), _pair("V", "C", 1),
    ]
    corpus = InteractionCorpus(pairs)
    split = split_strict(corpus, val_fraction=0.0, seed=0)
    test_keys = {p.key() for p in split.test.pairs}
    assert test_keys == {("Z", "W", 1), ("Y", "V", 0)}
    report = audit_split(split)
    assert report.strictness_violations == 0


def test_split_strict_no_qualifying_couples():
    # every protein appears 3 times
    pairs = [
        _pair("A", "B", 1), _pair("A", "C", 0), _pair("A", "D", 1),
        _pair("B", "C", 1), _pair("B", "D", 0), _pair("C", "D", 0),
    ]
    with pytest.raises(EmptyStrictTest):
        split_strict(InteractionCorpus(pairs), seed=0)


def test_split_strict_balances_and_accounts_for_discards():
    corpus = make_balanced_corpus(400, seed=6, rare_fraction=0.3)
    split = split_strict(corpus, val_fraction=0.1, seed=3)
    for subset in split.sets().values():
        if len(subset):
            assert subset.positive_fraction() == 0.5
    total = sum(split.sizes().values()) + len(split.discarded)
    assert total == len(corpus)
    keys = [p.key() for s in split.sets().values() for p in s.pairs]
    keys += [p.key() for p in split.discarded.pairs]
    assert set(keys) == {p.key() for p in corpus.pairs}


def test_split_strict_zero_violations_across_seeds():
    corpus = make_balanced_corpus(300, seed=8, rare_fraction=0.25)
    for seed in (0, 5, 17):
        split = split_strict(corpus, val_fraction=0.15, seed=seed)
        assert audit_split(split).strictness_violations == 0


# --- mirror augmentation ------------------------------------------------------------

def _tiny_split(*pairs, kind=REGULAR):
    return DatasetSplit(
        train=_corpus(*pairs),
        validation=_corpus(),
        test=_corpus(),
        kind=kind,
    )


def test_augment_adds_mirror():
    split = augment_mirrors(_tiny_split(_pair("A", "B", 1)))
    keys = [p.key() for p in split.train.pairs]
    assert keys == [("A", "B", 1), ("B", "A", 1)]
    assert split.augmented


def test_augment_keeps_existing_mirror_pairs():
    split = augment_mirrors(_tiny_split(_pair("A", "B", 1), _pair("B", "A", 1)))
    assert len(split.train) == 2


def test_augment_self_pair_not_doubled():
    split = augment_mirrors(_tiny_split(_pair("A", "A", 1)))
    assert len(split.train) == 1


def test_augment_twice_is_an_error():
    split = augment_mirrors(_tiny_split(_pair("A", "B", 1)))
    with pytest.raises(AlreadyAugmented):
        augment_mirrors(split)


def test_augment_mirror_closure_and_size_bound():
    corpus = make_balanced_corpus(80, seed=9)
    split = split_regular(corpus, seed=1)
    before = split.sizes()
    augmented = augment_mirrors(split)
    for name, subset in augmented.sets().items():
        assert len(subset) <= 2 * before[name]
        assert is_mirror_closed(subset)


# --- audit -----------------------------------------------------------------------

def test_audit_valid_regular_split_has_no_couple_overlap():
    corpus = make_balanced_corpus(100, seed=10)
    report = audit_split(split_regular(corpus, seed=0))
    assert all(v == 0 for v in report.couple_overlap.values())
    assert report.strictness_violations is None


def test_audit_detects_shared_couple():
    shared = _pair("P", "Q", 1)
    split = DatasetSplit(
        train=_corpus(shared, _pair("R", "S", 0)),
        validation=_corpus(),
        test=_corpus(shared),
        kind=REGULAR,
    )
    report = audit_split(split)
    assert report.couple_overlap["train_test"] == 1


def test_audit_mirror_counts_as_same_couple():
    split = DatasetSplit(
        train=_corpus(_pair("P", "Q", 1)),
        validation=_corpus(),
        test=_corpus(_pair("Q", "P", 1)),
        kind=REGULAR,
    )
    assert audit_split(split).couple_overlap["train_test"] == 1


def test_audit_counts_strictness_violation():
    split = DatasetSplit(
        train=_corpus(_pair("P", "Q", 1), _pair("R", "S", 0)),
        validation=_corpus(),
        test=_corpus(_pair("P", "R", 1)),
        kind=STRICT,
    )
    assert audit_split(split).strictness_violations == 1


def test_audit_reports_balance():
    corpus = make_balanced_corpus(40, seed=11)
    report = audit_split(split_regular(corpus, seed=0))
    assert report.balance["train"] == 0.5


# --- helpers and io -----------------------------------------------------------------

def test_balance_classes_downsamples_majority():
    pairs = [_pair(f"P{i}", f"Q{i}", 1) for i in range(6)]
    pairs += [_pair(f"R{i}", f"S{i}", 0) for i in range(4)]
    balanced, dropped = balance_classes(InteractionCorpus(pairs), seed=0)
    assert len(balanced.positives()) == len(balanced.negatives()) == 4
    assert len(dropped) == 2


def test_split_round_trip_through_tsv(tmp_path):
    corpus = make_balanced_corpus(60, seed=12)
    split = split_regular(corpus, seed=5)
    write_split(split, tmp_path)
    loaded = read_split(tmp_path, kind=REGULAR)
    for name in ("train", "validation", "test"):
        original = [p.key() for p in split.sets()[name].pairs]
        reloaded = [p.key() for p in loaded.sets()[name].pairs]
        assert original == reloaded
