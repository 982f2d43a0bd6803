"""Interaction-pair corpora: ingestion, negative sampling, splits and audits.

Two split styles are supported. A *regular* split randomizes couples and
partitions them; individual proteins may recur across sets. A *strict* split
first extracts every couple containing a protein that appears at most twice
in the whole corpus and builds the test set from those, so each test couple
carries at least one protein never seen in training or validation.

All randomized operations draw from numpy's PCG64 generator seeded
explicitly, so results are bit-reproducible for a given seed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .encoding import ProteinRecord, sequence_issues
from .errors import (
    AlreadyAugmented,
    EmptyStrictTest,
    ImbalancedCorpus,
    InsufficientCandidates,
    PPIKitError,
)

REGULAR = "regular"
STRICT = "strict"

#: Couples with at most this many total appearances of a protein qualify for
#: the strict test set.
STRICT_OCCURRENCE_CUTOFF = 2


@dataclass(frozen=True)
class InteractionPair:
    """An ordered couple of proteins plus a binary interaction label."""

    a: ProteinRecord
    b: ProteinRecord
    label: int

    def key(self) -> tuple[str, str, int]:
        """Ordered identity used for exact-duplicate detection."""
        return (self.a.id, self.b.id, self.label)

    def couple_key(self) -> tuple[str, str, int]:
        """Unordered identity: mirror couples compare equal."""
        lo, hi = sorted((self.a.id, self.b.id))
        return (lo, hi, self.label)


@dataclass
class InteractionCorpus:
    """A list of interaction pairs plus a free-text provenance note."""

    pairs: list[InteractionPair] = field(default_factory=list)
    provenance: str = ""

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[InteractionPair]:
        return iter(self.pairs)

    def positives(self) -> list[InteractionPair]:
        return [p for p in self.pairs if p.label == 1]

    def negatives(self) -> list[InteractionPair]:
        return [p for p in self.pairs if p.label == 0]

    def positive_fraction(self) -> float | None:
        if not self.pairs:
            return None
        return len(self.positives()) / len(self.pairs)

    def protein_ids(self) -> set[str]:
        return {rid for p in self.pairs for rid in (p.a.id, p.b.id)}

    def proteins(self) -> list[ProteinRecord]:
        """Unique protein records, ordered by first appearance."""
        seen: dict[str, ProteinRecord] = {}
        for p in self.pairs:
            seen.setdefault(p.a.id, p.a)
            seen.setdefault(p.b.id, p.b)
        return list(seen.values())


@dataclass(frozen=True)
class RowRejection:
    line_no: int
    reason: str
    detail: str


@dataclass
class IngestResult:
    corpus: InteractionCorpus
    rejections: list[RowRejection]


@dataclass
class DatasetSplit:
    """Train/validation/test corpora plus how they were produced.

    ``discarded`` holds every couple dropped while enforcing exact class
    balance, so the three sets plus the discards always account for the whole
    input corpus.
    """

    train: InteractionCorpus
    validation: InteractionCorpus
    test: InteractionCorpus
    kind: str
    augmented: bool = False
    discarded: InteractionCorpus = field(default_factory=InteractionCorpus)

    def sets(self) -> dict[str, InteractionCorpus]:
        return {"train": self.train, "validation": self.validation, "test": self.test}

    def sizes(self) -> dict[str, int]:
        return {name: len(c) for name, c in self.sets().items()}


@dataclass
class LeakReport:
    """Overlap and balance diagnostics for a split.

    ``couple_overlap`` counts unordered same-label couples shared between set
    pairs and must be zero for any valid split. ``protein_overlap`` counts
    individual proteins shared between sets; nonzero values are expected for
    regular splits and are exactly the flaw strict splits remove from the
    test set. ``strictness_violations`` (strict splits only) counts test
    couples whose proteins *both* occur in train or validation.
    """

    couple_overlap: dict[str, int]
    protein_overlap: dict[str, int]
    balance: dict[str, float | None]
    strictness_violations: int | None

    @property
    def has_couple_leak(self) -> bool:
        return any(v > 0 for v in self.couple_overlap.values())

    def to_dict(self) -> dict:
        return {
            "couple_overlap": dict(self.couple_overlap),
            "protein_overlap": dict(self.protein_overlap),
            "balance": dict(self.balance),
            "strictness_violations": self.strictness_violations,
        }

    def to_text(self) -> str:
        lines = []
        for name, value in sorted(self.couple_overlap.items()):
            lines.append(f"couple_overlap.{name} = {value}")
        for name, value in sorted(self.protein_overlap.items()):
            lines.append(f"protein_overlap.{name} = {value}")
        for name, value in sorted(self.balance.items()):
            lines.append(f"balance.{name} = {'n/a' if value is None else f'{value:.6f}'}")
        sv = self.strictness_violations
        lines.append(f"strictness_violations = {'n/a' if sv is None else sv}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Ingestion and TSV round-trip
# --------------------------------------------------------------------------

def _iter_lines(source) -> Iterator[str]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


def ingest_pairs(source, provenance: str = "") -> IngestResult:
    """Read tab-separated pair rows into a corpus.

    Expected row format: ``id_a<TAB>seq_a<TAB>id_b<TAB>seq_b<TAB>label`` with
    label 0 or 1. Lines starting with ``#`` and blank lines are skipped.
    Invalid rows are collected into the rejection list rather than raised:
    wrong column counts, non-binary labels, illegal or empty sequences, a
    repeated (id_a, id_b, label) triple, or an id re-used with a different
    sequence. Overlong sequences are *not* rejected here; length filtering is
    a separate explicit step (see filter_by_length).
    """
    registry: dict[str, ProteinRecord] = {}
    seen_triples: set[tuple[str, str, int]] = set()
    pairs: list[InteractionPair] = []
    rejections: list[RowRejection] = []

    def record_for(rid: str, seq: str, line_no: int) -> ProteinRecord | None:
        rec = ProteinRecord(rid, seq)
        known = registry.get(rid)
        if known is None:
            issues = sequence_issues(rec.sequence, max_len=None)
            if issues:
                first = issues[0]
                where = "" if first.position is None else f" at position {first.position}"
                rejections.append(
                    RowRejection(line_no, first.kind, f"protein {rid!r}{where}")
                )
                return None
            registry[rid] = rec
            return rec
        if known.sequence != rec.sequence:
            rejections.append(
                RowRejection(line_no, "ConflictingSequence", f"protein {rid!r} re-used with a different sequence")
            )
            return None
        return known

    for line_no, raw in enumerate(_iter_lines(source), start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        columns = line.split("\t")
        if len(columns) != 5:
            rejections.append(
                RowRejection(line_no, "MalformedRow", f"expected 5 columns, got {len(columns)}")
            )
            continue
        id_a, seq_a, id_b, seq_b, label_text = columns
        if label_text not in ("0", "1"):
            rejections.append(RowRejection(line_no, "IllegalLabel", f"label {label_text!r}"))
            continue
        a = record_for(id_a, seq_a, line_no)
        if a is None:
            continue
        b = record_for(id_b, seq_b, line_no)
        if b is None:
            continue
        pair = InteractionPair(a, b, int(label_text))
        if pair.key() in seen_triples:
            rejections.append(
                RowRejection(line_no, "DuplicatePair", f"{pair.key()} already ingested")
            )
            continue
        seen_triples.add(pair.key())
        pairs.append(pair)

    return IngestResult(InteractionCorpus(pairs, provenance), rejections)


def ingest_proteins(source) -> tuple[list[ProteinRecord], list[RowRejection]]:
    """Read a two-column ``id<TAB>sequence`` protein list."""
    records: list[ProteinRecord] = []
    rejections: list[RowRejection] = []
    seen: dict[str, str] = {}
    for line_no, raw in enumerate(_iter_lines(source), start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        columns = line.split("\t")
        if len(columns) != 2:
            rejections.append(
                RowRejection(line_no, "MalformedRow", f"expected 2 columns, got {len(columns)}")
            )
            continue
        rid, seq = columns
        rec = ProteinRecord(rid, seq)
        issues = sequence_issues(rec.sequence, max_len=None)
        if issues:
            rejections.append(RowRejection(line_no, issues[0].kind, f"protein {rid!r}"))
            continue
        if rid in seen:
            if seen[rid] != rec.sequence:
                rejections.append(
                    RowRejection(line_no, "ConflictingSequence", f"protein {rid!r}")
                )
            continue
        seen[rid] = rec.sequence
        records.append(rec)
    return records, rejections


def write_corpus(corpus: InteractionCorpus, path) -> None:
    """Write a corpus in the same TSV format ingest_pairs reads."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# id_a\tseq_a\tid_b\tseq_b\tlabel\n")
        for p in corpus.pairs:
            fh.write(f"{p.a.id}\t{p.a.sequence}\t{p.b.id}\t{p.b.sequence}\t{p.label}\n")


def load_corpus(path, provenance: str = "") -> InteractionCorpus:
    """Read a TSV pair file, raising on the first rejected row."""
    result = ingest_pairs(path, provenance or str(path))
    if result.rejections:
        bad = result.rejections[0]
        raise PPIKitError(
            f"{path}: line {bad.line_no}: {bad.reason} ({bad.detail}); "
            f"{len(result.rejections)} row(s) rejected"
        )
    return result.corpus


SPLIT_FILES = {"train": "train.tsv", "validation": "validation.tsv", "test": "test.tsv"}


def write_split(split: DatasetSplit, out_dir) -> dict[str, str]:
    """Write the three set files (plus discards, if any) into a directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, corpus in split.sets().items():
        path = out_dir / SPLIT_FILES[name]
        write_corpus(corpus, path)
        written[name] = str(path)
    if len(split.discarded):
        path = out_dir / "discarded.tsv"
        write_corpus(split.discarded, path)
        written["discarded"] = str(path)
    return written


def read_split(split_dir, kind: str, augmented: bool = False) -> DatasetSplit:
    """Load a split previously written by write_split."""
    split_dir = Path(split_dir)
    sets = {}
    for name, filename in SPLIT_FILES.items():
        sets[name] = load_corpus(split_dir / filename, provenance=name)
    discarded = InteractionCorpus()
    if (split_dir / "discarded.tsv").exists():
        discarded = load_corpus(split_dir / "discarded.tsv", provenance="discarded")
    return DatasetSplit(
        train=sets["train"],
        validation=sets["validation"],
        test=sets["test"],
        kind=kind,
        augmented=augmented,
        discarded=discarded,
    )


# --------------------------------------------------------------------------
# Corpus construction
# --------------------------------------------------------------------------

def sample_negatives(
    positives: InteractionCorpus,
    proteins: list[ProteinRecord],
    count: int,
    seed: int,
) -> InteractionCorpus:
    """Draw ``count`` label-0 couples that never appear in ``positives``.

    Couples are unordered (drawing (A, B) also rules out (B, A)) and
    self-pairs are eligible. Raises InsufficientCandidates when fewer
    non-interacting couples exist than requested.
    """
    unique: dict[str, ProteinRecord] = {}
    for rec in proteins:
        unique.setdefault(rec.id, rec)
    ordered = sorted(unique.values(), key=lambda r: r.id)
    n = len(ordered)
    index_of = {rec.id: i for i, rec in enumerate(ordered)}

    excluded: set[tuple[int, int]] = set()
    for pair in positives:
        ia, ib = index_of.get(pair.a.id), index_of.get(pair.b.id)
        if ia is None or ib is None:
            continue
        excluded.add((min(ia, ib), max(ia, ib)))

    total = n * (n + 1) // 2
    available = total - len(excluded)
    if count > available:
        raise InsufficientCandidates(
            f"requested {count} negatives but only {available} couples are free"
        )

    rng = np.random.Generator(np.random.PCG64(seed))
    drawn: list[tuple[int, int]] = []
    taken: set[tuple[int, int]] = set()
    # Rejection sampling is fast while the pool is sparse; fall back to full
    # enumeration when the request exhausts a small pool.
    if total <= 2_000_000 and count > available // 2:
        candidates = [
            (i, j)
            for i, j in itertools.combinations_with_replacement(range(n), 2)
            if (i, j) not in excluded
        ]
        order = rng.permutation(len(candidates))[:count]
        drawn = [candidates[k] for k in order]
    else:
        while len(drawn) < count:
            i, j = rng.integers(0, n, size=2)
            key = (min(int(i), int(j)), max(int(i), int(j)))
            if key in excluded or key in taken:
                continue
            taken.add(key)
            drawn.append(key)

    pairs = [InteractionPair(ordered[i], ordered[j], 0) for i, j in drawn]
    return InteractionCorpus(pairs, provenance=f"sampled negatives (seed={seed})")


def filter_by_length(corpus: InteractionCorpus, max_len: int) -> InteractionCorpus:
    """Keep exactly the couples where both sequences fit in ``max_len``."""
    kept = [
        p for p in corpus.pairs if len(p.a.sequence) <= max_len and len(p.b.sequence) <= max_len
    ]
    return InteractionCorpus(kept, corpus.provenance)


def protein_occurrences(corpus: InteractionCorpus) -> dict[str, int]:
    """Couple-slot counts per protein id; a self-pair counts its protein twice."""
    counts: dict[str, int] = {}
    for p in corpus.pairs:
        counts[p.a.id] = counts.get(p.a.id, 0) + 1
        counts[p.b.id] = counts.get(p.b.id, 0) + 1
    return counts


def balance_classes(
    corpus: InteractionCorpus, seed: int
) -> tuple[InteractionCorpus, list[InteractionPair]]:
    """Downsample the majority class to the minority count (seeded).

    Returns the balanced corpus and the discarded couples.
    """
    pos, neg = corpus.positives(), corpus.negatives()
    if len(pos) == len(neg):
        return corpus, []
    rng = np.random.Generator(np.random.PCG64(seed))
    major, minor = (pos, neg) if len(pos) > len(neg) else (neg, pos)
    order = rng.permutation(len(major))
    kept_major = [major[i] for i in order[: len(minor)]]
    dropped = [major[i] for i in order[len(minor):]]
    balanced = InteractionCorpus(minor + kept_major, corpus.provenance)
    return balanced, dropped


# --------------------------------------------------------------------------
# Splits
# --------------------------------------------------------------------------

def _require_balanced(corpus: InteractionCorpus) -> tuple[list[InteractionPair], list[InteractionPair]]:
    pos, neg = corpus.positives(), corpus.negatives()
    if len(pos) != len(neg):
        raise ImbalancedCorpus(f"{len(pos)} positives vs {len(neg)} negatives")
    return pos, neg


def _class_lists_shuffled(corpus, rng) -> tuple[list[InteractionPair], list[InteractionPair]]:
    """Shuffle all couples, then separate the classes (order inherited)."""
    order = rng.permutation(len(corpus.pairs))
    shuffled = [corpus.pairs[i] for i in order]
    return [p for p in shuffled if p.label == 1], [p for p in shuffled if p.label == 0]


def split_regular(
    corpus: InteractionCorpus,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetSplit:
    """Randomize couples and partition them into train/validation/test.

    Positives and negatives are cut at the same per-class boundaries
    (cumulative floor), so every set is exactly half positive. Requires a
    balanced corpus.
    """
    if min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be non-negative and sum to 1, got {ratios}")
    _require_balanced(corpus)
    rng = np.random.Generator(np.random.PCG64(seed))
    pos, neg = _class_lists_shuffled(corpus, rng)

    per_class = len(pos)
    cut1 = int(np.floor(per_class * ratios[0]))
    cut2 = int(np.floor(per_class * (ratios[0] + ratios[1])))

    def build(lo, hi, name):
        return InteractionCorpus(pos[lo:hi] + neg[lo:hi], provenance=name)

    return DatasetSplit(
        train=build(0, cut1, "train"),
        validation=build(cut1, cut2, "validation"),
        test=build(cut2, per_class, "test"),
        kind=REGULAR,
    )


def split_strict(
    corpus: InteractionCorpus,
    val_fraction: float = 0.1,
    seed: int = 0,
) -> DatasetSplit:
    """Build a test set from couples containing a rarely-seen protein.

    A couple qualifies for the test set when at least one of its proteins
    appears at most twice in the whole corpus. All qualifying couples are
    extracted; the test set is a seeded per-class subsample of them restoring
    exact balance, and the extracted-but-unused remainder is discarded (never
    returned to train or validation, which would re-expose rare test
    proteins). Non-qualifying couples are rebalanced if needed, shuffled and
    split into train and validation at ``val_fraction``.
    """
    if not 0 <= val_fraction < 1:
        raise ValueError(f"val_fraction must be in [0, 1), got {val_fraction}")
    _require_balanced(corpus)
    occurrences = protein_occurrences(corpus)

    def qualifies(pair: InteractionPair) -> bool:
        return (
            occurrences[pair.a.id] <= STRICT_OCCURRENCE_CUTOFF
            or occurrences[pair.b.id] <= STRICT_OCCURRENCE_CUTOFF
        )

    qualifying = [p for p in corpus.pairs if qualifies(p)]
    pool = [p for p in corpus.pairs if not qualifies(p)]
    if not qualifying:
        raise EmptyStrictTest("every protein appears more than twice; no couple qualifies")

    rng = np.random.Generator(np.random.PCG64(seed))
    qual_pos = [p for p in qualifying if p.label == 1]
    qual_neg = [p for p in qualifying if p.label == 0]
    per_class = min(len(qual_pos), len(qual_neg))
    if per_class == 0:
        raise EmptyStrictTest(
            "qualifying couples are single-class; a balanced test set is impossible"
        )
    pos_order = rng.permutation(len(qual_pos))
    neg_order = rng.permutation(len(qual_neg))
    test_pairs = [qual_pos[i] for i in pos_order[:per_class]]
    test_pairs += [qual_neg[i] for i in neg_order[:per_class]]
    discarded = [qual_pos[i] for i in pos_order[per_class:]]
    discarded += [qual_neg[i] for i in neg_order[per_class:]]

    pool_corpus, dropped = balance_classes(InteractionCorpus(pool), seed=seed + 1)
    discarded += dropped
    pool_pos, pool_neg = _class_lists_shuffled(pool_corpus, rng)
    n_val = int(np.floor(len(pool_pos) * val_fraction))

    train = InteractionCorpus(pool_pos[n_val:] + pool_neg[n_val:], provenance="train")
    validation = InteractionCorpus(pool_pos[:n_val] + pool_neg[:n_val], provenance="validation")
    return DatasetSplit(
        train=train,
        validation=validation,
        test=InteractionCorpus(test_pairs, provenance="test"),
        kind=STRICT,
        discarded=InteractionCorpus(discarded, provenance="discarded"),
    )


def augment_mirrors(split: DatasetSplit) -> DatasetSplit:
    """Add the mirror couple (B, A, label) for every couple of every set.

    Couples whose mirror is already present, and self-pairs, are not
    double-inserted, so sets grow to at most twice their size. The input
    split must not already be augmented.
    """
    if split.augmented:
        raise AlreadyAugmented("split is already mirror-augmented")

    def mirror_set(corpus: InteractionCorpus) -> InteractionCorpus:
        present = {p.key() for p in corpus.pairs}
        out = list(corpus.pairs)
        for p in corpus.pairs:
            mirrored = InteractionPair(p.b, p.a, p.label)
            if mirrored.key() not in present:
                present.add(mirrored.key())
                out.append(mirrored)
        return InteractionCorpus(out, corpus.provenance)

    return DatasetSplit(
        train=mirror_set(split.train),
        validation=mirror_set(split.validation),
        test=mirror_set(split.test),
        kind=split.kind,
        augmented=True,
        discarded=split.discarded,
    )


def is_mirror_closed(corpus: InteractionCorpus) -> bool:
    """True when every couple's mirror is also present."""
    present = {p.key() for p in corpus.pairs}
    return all((p.b.id, p.a.id, p.label) in present for p in corpus.pairs)


# --------------------------------------------------------------------------
# Audit
# --------------------------------------------------------------------------

_SET_PAIRS = (("train", "validation"), ("train", "test"), ("validation", "test"))


def audit_split(split: DatasetSplit) -> LeakReport:
    """Measure couple- and protein-level overlap between the three sets.

    Couple identity is unordered (mirrors compare equal) with the label
    included, so a mirror-augmented split does not audit as self-leaking.
    """
    sets = split.sets()
    couple_keys = {name: {p.couple_key() for p in c.pairs} for name, c in sets.items()}
    protein_ids = {name: c.protein_ids() for name, c in sets.items()}

    couple_overlap = {}
    protein_overlap = {}
    for left, right in _SET_PAIRS:
        tag = f"{left}_{right}"
        couple_overlap[tag] = len(couple_keys[left] & couple_keys[right])
        protein_overlap[tag] = len(protein_ids[left] & protein_ids[right])

    balance = {name: c.positive_fraction() for name, c in sets.items()}

    violations = None
    if split.kind == STRICT:
        seen = protein_ids["train"] | protein_ids["validation"]
        violations = sum(
            1 for p in split.test.pairs if p.a.id in seen and p.b.id in seen
        )

    return LeakReport(
        couple_overlap=couple_overlap,
        protein_overlap=protein_overlap,
        balance=balance,
        strictness_violations=violations,
    )
