"""One-hot encoding of amino-acid sequences into fixed-shape matrices.

Every sequence is mapped to a ``(max_len, 24)`` matrix: one row per residue,
a single 1 at the residue's alphabet index, and all-zero rows after the
sequence ends. The default ``max_len`` of 1166 matches the length cutoff used
throughout the dataset pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySequence, SequenceTooLong, UnknownResidue

#: The 20 standard proteinogenic residues in alphabetical order, followed by
#: selenocysteine (U) and the ambiguity placeholders B, Z and X.
ALPHABET = "ACDEFGHIKLMNPQRSTVWYUBZX"
ALPHABET_SIZE = len(ALPHABET)

#: Longest sequence the default pipeline accepts.
MAX_SEQUENCE_LENGTH = 1166

_INDEX = {residue: i for i, residue in enumerate(ALPHABET)}

# Byte-level lookup table: residue codes for upper- and lowercase letters,
# -1 for everything else.
_CODE_TABLE = np.full(256, -1, dtype=np.int16)
for _i, _ch in enumerate(ALPHABET):
    _CODE_TABLE[ord(_ch)] = _i
    _CODE_TABLE[ord(_ch.lower())] = _i


def alphabet_index(residue: str) -> int:
    """Position of ``residue`` in the 24-symbol alphabet.

    Raises UnknownResidue for any character outside the alphabet.
    """
    try:
        return _INDEX[residue.upper()]
    except (KeyError, AttributeError):
        raise UnknownResidue(f"not an amino-acid code: {residue!r}") from None


@dataclass(frozen=True)
class ProteinRecord:
    """A protein identifier plus its chain of amino-acid residues.

    Sequences are normalized to uppercase on construction; FASTA sources vary
    in case. Construction does not validate the characters, so that invalid
    records can still be carried into validation reports.
    """

    id: str
    sequence: str

    def __post_init__(self):
        object.__setattr__(self, "sequence", self.sequence.upper())

    def __len__(self) -> int:
        return len(self.sequence)


@dataclass(frozen=True)
class EncodedProtein:
    """One-hot matrix of shape ``(max_len, 24)`` plus the unpadded length."""

    matrix: np.ndarray
    true_length: int


@dataclass(frozen=True)
class SequenceIssue:
    """A single validation finding: the kind of problem and, for bad
    characters, the offending position."""

    kind: str  # "UnknownResidue" | "SequenceTooLong" | "EmptySequence"
    position: int | None = None


@dataclass
class ValidationReport:
    """Outcome of validating a batch of records."""

    valid_count: int = 0
    invalid: list[tuple[str, list[SequenceIssue]]] = field(default_factory=list)

    @property
    def invalid_count(self) -> int:
        return len(self.invalid)

    @property
    def ok(self) -> bool:
        return not self.invalid


def _sequence_codes(sequence: str) -> np.ndarray:
    """Alphabet indices for ``sequence``; raises UnknownResidue on the first
    character outside the alphabet."""
    try:
        raw = np.frombuffer(sequence.encode("ascii"), dtype=np.uint8)
    except UnicodeEncodeError as exc:
        raise UnknownResidue(
            f"non-ASCII character at position {exc.start}: {sequence[exc.start]!r}"
        ) from None
    codes = _CODE_TABLE[raw]
    bad = np.nonzero(codes < 0)[0]
    if bad.size:
        pos = int(bad[0])
        raise UnknownResidue(f"not an amino-acid code at position {pos}: {sequence[pos]!r}")
    return codes


def sequence_issues(sequence: str, max_len: int | None = MAX_SEQUENCE_LENGTH) -> list[SequenceIssue]:
    """All validation problems of ``sequence``. Empty list means valid.

    ``max_len=None`` disables the length check (used at ingestion, where
    length filtering is a separate, explicit step).
    """
    issues: list[SequenceIssue] = []
    if len(sequence) == 0:
        issues.append(SequenceIssue("EmptySequence"))
    if max_len is not None and len(sequence) > max_len:
        issues.append(SequenceIssue("SequenceTooLong"))
    try:
        _sequence_codes(sequence.upper())
    except UnknownResidue as exc:
        # position is embedded in the message; recover it for the report
        text = str(exc)
        pos = None
        if "position " in text:
            pos = int(text.split("position ")[1].split(":")[0])
        issues.append(SequenceIssue("UnknownResidue", pos))
    return issues


def validate_corpus(
    records: list[ProteinRecord], max_len: int | None = MAX_SEQUENCE_LENGTH
) -> ValidationReport:
    """Check every record for illegal characters, zero length or overlength."""
    report = ValidationReport()
    for record in records:
        issues = sequence_issues(record.sequence, max_len)
        if issues:
            report.invalid.append((record.id, issues))
        else:
            report.valid_count += 1
    return report


def encode_protein(record: ProteinRecord, max_len: int = MAX_SEQUENCE_LENGTH) -> EncodedProtein:
    """One-hot encode a record, zero-padded after the sequence end.

    Row ``i`` holds the one-hot vector of residue ``i``; rows from the
    sequence length up to ``max_len`` stay zero.
    """
    n = len(record.sequence)
    if n == 0:
        raise EmptySequence(f"record {record.id!r} has an empty sequence")
    if n > max_len:
        raise SequenceTooLong(f"record {record.id!r} has length {n} > {max_len}")
    codes = _sequence_codes(record.sequence)
    matrix = np.zeros((max_len, ALPHABET_SIZE), dtype=np.float64)
    matrix[np.arange(n), codes] = 1.0
    return EncodedProtein(matrix=matrix, true_length=n)


def encode_sequences(sequences, max_len: int = MAX_SEQUENCE_LENGTH) -> np.ndarray:
    """Stack one-hot matrices for a batch of sequences: ``(n, max_len, 24)``."""
    out = np.zeros((len(sequences), max_len, ALPHABET_SIZE), dtype=np.float64)
    for i, seq in enumerate(sequences):
        n = len(seq)
        if n == 0:
            raise EmptySequence(f"sequence {i} is empty")
        if n > max_len:
            raise SequenceTooLong(f"sequence {i} has length {n} > {max_len}")
        out[i, np.arange(n), _sequence_codes(seq.upper())] = 1.0
    return out


def decode_encoded(encoded: EncodedProtein) -> str:
    """Recover the sequence from the non-zero rows of a one-hot matrix."""
    rows = encoded.matrix[: encoded.true_length]
    return "".join(ALPHABET[i] for i in np.argmax(rows, axis=1))
