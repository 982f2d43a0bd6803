"""Input checks for the estimator API."""

from __future__ import annotations

import numpy as np

from .encoding import sequence_issues
from .errors import EmptySequence, SequenceTooLong, UnknownResidue

_ISSUE_ERRORS = {
    "UnknownResidue": UnknownResidue,
    "SequenceTooLong": SequenceTooLong,
    "EmptySequence": EmptySequence,
}


def check_sequences(X, max_len: int | None = None) -> list[str]:
    """Validate a 1-d collection of residue strings; returns them as a list."""
    sequences = list(X)
    for i, seq in enumerate(sequences):
        if not isinstance(seq, str):
            raise TypeError(f"sequence {i} is {type(seq).__name__}, expected str")
        issues = sequence_issues(seq, max_len)
        if issues:
            first = issues[0]
            where = "" if first.position is None else f" at position {first.position}"
            raise _ISSUE_ERRORS[first.kind](f"sequence {i}{where}")
    return sequences


def check_pair_sequences(X, max_len: int | None = None) -> tuple[list[str], list[str]]:
    """Validate an (n, 2) collection of sequence pairs.

    Accepts a 2-column array, a list of 2-tuples, or a pair of columns, and
    returns the two sequence lists.
    """
    arr = np.asarray(X, dtype=object)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) array of sequence pairs, got shape {arr.shape}")
    return (
        check_sequences(arr[:, 0], max_len),
        check_sequences(arr[:, 1], max_len),
    )


def check_binary_labels(y, n_samples: int | None = None) -> np.ndarray:
    """Validate labels as a flat 0/1 integer array."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    values = np.unique(arr)
    if not np.isin(values, [0, 1]).all():
        raise ValueError(f"labels must be binary, found values {values.tolist()}")
    if n_samples is not None and arr.shape[0] != n_samples:
        raise ValueError(f"got {arr.shape[0]} labels for {n_samples} samples")
    return arr.astype(int)
