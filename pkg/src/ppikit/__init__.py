"""Sequence-based protein-protein interaction models and dataset hygiene.

The package has three surfaces:

* an sklearn-style estimator API (``PairInteractionClassifier``,
  ``OneHotProteinEncoder``) for composing with the wider ecosystem,
* the dataset toolkit (``datasets``) for building, splitting, mirroring and
  leak-auditing interaction corpora,
* the ``ppikit`` command line tying both into reproducible pipeline runs.
"""

__version__ = "0.1.0"

from .encoding import (
    ALPHABET,
    ALPHABET_SIZE,
    MAX_SEQUENCE_LENGTH,
    EncodedProtein,
    ProteinRecord,
    alphabet_index,
    encode_protein,
    encode_sequences,
    validate_corpus,
)
from .datasets import (
    DatasetSplit,
    InteractionCorpus,
    InteractionPair,
    LeakReport,
    audit_split,
    augment_mirrors,
    filter_by_length,
    ingest_pairs,
    protein_occurrences,
    sample_negatives,
    split_regular,
    split_strict,
)
from .models import (
    PairModel,
    build_fc_model,
    build_model,
    build_recurrent_model,
    model_summary,
    param_count,
)
from .training import (
    EncodedPairSet,
    MetricsReport,
    TrainingConfig,
    TrainingLog,
    bce_loss,
    evaluate,
    plateau_schedule,
    retrain_final,
    train,
)
from .checkpoint import Checkpoint, load_checkpoint, restore_model, save_checkpoint
from .estimators import OneHotProteinEncoder, PairInteractionClassifier

__all__ = [
    "ALPHABET",
    "ALPHABET_SIZE",
    "MAX_SEQUENCE_LENGTH",
    "Checkpoint",
    "DatasetSplit",
    "EncodedPairSet",
    "EncodedProtein",
    "InteractionCorpus",
    "InteractionPair",
    "LeakReport",
    "MetricsReport",
    "OneHotProteinEncoder",
    "PairInteractionClassifier",
    "PairModel",
    "ProteinRecord",
    "TrainingConfig",
    "TrainingLog",
    "alphabet_index",
    "audit_split",
    "augment_mirrors",
    "bce_loss",
    "build_fc_model",
    "build_model",
    "build_recurrent_model",
    "encode_protein",
    "encode_sequences",
    "evaluate",
    "filter_by_length",
    "ingest_pairs",
    "load_checkpoint",
    "model_summary",
    "param_count",
    "plateau_schedule",
    "protein_occurrences",
    "restore_model",
    "retrain_final",
    "sample_negatives",
    "save_checkpoint",
    "split_regular",
    "split_strict",
    "train",
    "validate_corpus",
]
