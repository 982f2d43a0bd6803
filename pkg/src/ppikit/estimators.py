"""scikit-learn style front end over the pair models.

``OneHotProteinEncoder`` is a stateless transformer from sequences to
one-hot tensors; ``PairInteractionClassifier`` wraps model building and the
training protocol behind the usual fit/predict/predict_proba surface, so the
classifier composes with pipelines, cloning and parameter search.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .checkpoint import restore_model
from .encoding import MAX_SEQUENCE_LENGTH, encode_sequences
from .models import FC, RECURRENT, build_fc_model, build_recurrent_model
from .training import (
    EncodedPairSet,
    TrainingConfig,
    predict_probabilities,
    retrain_final,
    train,
)
from .validation import check_binary_labels, check_pair_sequences, check_sequences


class OneHotProteinEncoder(TransformerMixin, BaseEstimator):
    """Encode residue strings as (n, max_len, 24) one-hot arrays."""

    def __init__(self, max_len=MAX_SEQUENCE_LENGTH):
        self.max_len = max_len

    def fit(self, X, y=None):
        check_sequences(X, self.max_len)
        return self

    def transform(self, X):
        return encode_sequences(check_sequences(X, self.max_len), self.max_len)


class PairInteractionClassifier(ClassifierMixin, BaseEstimator):
    """Binary classifier over protein sequence pairs.

    Input samples are (sequence_a, sequence_b) string pairs. Fitting holds
    out ``validation_fraction`` of the samples (stratified, seeded) to drive
    the plateau schedule and best-epoch selection, then restores the weights
    of the epoch with minimal validation loss. With ``final_retrain=True``
    the model is instead re-initialized and trained on all samples for
    exactly that many epochs.

    Parameters mirror the training protocol; ``architecture`` selects the
    fully connected ("fc") or convolution+LSTM ("recurrent") pair model, and
    the geometry arguments allow reduced-size instances.
    """

    def __init__(
        self,
        architecture=RECURRENT,
        max_len=MAX_SEQUENCE_LENGTH,
        batch_size=2048,
        learning_rate=0.001,
        lr_factor=0.9,
        lr_floor=0.0008,
        plateau_patience=5,
        max_epochs=100,
        validation_fraction=0.1,
        final_retrain=False,
        seed=0,
        branch_units=20,
        conv_filters=5,
        kernel_size=20,
        pool_size=3,
        conv_blocks=3,
        lstm_units=32,
        head_units=None,
    ):
        self.architecture = architecture
        self.max_len = max_len
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_factor = lr_factor
        self.lr_floor = lr_floor
        self.plateau_patience = plateau_patience
        self.max_epochs = max_epochs
        self.validation_fraction = validation_fraction
        self.final_retrain = final_retrain
        self.seed = seed
        self.branch_units = branch_units
        self.conv_filters = conv_filters
        self.kernel_size = kernel_size
        self.pool_size = pool_size
        self.conv_blocks = conv_blocks
        self.lstm_units = lstm_units
        self.head_units = head_units

    # -- construction helpers -------------------------------------------------

    def _build(self):
        if self.architecture == FC:
            return build_fc_model(
                max_len=self.max_len,
                branch_units=self.branch_units,
                head_units=self.head_units if self.head_units is not None else 20,
                seed=self.seed,
            )
        if self.architecture == RECURRENT:
            return build_recurrent_model(
                max_len=self.max_len,
                conv_filters=self.conv_filters,
                kernel_size=self.kernel_size,
                pool_size=self.pool_size,
                conv_blocks=self.conv_blocks,
                lstm_units=self.lstm_units,
                head_units=self.head_units if self.head_units is not None else 25,
                seed=self.seed,
            )
        raise ValueError(f"unknown architecture {self.architecture!r}")

    def _config(self):
        return TrainingConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            lr_factor=self.lr_factor,
            lr_floor=self.lr_floor,
            plateau_patience=self.plateau_patience,
            max_epochs=self.max_epochs,
            seed=self.seed,
        )

    def _holdout_split(self, y):
        """Stratified seeded index split into (train, validation)."""
        rng = np.random.Generator(np.random.PCG64(self.seed))
        train_idx, val_idx = [], []
        for cls in (0, 1):
            idx = np.flatnonzero(y == cls)
            idx = idx[rng.permutation(len(idx))]
            n_val = max(1, int(np.floor(len(idx) * self.validation_fraction)))
            val_idx.extend(idx[:n_val])
            train_idx.extend(idx[n_val:])
        return np.sort(train_idx), np.sort(val_idx)

    # -- estimator API ----------------------------------------------------------

    def fit(self, X, y):
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0, 1)")
        seqs_a, seqs_b = check_pair_sequences(X, self.max_len)
        y = check_binary_labels(y, len(seqs_a))
        if len(np.unique(y)) < 2:
            raise ValueError("need both classes present to fit")

        train_idx, val_idx = self._holdout_split(y)
        make = lambda idx: EncodedPairSet(
            [seqs_a[i] for i in idx], [seqs_b[i] for i in idx], y[idx], self.max_len
        )
        config = self._config()
        model = self._build()
        log, best = train(model, make(train_idx), make(val_idx), config)

        if self.final_retrain:
            merged = EncodedPairSet(seqs_a, seqs_b, y, self.max_len)
            best = retrain_final(
                self.architecture, merged, log.best_epoch, config, model.build_config
            )
        self.model_ = restore_model(best)
        self.history_ = log
        self.best_epoch_ = log.best_epoch
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = 2
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("fit must be called before predicting")

    def predict_proba(self, X):
        self._check_fitted()
        seqs_a, seqs_b = check_pair_sequences(X, self.max_len)
        dataset = EncodedPairSet(seqs_a, seqs_b, np.zeros(len(seqs_a)), self.max_len)
        p = predict_probabilities(self.model_, dataset, batch_size=self.batch_size).reshape(-1)
        return np.column_stack([1.0 - p, p])

    def decision_function(self, X):
        return self.predict_proba(X)[:, 1]

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)
