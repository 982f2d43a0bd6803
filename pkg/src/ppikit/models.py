"""The two pair-input classifiers.

Both models run each protein's one-hot matrix through a feature-extraction
branch, concatenate the two branch outputs and classify with a small dense
head ending in a sigmoid unit.

* ``fc``: per branch, Flatten then two Dense(relu)+BatchNorm blocks. The two
  branches have independent parameters.
* ``recurrent``: per branch, a stack of Conv1D(relu)+MaxPool+BatchNorm blocks
  closed by an LSTM. One branch instance serves both inputs, so its
  parameters are shared and receive gradient contributions from both sides.

Builders take geometry arguments so reduced-size instances can be built for
tests; the defaults are the reference configuration at sequence length 1166.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import ALPHABET_SIZE, MAX_SEQUENCE_LENGTH
from .errors import NoForwardState, ShapeMismatch
from .nn import BatchNorm, Conv1D, Dense, Flatten, LSTM, Layer, MaxPool1D, Parameter
from .nn.layers import concat_pair, split_pair

FC = "fc"
RECURRENT = "recurrent"
MODEL_KINDS = (FC, RECURRENT)


@dataclass(frozen=True)
class LayerRow:
    """One summary line: layer name, kind, parameter count, per-sample shape."""

    name: str
    kind: str
    params: int
    output_shape: tuple[int, ...]


@dataclass(frozen=True)
class ModelSummary:
    branch_rows: tuple[LayerRow, ...]
    head_rows: tuple[LayerRow, ...]
    branch_multiplicity: int  # 2 for independent branches, 1 for shared
    total_params: int

    @property
    def rows(self) -> tuple[LayerRow, ...]:
        return self.branch_rows + self.head_rows

    def shape_chain(self) -> list[tuple[int, ...]]:
        """Output shapes in order, collapsing consecutive duplicates."""
        chain: list[tuple[int, ...]] = []
        for row in self.rows:
            if not chain or chain[-1] != row.output_shape:
                chain.append(row.output_shape)
        return chain


class PairModel:
    """A branch/head computation graph over protein pairs.

    ``branch_a`` and ``branch_b`` are the same list object when the branch is
    shared. ``build_config`` records the builder arguments so checkpoints can
    rebuild an identical graph.
    """

    def __init__(self, kind, branch_a, branch_b, head, max_len, alphabet_size, build_config):
        self.kind = kind
        self.branch_a: list[Layer] = branch_a
        self.branch_b: list[Layer] = branch_b
        self.head: list[Layer] = head
        self.max_len = max_len
        self.alphabet_size = alphabet_size
        self.build_config = dict(build_config)
        self._forward_state = None

    @property
    def shared_branch(self) -> bool:
        return self.branch_a is self.branch_b

    # -- parameters ---------------------------------------------------------

    def parameters(self) -> dict[str, Parameter]:
        """Named parameters, shared layers listed once."""
        out: dict[str, Parameter] = {}
        for layer in self._unique_layers():
            for p in layer.parameters():
                out[p.name] = p
        return out

    def state_arrays(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for layer in self._unique_layers():
            out.update(layer.state())
        return out

    def _unique_layers(self) -> list[Layer]:
        layers = list(self.branch_a)
        if not self.shared_branch:
            layers += self.branch_b
        layers += self.head
        return layers

    def zero_grads(self):
        for p in self.parameters().values():
            p.zero_grad()

    # -- forward / backward ---------------------------------------------------

    def _check_batch(self, x, side):
        expected = (self.max_len, self.alphabet_size)
        if x.ndim != 3 or x.shape[1:] != expected:
            raise ShapeMismatch(
                f"input {side}: expected (batch, {expected[0]}, {expected[1]}), got {x.shape}"
            )

    def _run_branch(self, layers, x, train):
        caches = []
        for layer in layers:
            x, cache = layer.forward(x, train)
            caches.append(cache)
        return x, caches

    def _backward_branch(self, layers, caches, grad):
        for layer, cache in zip(reversed(layers), reversed(caches)):
            grad = layer.backward(grad, cache)
        return grad

    def forward_pair(self, batch_a, batch_b, train=False) -> np.ndarray:
        """Probability of interaction for each pair in the batch: (batch, 1)."""
        batch_a = np.asarray(batch_a, dtype=np.float64)
        batch_b = np.asarray(batch_b, dtype=np.float64)
        self._check_batch(batch_a, "a")
        self._check_batch(batch_b, "b")
        if batch_a.shape[0] != batch_b.shape[0]:
            raise ShapeMismatch(
                f"batch sizes differ: {batch_a.shape[0]} vs {batch_b.shape[0]}"
            )
        out_a, caches_a = self._run_branch(self.branch_a, batch_a, train)
        out_b, caches_b = self._run_branch(self.branch_b, batch_b, train)
        joined = concat_pair(out_a, out_b)
        out, caches_head = self._run_branch(self.head, joined, train)
        if train:
            self._forward_state = (caches_a, caches_b, caches_head, out_a.shape[1])
        else:
            self._forward_state = None
        return out

    def backward_pair(self, loss_gradient: np.ndarray) -> None:
        """Backpropagate d(loss)/d(probabilities) into parameter gradients.

        Requires a preceding train-mode forward_pair on the same batch. For a
        shared branch, both inputs' contributions accumulate into the single
        parameter copy, branch a first.
        """
        if self._forward_state is None:
            raise NoForwardState("backward_pair requires a train-mode forward_pair first")
        caches_a, caches_b, caches_head, width_a = self._forward_state
        grad_joined = self._backward_branch(self.head, caches_head, loss_gradient)
        grad_a, grad_b = split_pair(grad_joined, width_a)
        self._backward_branch(self.branch_a, caches_a, grad_a)
        self._backward_branch(self.branch_b, caches_b, grad_b)
        self._forward_state = None


# --------------------------------------------------------------------------
# Builders
# --------------------------------------------------------------------------

def build_fc_model(
    max_len: int = MAX_SEQUENCE_LENGTH,
    alphabet_size: int = ALPHABET_SIZE,
    branch_units: int = 20,
    head_units: int = 20,
    seed: int = 0,
) -> PairModel:
    """Fully connected pair classifier with independent branches."""
    config = dict(
        kind=FC,
        max_len=max_len,
        alphabet_size=alphabet_size,
        branch_units=branch_units,
        head_units=head_units,
        seed=seed,
    )
    rng = np.random.Generator(np.random.PCG64(seed))
    flat = max_len * alphabet_size

    def make_branch(prefix):
        return [
            Flatten(f"{prefix}.flatten"),
            Dense(f"{prefix}.dense1", flat, branch_units, activation="relu", rng=rng),
            BatchNorm(f"{prefix}.bn1", branch_units),
            Dense(f"{prefix}.dense2", branch_units, branch_units, activation="relu", rng=rng),
            BatchNorm(f"{prefix}.bn2", branch_units),
        ]

    branch_a = make_branch("branch_a")
    branch_b = make_branch("branch_b")
    head = [
        Dense("head.dense1", 2 * branch_units, head_units, activation="relu", rng=rng),
        BatchNorm("head.bn1", head_units),
        Dense("head.dense2", head_units, 1, activation="sigmoid", rng=rng),
    ]
    return PairModel(FC, branch_a, branch_b, head, max_len, alphabet_size, config)


def build_recurrent_model(
    max_len: int = MAX_SEQUENCE_LENGTH,
    alphabet_size: int = ALPHABET_SIZE,
    conv_filters: int = 5,
    kernel_size: int = 20,
    pool_size: int = 3,
    conv_blocks: int = 3,
    lstm_units: int = 32,
    head_units: int = 25,
    seed: int = 0,
) -> PairModel:
    """Convolution+LSTM pair classifier with one branch shared by both inputs."""
    config = dict(
        kind=RECURRENT,
        max_len=max_len,
        alphabet_size=alphabet_size,
        conv_filters=conv_filters,
        kernel_size=kernel_size,
        pool_size=pool_size,
        conv_blocks=conv_blocks,
        lstm_units=lstm_units,
        head_units=head_units,
        seed=seed,
    )
    rng = np.random.Generator(np.random.PCG64(seed))
    branch: list[Layer] = []
    channels = alphabet_size
    length = max_len
    for i in range(1, conv_blocks + 1):
        conv = Conv1D(
            f"branch.conv{i}", channels, conv_filters, kernel_size, activation="relu", rng=rng
        )
        pool = MaxPool1D(f"branch.pool{i}", pool_size)
        norm = BatchNorm(f"branch.bn{i}", conv_filters)
        # output_shape also validates that the window still fits
        length, channels = pool.output_shape(conv.output_shape((length, channels)))
        branch += [conv, pool, norm]
    branch.append(LSTM("branch.lstm", channels, lstm_units, rng=rng))
    head = [
        Dense("head.dense1", 2 * lstm_units, head_units, activation="relu", rng=rng),
        BatchNorm("head.bn1", head_units),
        Dense("head.dense2", head_units, 1, activation="sigmoid", rng=rng),
    ]
    return PairModel(RECURRENT, branch, branch, head, max_len, alphabet_size, config)


def build_model(kind: str, **kwargs) -> PairModel:
    if kind == FC:
        return build_fc_model(**kwargs)
    if kind == RECURRENT:
        return build_recurrent_model(**kwargs)
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


# --------------------------------------------------------------------------
# Introspection
# --------------------------------------------------------------------------

def model_summary(model: PairModel) -> ModelSummary:
    """Per-layer parameter counts and output shapes, branch then head.

    Branch rows are listed once; ``branch_multiplicity`` says how many
    parameter copies exist (2 for independent branches, 1 for a shared one).
    The input row is included with zero parameters.
    """
    shape = (model.max_len, model.alphabet_size)
    branch_rows = [LayerRow("input", "input", 0, shape)]
    for layer in model.branch_a:
        shape = layer.output_shape(shape)
        branch_rows.append(LayerRow(layer.name, layer.kind, layer.param_count(), shape))

    multiplicity = 1 if model.shared_branch else 2
    width = shape[0]
    shape = (2 * width,)
    head_rows = [LayerRow("head.concat", "concat", 0, shape)]
    for layer in model.head:
        shape = layer.output_shape(shape)
        head_rows.append(LayerRow(layer.name, layer.kind, layer.param_count(), shape))

    total = multiplicity * sum(r.params for r in branch_rows) + sum(r.params for r in head_rows)
    return ModelSummary(tuple(branch_rows), tuple(head_rows), multiplicity, total)


def param_count(model: PairModel) -> int:
    """Total parameter count, shared layers counted once."""
    return model_summary(model).total_params
