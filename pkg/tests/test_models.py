import numpy as np
import pytest

from ppikit.errors import InputTooShort, NoForwardState, ShapeMismatch
from ppikit.models import (
    build_fc_model,
    build_model,
    build_recurrent_model,
    model_summary,
    param_count,
)
from ppikit.nn.layers import split_pair
from ppikit.training import Adam, bce_loss

from helpers import numerical_gradient, rel_error

FC_PARAM_ROWS = [559_700, 80, 420, 80, 820, 80, 21]
RECURRENT_PARAM_ROWS = [2_405, 20, 505, 20, 505, 20, 4_864, 1_625, 100, 26]
RECURRENT_CHAIN = [
    (1166, 24), (1147, 5), (382, 5), (363, 5), (121, 5),
    (102, 5), (34, 5), (32,), (64,), (25,), (1,),
]


def tiny_recurrent(seed=0, max_len=12):
    return build_recurrent_model(
        max_len=max_len, conv_filters=2, kernel_size=3, pool_size=2,
        conv_blocks=1, lstm_units=3, head_units=4, seed=seed,
    )


def random_batch(model, batch=3, seed=0):
    rng = np.random.default_rng(seed)
    shape = (batch, model.max_len, model.alphabet_size)
    xa = np.zeros(shape)
    xb = np.zeros(shape)
    for x in (xa, xb):
        cols = rng.integers(0, model.alphabet_size, size=(batch, model.max_len))
        for i in range(batch):
            x[i, np.arange(model.max_len), cols[i]] = 1.0
    y = rng.integers(0, 2, size=(batch, 1)).astype(float)
    return xa, xb, y


# --- counts and shapes -------------------------------------------------------

def test_fc_total_parameter_count():
    assert param_count(build_fc_model()) == 1_121_481


def test_fc_per_layer_parameter_counts():
    summary = model_summary(build_fc_model())
    assert [r.params for r in summary.rows if r.params > 0] == FC_PARAM_ROWS
    assert summary.branch_multiplicity == 2


def test_recurrent_total_parameter_count():
    assert param_count(build_recurrent_model()) == 10_090


def test_recurrent_per_layer_parameter_counts():
    summary = model_summary(build_recurrent_model())
    assert [r.params for r in summary.rows if r.params > 0] == RECURRENT_PARAM_ROWS
    assert summary.branch_multiplicity == 1


def test_recurrent_shape_chain():
    assert model_summary(build_recurrent_model()).shape_chain() == RECURRENT_CHAIN


def test_fc_shape_chain():
    chain = model_summary(build_fc_model()).shape_chain()
    assert chain == [(1166, 24), (27_984,), (20,), (40,), (20,), (1,)]


def test_empty_graph_would_count_zero():
    model = tiny_recurrent()
    model.branch_a.clear()
    model.head.clear()
    assert param_count(model) == 0


def test_recurrent_build_rejects_too_short_input():
    with pytest.raises(InputTooShort):
        build_recurrent_model(max_len=64)  # default geometry needs far more


# --- forward ----------------------------------------------------------------

def test_forward_outputs_are_probabilities():
    model = tiny_recurrent()
    xa, xb, _ = random_batch(model, batch=5)
    out = model.forward_pair(xa, xb, train=True)
    assert out.shape == (5, 1)
    assert np.all((out > 0) & (out < 1))


def test_forward_zeroed_head_gives_half():
    model = tiny_recurrent()
    final = model.head[-1]
    final.weight.value[:] = 0.0
    final.bias.value[:] = 0.0
    xa, xb, _ = random_batch(model, batch=2)
    out = model.forward_pair(xa, xb, train=True)
    np.testing.assert_allclose(out, 0.5)


def test_infer_mode_is_deterministic():
    model = tiny_recurrent()
    xa, xb, _ = random_batch(model, batch=4)
    model.forward_pair(xa, xb, train=True)  # populate batch-norm statistics
    first = model.forward_pair(xa, xb, train=False)
    second = model.forward_pair(xa, xb, train=False)
    np.testing.assert_array_equal(first, second)


def test_recurrent_branch_is_one_object():
    model = build_recurrent_model(
        max_len=30, conv_filters=2, kernel_size=3, pool_size=2,
        conv_blocks=1, lstm_units=3, head_units=4,
    )
    assert model.branch_a is model.branch_b
    xa, _, _ = random_batch(model, batch=3)
    out_a, _ = model._run_branch(model.branch_a, xa, train=True)
    out_b, _ = model._run_branch(model.branch_b, xa, train=True)
    np.testing.assert_array_equal(out_a, out_b)


def test_fc_branches_are_independent():
    model = build_fc_model(max_len=8, branch_units=3, head_units=3)
    names = set(model.parameters())
    assert any(n.startswith("branch_a.") for n in names)
    assert any(n.startswith("branch_b.") for n in names)


def test_forward_shape_mismatch():
    model = tiny_recurrent()
    with pytest.raises(ShapeMismatch):
        model.forward_pair(np.zeros((2, 5, 24)), np.zeros((2, 5, 24)))
    xa, xb, _ = random_batch(model)
    with pytest.raises(ShapeMismatch):
        model.forward_pair(xa, xb[:1])


# --- backward ------------------------------------------------------------------

def test_backward_requires_train_forward():
    model = tiny_recurrent()
    xa, xb, _ = random_batch(model)
    with pytest.raises(NoForwardState):
        model.backward_pair(np.ones((3, 1)))
    model.forward_pair(xa, xb, train=True)  # set statistics
    model.forward_pair(xa, xb, train=False)
    with pytest.raises(NoForwardState):
        model.backward_pair(np.ones((3, 1)))


def test_shared_gradient_is_twice_single_branch():
    # identical inputs, and a head whose two halves weigh the branches
    # equally, make both contributions equal; accumulation adds them.
    model = tiny_recurrent(seed=3)
    head_in = model.head[0]
    units = head_in.n_in // 2
    head_in.weight.value[units:] = head_in.weight.value[:units]
    xa, _, y = random_batch(model, batch=4, seed=5)

    out = model.forward_pair(xa, xa, train=True)
    _, grad = bce_loss(out, y)
    caches_a, caches_b, caches_head, width = model._forward_state
    grad_joined = model._backward_branch(model.head, caches_head, grad)
    grad_a, grad_b = split_pair(grad_joined, width)
    np.testing.assert_allclose(grad_a, grad_b)

    model.zero_grads()
    model._backward_branch(model.branch_a, caches_a, grad_a)
    single = {p.name: p.grad.copy() for layer in model.branch_a for p in layer.parameters()}

    model.zero_grads()
    model.forward_pair(xa, xa, train=True)
    model.backward_pair(grad)
    for layer in model.branch_a:
        for p in layer.parameters():
            np.testing.assert_allclose(p.grad, 2.0 * single[p.name], rtol=1e-10, atol=1e-12)


def test_gradients_are_finite_on_random_batch():
    for model in (tiny_recurrent(seed=1), build_fc_model(max_len=10, seed=1)):
        xa, xb, y = random_batch(model, batch=6, seed=2)
        out = model.forward_pair(xa, xb, train=True)
        _, grad = bce_loss(out, y)
        model.zero_grads()
        model.backward_pair(grad)
        for p in model.parameters().values():
            assert np.all(np.isfinite(p.grad)), p.name


def check_model_gradients(model, batch=3, seed=0, samples_per_tensor=4, tol=1e-4):
    """End-to-end finite-difference check on a sample of parameter entries."""
    xa, xb, y = random_batch(model, batch=batch, seed=seed)

    def loss_value():
        out = model.forward_pair(xa, xb, train=True)
        loss, _ = bce_loss(out, y)
        return loss

    out = model.forward_pair(xa, xb, train=True)
    _, grad = bce_loss(out, y)
    model.zero_grads()
    model.backward_pair(grad)

    rng = np.random.default_rng(seed + 1)
    for name, p in model.parameters().items():
        if not p.trainable:
            continue
        flat = p.value.reshape(-1)
        analytic = p.grad.reshape(-1)
        picks = rng.choice(flat.size, size=min(samples_per_tensor, flat.size), replace=False)
        h = 1e-6
        for i in picks:
            orig = flat[i]
            flat[i] = orig + h
            up = loss_value()
            flat[i] = orig - h
            down = loss_value()
            flat[i] = orig
            numeric = (up - down) / (2 * h)
            scale = max(abs(numeric), abs(analytic[i]), 1e-4)
            assert abs(numeric - analytic[i]) / scale < tol, f"{name}[{i}]"


def test_end_to_end_gradients_toy_recurrent():
    check_model_gradients(tiny_recurrent(seed=7, max_len=6), batch=3, seed=7)


def test_end_to_end_gradients_toy_fc():
    check_model_gradients(build_fc_model(max_len=6, branch_units=4, head_units=3, seed=9), seed=9)


def test_fc_branches_diverge_on_asymmetric_data():
    model = build_fc_model(max_len=8, branch_units=4, head_units=3, seed=0)
    xa, xb, y = random_batch(model, batch=6, seed=11)
    optimizer = Adam(list(model.parameters().values()))
    out = model.forward_pair(xa, xb, train=True)
    _, grad = bce_loss(out, y)
    model.zero_grads()
    model.backward_pair(grad)
    optimizer.step(0.01)
    w_a = model.parameters()["branch_a.dense1.weight"].value
    w_b = model.parameters()["branch_b.dense1.weight"].value
    assert not np.allclose(w_a, w_b)


def test_recurrent_branch_parameters_stay_identical_after_step():
    model = tiny_recurrent(seed=2)
    xa, xb, y = random_batch(model, batch=4, seed=3)
    optimizer = Adam(list(model.parameters().values()))
    for _ in range(3):
        out = model.forward_pair(xa, xb, train=True)
        _, grad = bce_loss(out, y)
        model.zero_grads()
        model.backward_pair(grad)
        optimizer.step(0.01)
    sums_a = [float(p.value.sum()) for layer in model.branch_a for p in layer.parameters()]
    sums_b = [float(p.value.sum()) for layer in model.branch_b for p in layer.parameters()]
    assert sums_a == sums_b  # same objects, one parameter copy


def test_build_model_dispatch():
    assert build_model("fc", max_len=8).kind == "fc"
    with pytest.raises(ValueError):
        build_model("perceptron")
