import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sofafl.model import ModelSpec, evaluate, forward_loss_grad, init_params, sgd_epochs

from oracles import gradients_agree, numeric_gradient, reference_mlp_loss


def toy_batch(spec, n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, spec.input_dim)), rng.integers(0, spec.num_classes, n)


def test_param_count_by_hand():
    # 4->8: 4*8 + 8 ; 8->3: 8*3 + 3
    assert ModelSpec(4, (8,), 3).num_params == 40 + 27 == 67


def test_init_is_seeded():
    spec = ModelSpec(4, (8,), 3)
    np.testing.assert_array_equal(init_params(spec, 1), init_params(spec, 1))
    assert not np.array_equal(init_params(spec, 1), init_params(spec, 2))
    assert len(init_params(spec, 1)) == spec.num_params


def test_zero_network_loss_is_ln10():
    spec = ModelSpec(6, (5,), 10)
    X, y = toy_batch(spec, 7)
    loss, _, _ = forward_loss_grad(np.zeros(spec.num_params), spec, X, y)
    assert loss == pytest.approx(math.log(10), abs=1e-12)


def test_gradient_matches_finite_differences():
    spec = ModelSpec(4, (8,), 3)
    X, y = toy_batch(spec, 5)
    params = init_params(spec, 3) + np.random.default_rng(4).normal(0, 0.1, spec.num_params)
    _, _, grad = forward_loss_grad(params, spec, X, y)
    num = numeric_gradient(lambda p: reference_mlp_loss(p, [4, 8, 3], X, y), params)
    assert gradients_agree(grad, num)


def test_loss_agrees_with_reference_forward():
    spec = ModelSpec(5, (7, 4), 3)
    X, y = toy_batch(spec, 9)
    params = init_params(spec, 0)
    assert evaluate(params, spec, X, y)[0] == pytest.approx(reference_mlp_loss(params, [5, 7, 4, 3], X, y), rel=1e-12)


def test_duplicated_batch_leaves_loss_and_grad_unchanged():
    spec = ModelSpec(4, (8,), 3)
    X, y = toy_batch(spec, 6)
    params = init_params(spec, 0)
    l1, a1, g1 = forward_loss_grad(params, spec, X, y)
    l2, a2, g2 = forward_loss_grad(params, spec, np.vstack([X, X]), np.concatenate([y, y]))
    assert l1 == pytest.approx(l2, rel=1e-12) and a1 == a2
    np.testing.assert_allclose(g1, g2, rtol=1e-10, atol=1e-14)


def test_evaluate_matches_forward_loss():
    spec = ModelSpec(4, (8,), 3)
    X, y = toy_batch(spec, 10)
    params = init_params(spec, 0)
    assert evaluate(params, spec, X, y) == forward_loss_grad(params, spec, X, y)[:2]


def test_zero_epochs_is_identity():
    spec = ModelSpec(4, (8,), 3)
    X, y = toy_batch(spec, 10)
    params = init_params(spec, 0)
    np.testing.assert_array_equal(sgd_epochs(params, spec, X, y, lr=0.1, epochs=0), params)


def test_sgd_is_deterministic():
    spec = ModelSpec(4, (8,), 3)
    X, y = toy_batch(spec, 40)
    params = init_params(spec, 0)
    a = sgd_epochs(params, spec, X, y, lr=0.1, epochs=3, rng=5)
    b = sgd_epochs(params, spec, X, y, lr=0.1, epochs=3, rng=5)
    assert a.tobytes() == b.tobytes()


def test_sgd_reduces_loss_on_separable_toy():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-2, 0.5, (30, 2)), rng.normal(2, 0.5, (30, 2))])
    y = np.repeat([0, 1], 30)
    spec = ModelSpec(2, (8,), 2)
    params = init_params(spec, 0)
    trained = sgd_epochs(params, spec, X, y, lr=0.1, epochs=5)
    assert evaluate(trained, spec, X, y)[0] <= evaluate(params, spec, X, y)[0]
    assert evaluate(trained, spec, X, y)[1] == 1.0


def test_large_prox_pulls_toward_anchor():
    spec = ModelSpec(4, (8,), 3)
    X, y = toy_batch(spec, 32)
    params = init_params(spec, 0)
    anchor = init_params(spec, 9)
    free = sgd_epochs(params, spec, X, y, lr=0.05, epochs=3, rng=1)
    pulled = sgd_epochs(params, spec, X, y, lr=0.05, epochs=3, rng=1, prox=(10.0, anchor))
    assert np.linalg.norm(pulled - anchor) < np.linalg.norm(free - anchor)


def test_adversarial_labels_give_zero_accuracy():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-2, 0.5, (20, 2)), rng.normal(2, 0.5, (20, 2))])
    y = np.repeat([0, 1], 20)
    spec = ModelSpec(2, (8,), 2)
    params = sgd_epochs(init_params(spec, 0), spec, X, y, lr=0.1, epochs=10)
    assert evaluate(params, spec, X, 1 - y)[1] == 0.0


def test_bad_inputs_raise():
    spec = ModelSpec(4, (8,), 3)
    X, y = toy_batch(spec, 4)
    with pytest.raises(ValueError):
        sgd_epochs(init_params(spec, 0), spec, X, y, lr=0.0, epochs=1)
    with pytest.raises(ValueError):
        forward_loss_grad(np.zeros(3), spec, X, y)
    with pytest.raises(ValueError):
        ModelSpec(4, (8,), 1)


def test_diverging_sgd_raises():
    spec = ModelSpec(4, (8,), 3)
    X, y = toy_batch(spec, 16)
    with pytest.raises(FloatingPointError), np.errstate(all="ignore"):
        sgd_epochs(init_params(spec, 0), spec, X * 1e6, y, lr=1e6, epochs=20)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 5), st.lists(st.integers(1, 6), min_size=0, max_size=2), st.integers(2, 4),
       st.integers(1, 6), st.integers(0, 10**6))
def test_gradient_check_random_specs(input_dim, hidden, classes, n, seed):
    spec = ModelSpec(input_dim, tuple(hidden), classes)
    X, y = toy_batch(spec, n, seed)
    params = init_params(spec, seed)
    params += np.random.default_rng(seed + 1).normal(0, 0.1, spec.num_params)
    _, _, grad = forward_loss_grad(params, spec, X, y)
    num = numeric_gradient(lambda p: reference_mlp_loss(p, [input_dim, *hidden, classes], X, y), params)
    assert gradients_agree(grad, num)
