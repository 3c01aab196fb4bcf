import numpy as np

from transms.adam import AdamState, adam_step, halved_lr
from transms.autodiff import Tensor


def test_zero_gradient_leaves_params_unchanged():
    p = {"w": Tensor(np.array([1.0, -2.0]), requires_grad=True)}
    state = AdamState(lr=0.1)
    adam_step(p, {"w": np.zeros(2)}, state)
    adam_step(p, {"w": None}, state)  # disconnected: also zero
    np.testing.assert_array_equal(p["w"].data, [1.0, -2.0])
    assert state.step == 2


def test_constant_gradient_moves_against_sign():
    p = {"w": Tensor(np.array([0.0]), requires_grad=True)}
    state = AdamState(lr=0.01)
    for _ in range(50):
        adam_step(p, {"w": np.array([2.5])}, state)
    assert p["w"].data[0] < 0.0

    q = {"w": Tensor(np.array([0.0]), requires_grad=True)}
    state2 = AdamState(lr=0.01)
    for _ in range(50):
        adam_step(q, {"w": np.array([-2.5])}, state2)
    assert q["w"].data[0] > 0.0


def test_single_step_matches_hand_formula():
    # g=1, lr=0.1, beta1=0.9, beta2=0.999:
    # m=0.1, v=0.001, mhat=1, vhat=1 -> update = -0.1 * 1/(1+eps)
    p = {"w": Tensor(np.array([0.5]), requires_grad=True)}
    state = AdamState(lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
    adam_step(p, {"w": np.array([1.0])}, state)
    expected = 0.5 - 0.1 * (1.0 / (1.0 + 1e-8))
    np.testing.assert_allclose(p["w"].data, [expected], rtol=0, atol=1e-15)


def test_moment_shapes_follow_params():
    p = {"w": Tensor(np.zeros((3, 4)), requires_grad=True)}
    state = AdamState()
    adam_step(p, {"w": np.ones((3, 4))}, state)
    assert state.m["w"].shape == (3, 4)
    assert state.v["w"].shape == (3, 4)


def test_halved_lr_schedule():
    # 100 epochs -> halving every 20
    assert halved_lr(1.0, 0, 100) == 1.0
    assert halved_lr(1.0, 19, 100) == 1.0
    assert halved_lr(1.0, 20, 100) == 0.5
    assert halved_lr(1.0, 40, 100) == 0.25
    assert halved_lr(1.0, 99, 100) == 1.0 / 16.0
