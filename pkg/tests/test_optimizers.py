import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greedylore.optimizers import AdamState, MsgdState, adam_step, learning_rate, make_optimizer, msgd_step


def test_msgd_plain_sgd():
    x, g = np.array([[1.0, 2.0]]), np.array([[0.5, -1.0]])
    np.testing.assert_array_equal(msgd_step(x, g, MsgdState(gamma=0.1, beta=0.0)), x - 0.1 * g)


def test_msgd_one_step():
    s = MsgdState(gamma=1.0, beta=0.9)
    x = msgd_step(np.array([[0.0]]), np.array([[1.0]]), s)
    np.testing.assert_allclose(s.m, [[0.1]])
    np.testing.assert_allclose(x, [[-0.1]])


def test_msgd_zero_input_decays():
    s = MsgdState(gamma=0.5, beta=0.5, m=np.array([[4.0]]))
    x = np.array([[0.0]])
    for t in range(1, 6):
        x_new = msgd_step(x, np.zeros((1, 1)), s)
        np.testing.assert_allclose(s.m, [[4.0 * 0.5**t]])
        np.testing.assert_allclose(x - x_new, [[0.5 * 4.0 * 0.5**t]])
        x = x_new


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(-8, 8).filter(lambda c: abs(c) > 1e-3), st.floats(0, 0.99))
def test_msgd_scale_relation(seed, c, beta):
    rng = np.random.default_rng(seed)
    grads = [rng.standard_normal((2, 3)) for _ in range(20)]
    x0 = rng.standard_normal((2, 3))
    s1, s2 = MsgdState(0.1, beta), MsgdState(0.1, beta)
    x1, x2 = x0.copy(), x0.copy()
    for g in grads:
        x1 = msgd_step(x1, g, s1)
        x2 = msgd_step(x2, c * g, s2)
        np.testing.assert_allclose(s2.m, c * s1.m, atol=1e-12 * max(1, abs(c)))
        np.testing.assert_allclose(x2 - x0, c * (x1 - x0), atol=1e-12 * max(1, abs(c)))


def test_adam_hand_value():
    s = AdamState(gamma=1.0, beta1=0.9, beta2=0.99, epsilon=1e-8)
    x = adam_step(np.array([[0.0]]), np.array([[1.0]]), s)
    np.testing.assert_allclose(s.m, [[0.1]])
    np.testing.assert_allclose(s.v, [[0.01]])
    assert x[0, 0] == pytest.approx(-0.1 / (0.1 + 1e-8), rel=1e-15)
    assert x[0, 0] == pytest.approx(-0.99999990, abs=1e-8)


def test_adam_sign_limit():
    s = AdamState(gamma=0.3, beta1=0.0, beta2=0.0, epsilon=1e-300)
    g = np.array([[2.0, -0.5], [1e-3, -7.0]])
    np.testing.assert_allclose(adam_step(np.zeros((2, 2)), g, s), -0.3 * np.sign(g))


def test_adam_zero_gradient():
    for mode in ("practical", "amsgrad"):
        s = AdamState(gamma=1.0, mode=mode)
        x = np.ones((2, 2))
        np.testing.assert_array_equal(adam_step(x, np.zeros((2, 2)), s), x)
        assert not np.any(s.m) and not np.any(s.v)


def test_amsgrad_scalar_normalizer():
    s = AdamState(gamma=1.0, beta1=0.0, beta2=0.0, epsilon=0.0 + 1e-12, mode="amsgrad")
    g = np.array([[3.0, -1.0]])
    x = adam_step(np.zeros((1, 2)), g, s)
    # v = g^2, v_tilde = 9, normalizer 1/3 for every entry
    np.testing.assert_allclose(x, -g / 3.0, rtol=1e-10)
    x = adam_step(x, np.array([[1.0, 1.0]]), s)
    assert s.v_tilde == 9.0
    assert s.normalizers[1] == s.normalizers[0]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_amsgrad_monotone(seed):
    rng = np.random.default_rng(seed)
    s = AdamState(gamma=0.01, mode="amsgrad")
    x = np.zeros((3, 3))
    scales = rng.exponential(size=60)
    for c in scales:
        x = adam_step(x, c * rng.standard_normal((3, 3)), s)
    assert np.all(np.diff(s.normalizers) <= 0)
    assert s.v_tilde >= np.max(s.v)


def test_deterministic():
    rng = np.random.default_rng(1)
    grads = [rng.standard_normal((2, 2)) for _ in range(10)]
    outs = []
    for _ in range(2):
        s = AdamState(0.01)
        x = np.zeros((2, 2))
        for g in grads:
            x = s.step(x, g)
        outs.append(x.tobytes())
    assert outs[0] == outs[1]


def test_validation_and_shapes():
    with pytest.raises(ValueError):
        MsgdState(gamma=0.1, beta=1.0)
    with pytest.raises(ValueError):
        AdamState(gamma=0.1, mode="adamw")
    with pytest.raises(ValueError):
        msgd_step(np.zeros((2, 2)), np.zeros((2, 3)), MsgdState(0.1))
    with pytest.raises(ValueError):
        make_optimizer("lion", gamma=0.1)
    assert isinstance(make_optimizer("adam", gamma=0.1, mode="amsgrad"), AdamState)


def test_learning_rate_schedule():
    assert learning_rate(0.2, "constant", 7, 10) == 0.2
    assert learning_rate(0.2, "linear", 5, 10) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        learning_rate(0.2, "cosine", 0, 10)
