import math

import numpy as np
import pytest

from apps.numcore import ops
from apps.numcore.gradcheck import check_gradients, relative_error
from apps.numcore.optim import OptimState, adagrad_update, clip_global_norm, global_norm
from apps.numcore.params import ModelParams, lstm_specs
from apps.numcore.recurrent import LSTMWeights, lstm_cell_step
from apps.numcore.tensor import Tape, backprop_tape, constant, parameter
from shared.errors import GradientCheckError, NumericError, ShapeError


def test_matmul_identity_and_projection():
    m = constant([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(ops.matmul(constant(np.eye(2)), m).values, m.values)
    out = ops.matmul(constant([[1.0, 0.0], [0.0, 0.0]]), constant([[5.0], [7.0]]))
    np.testing.assert_array_equal(out.values, [[5.0], [0.0]])


def test_matmul_shape_mismatch_reports_both_shapes():
    with pytest.raises(ShapeError, match=r"\(3, 4\).*\(3, 2\)"):
        ops.matmul(constant(np.ones((3, 4))), constant(np.ones((3, 2))))


def test_matmul_gradient_of_sum(rng):
    a = parameter(rng.normal(size=(3, 4)), name="a")
    b = parameter(rng.normal(size=(4, 2)), name="b")
    with Tape() as tape:
        loss = ops.reduce_sum(ops.matmul(a, b))
    backprop_tape(tape, loss)
    np.testing.assert_allclose(a.grad, np.ones((3, 2)) @ b.values.T, rtol=1e-12)

    report = check_gradients(lambda: ops.reduce_sum(ops.matmul(a, b)), {"a": a, "b": b}, tolerance=1e-6)
    assert report.passed, report.to_table()


def test_activations():
    assert ops.sigmoid(constant(0.0)).item() == 0.5
    assert ops.tanh(constant(0.0)).item() == 0.0
    total = ops.sigmoid(constant(3.7)).item() + ops.sigmoid(constant(-3.7)).item()
    assert abs(total - 1.0) < 1e-12
    assert ops.activation_apply(constant([1000.0]), "sigmoid").values[0] <= 1.0
    with pytest.raises(ValueError):
        ops.activation_apply(constant(0.0), "relu")


def test_softmax_rows():
    np.testing.assert_allclose(ops.softmax_rows(constant([[2.0, 2.0, 2.0]])).values, [[1 / 3] * 3])
    np.testing.assert_array_equal(ops.softmax_rows(constant([[0.0, -np.inf]])).values, [[1.0, 0.0]])
    x = [1.0, 2.0, 3.0]
    expected = [math.exp(v) / sum(math.exp(u) for u in x) for v in x]
    np.testing.assert_allclose(ops.softmax_rows(constant([x])).values[0], expected, atol=1e-12)


def test_softmax_fully_masked_row_rejected():
    with pytest.raises(NumericError):
        ops.softmax_rows(constant([[1.0, 2.0], [-np.inf, -np.inf]]))
    with pytest.raises(NumericError):
        ops.softmax(constant([1.0, 2.0]), mask=np.array([False, False]))


def test_backprop_linear_and_quadratic():
    x = parameter(np.arange(6.0).reshape(2, 3))
    with Tape() as tape:
        loss = ops.reduce_sum(x)
    backprop_tape(tape, loss)
    np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    y = parameter([1.0, -2.0, 3.0])
    with Tape() as tape:
        loss = ops.reduce_sum(ops.mul(y, y))
    backprop_tape(tape, loss)
    np.testing.assert_array_equal(y.grad, [2.0, -4.0, 6.0])


def test_backprop_rejects_vector_loss():
    x = parameter([1.0, 2.0])
    with Tape() as tape:
        out = ops.scale(x, 2.0)
    with pytest.raises(ShapeError):
        backprop_tape(tape, out)


def test_unused_leaf_gets_zero_grad():
    x = parameter([1.0, 2.0])
    unused = parameter([5.0])
    with Tape() as tape:
        loss = ops.reduce_sum(ops.add(ops.mul(x, x), ops.scale(unused, 0.0)))
    backprop_tape(tape, loss)
    np.testing.assert_array_equal(unused.grad, [0.0])


def _cell(rng, d_in=3, d_h=4):
    params = ModelParams.initialize(lstm_specs("cell", d_in, d_h), seed=3, scale=0.5)
    return params, params.lstm("cell")


def test_lstm_zero_weights_give_zero_h(rng):
    weights = LSTMWeights(constant(np.zeros((7, 16))), constant(np.zeros(16)))
    h, _ = lstm_cell_step(constant(rng.normal(size=3)), constant(np.zeros(4)), constant(np.zeros(4)), weights)
    np.testing.assert_array_equal(h.values, np.zeros(4))


def test_lstm_shape_mismatch(rng):
    _, weights = _cell(rng)
    with pytest.raises(ShapeError):
        lstm_cell_step(constant(np.zeros(5)), constant(np.zeros(4)), constant(np.zeros(4)), weights)


def test_lstm_iteration_converges(rng):
    _, weights = _cell(rng)
    x = constant(rng.normal(size=3))
    h, c = constant(np.zeros(4)), constant(np.zeros(4))
    deltas = []
    for _ in range(50):
        h_next, c = lstm_cell_step(x, h, c, weights)
        deltas.append(float(np.linalg.norm(h_next.values - h.values)))
        h = h_next
    assert np.all(np.abs(h.values) < 1.0)
    assert deltas[-1] < deltas[0]
    assert deltas[-1] < 1e-3


def test_lstm_gradients_match_central_differences(rng):
    params, weights = _cell(rng)
    x = constant(rng.normal(size=3))
    h0, c0 = constant(rng.normal(size=4) * 0.1), constant(rng.normal(size=4) * 0.1)

    def forward():
        h, c = lstm_cell_step(x, h0, c0, weights)
        h, c = lstm_cell_step(x, h, c, weights)
        return ops.reduce_sum(ops.add(ops.mul(h, h), c))

    report = check_gradients(forward, dict(params.items()), tolerance=1e-5)
    assert report.passed, report.to_table()


def test_check_gradients_linear_square_loss(rng):
    W = parameter(rng.normal(size=(3, 2)))
    x = constant(rng.normal(size=3))
    target = constant(rng.normal(size=2))

    def forward():
        diff = ops.sub(ops.matmul(x, W), target)
        return ops.reduce_sum(ops.mul(diff, diff))

    report = check_gradients(forward, {"W": W}, tolerance=1e-9)
    assert report.passed
    assert report.max_rel_err < 1e-9


def test_check_gradients_rejects_zero_eps_and_nondeterminism(rng):
    W = parameter([1.0])
    with pytest.raises(GradientCheckError):
        check_gradients(lambda: ops.reduce_sum(W), {"W": W}, eps=0.0)

    draws = iter(range(100))
    with pytest.raises(GradientCheckError):
        check_gradients(lambda: ops.reduce_sum(ops.scale(W, float(next(draws)))), {"W": W})


def test_relative_error_discounts_rounding_noise():
    assert relative_error(1e-6, 1e-6 + 1e-9, abs_floor=1e-5) == pytest.approx(1e-4)
    assert relative_error(1e-6, 1e-6 + 1e-9, abs_floor=1e-5, noise=2e-9) == 0.0
    assert relative_error(1.0, 2.0, abs_floor=1e-5, noise=0.5) == pytest.approx(0.5 / 3.0)


def test_check_gradients_flags_missing_tape_path(rng):
    W = parameter(rng.normal(size=4) + 2.0)

    def forward():
        # the second factor is a constant copy, so the tape sees half the gradient
        return ops.reduce_sum(ops.mul(W, constant(W.values.copy())))

    report = check_gradients(forward, {"W": W})
    assert not report.passed
    assert report.failures()[0].max_rel_err == pytest.approx(1.0 / 3.0, rel=1e-3)


def test_check_gradients_scales_step_with_large_entries():
    W = parameter([1500.0, -2500.0, 0.25])

    def forward():
        return ops.reduce_sum(ops.mul(W, W))

    report = check_gradients(forward, {"W": W}, tolerance=1e-8)
    assert report.passed, report.to_table()


def test_adagrad_scalar_reference():
    p = parameter([0.0])
    opt = OptimState.for_params({"p": p}, learning_rate=0.15, acc_init=0.1)
    adagrad_update({"p": p}, {"p": np.array([1.0])}, opt)
    assert opt.accumulators["p"][0] == pytest.approx(1.1)
    assert p.values[0] == pytest.approx(-0.15 / math.sqrt(1.1))
    assert p.values[0] == pytest.approx(-0.143019, abs=1e-6)


def test_adagrad_zero_gradient_is_a_no_op():
    p = parameter([0.5, -0.5])
    opt = OptimState.for_params({"p": p})
    adagrad_update({"p": p}, {"p": np.zeros(2)}, opt)
    np.testing.assert_array_equal(p.values, [0.5, -0.5])
    np.testing.assert_array_equal(opt.accumulators["p"], [0.1, 0.1])


def test_adagrad_second_step_is_smaller():
    p = parameter([0.0])
    opt = OptimState.for_params({"p": p})
    g = {"p": np.array([0.7])}
    adagrad_update({"p": p}, g, opt)
    first = p.values[0]
    before = opt.accumulators["p"].copy()
    adagrad_update({"p": p}, g, opt)
    assert abs(p.values[0] - first) < abs(first)
    assert np.all(opt.accumulators["p"] >= before)


def test_adagrad_shape_mismatch():
    p = parameter([0.0, 0.0])
    with pytest.raises(ShapeError):
        adagrad_update({"p": p}, {"p": np.zeros(3)}, OptimState.for_params({"p": p}))


def test_clip_global_norm():
    clipped, norm = clip_global_norm({"g": np.array([3.0, 4.0])}, 2.0)
    assert norm == 5.0
    np.testing.assert_allclose(clipped["g"], [1.2, 1.6])

    small = {"g": np.array([0.6, 0.8])}
    unchanged, _ = clip_global_norm(small, 2.0)
    np.testing.assert_array_equal(unchanged["g"], small["g"])


def test_clip_global_norm_bound_and_idempotence(rng):
    grads = {"a": rng.normal(size=(3, 3)) * 4, "b": rng.normal(size=5)}
    once, norm = clip_global_norm(grads, 2.0)
    assert global_norm(once) == pytest.approx(min(norm, 2.0), abs=1e-9)
    twice, _ = clip_global_norm(once, 2.0)
    for name in grads:
        np.testing.assert_allclose(twice[name], once[name], atol=1e-12)
