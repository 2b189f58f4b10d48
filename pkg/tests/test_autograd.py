"""Gradient and value checks for every graph op, alone and composed."""
import numpy as np
import pytest

import hatedetect.autograd as ag


def node(rng, *shape):
    return ag.Node(rng.standard_normal(shape))


# ---------------------------------------------------------------------------
# elementwise and structural ops
# ---------------------------------------------------------------------------


def test_add_requires_matching_shapes(rng):
    with pytest.raises(ValueError):
        ag.add(node(rng, 3), node(rng, 4))


def test_mul_requires_matching_shapes(rng):
    with pytest.raises(ValueError):
        ag.mul(node(rng, 2, 3), node(rng, 3, 2))


def test_add_grads(rng):
    a, b = node(rng, 5), node(rng, 5)
    from conftest import fd_check
    fd_check(lambda: ag.sum_all(ag.mul(ag.add(a, b), ag.add(a, b))), [a, b], rng)


def test_sub_value(rng):
    a, b = node(rng, 4), node(rng, 4)
    np.testing.assert_allclose(ag.sub(a, b).data, a.data - b.data)


def test_mul_grads(rng):
    a, b = node(rng, 6), node(rng, 6)
    from conftest import fd_check
    fd_check(lambda: ag.sum_all(ag.mul(a, b)), [a, b], rng)


def test_scale_grads(rng):
    a = node(rng, 7)
    from conftest import fd_check
    fd_check(lambda: ag.sum_all(ag.scale(a, -2.5)), [a], rng)


def test_nsum_grads(rng):
    xs = [node(rng, 3) for _ in range(4)]
    from conftest import fd_check
    fd_check(lambda: ag.sum_all(ag.mul(ag.nsum(xs), ag.nsum(xs))), xs, rng)


def test_concat_order_and_grads(rng):
    a, b = node(rng, 2), node(rng, 3)
    out = ag.concat([a, b])
    np.testing.assert_array_equal(out.data, np.concatenate([a.data, b.data]))
    from conftest import fd_check
    fd_check(lambda: ag.sum_all(ag.mul(ag.concat([a, b]), ag.concat([a, b]))),
             [a, b], rng)


def test_reshape_grads(rng):
    a = node(rng, 6)
    from conftest import fd_check
    fd_check(lambda: ag.sum_all(ag.mul(ag.reshape(a, (2, 3)), ag.reshape(a, (2, 3)))),
             [a], rng)


def test_take_row_value_and_grads(rng):
    a = node(rng, 4, 3)
    out = ag.take_row(a, 2)
    np.testing.assert_array_equal(out.data, a.data[2])
    from conftest import fd_check
    fd_check(lambda: ag.sum_all(ag.mul(ag.take_row(a, 2), ag.take_row(a, 2))),
             [a], rng)


def test_take_row_rejects_1d(rng):
    with pytest.raises(ValueError):
        ag.take_row(node(rng, 4), 0)


def test_gather_grads(rng):
    a = node(rng, 5)
    from conftest import fd_check
    fd_check(lambda: ag.mul(ag.gather(a, 3), ag.gather(a, 3)), [a], rng)


def test_sigmoid_tanh_log_grads(rng):
    a = node(rng, 8)
    from conftest import fd_check
    fd_check(lambda: ag.sum_all(ag.sigmoid(a)), [a], rng)
    fd_check(lambda: ag.sum_all(ag.tanh(a)), [a], rng)
    p = ag.Node(rng.uniform(0.1, 2.0, size=6))
    fd_check(lambda: ag.sum_all(ag.log(p)), [p], rng)


def test_softmax_normalizes_and_grads(rng):
    a = node(rng, 5)
    out = ag.softmax(a)
    assert abs(float(out.data.sum()) - 1.0) < 1e-12
    from conftest import fd_check
    fd_check(lambda: ag.gather(ag.softmax(a), 1), [a], rng)


def test_matmul_grads(rng):
    a, b = node(rng, 3, 4), node(rng, 4, 2)
    from conftest import fd_check
    fd_check(lambda: ag.sum_all(ag.mul(ag.matmul(a, b), ag.matmul(a, b))),
             [a, b], rng)


def test_linear_1d_and_2d_grads(rng):
    w, b = node(rng, 3, 5), node(rng, 3)
    x1 = node(rng, 5)
    x2 = node(rng, 4, 5)
    from conftest import fd_check
    fd_check(lambda: ag.sum_all(ag.linear(x1, w, b)), [x1, w, b], rng)
    fd_check(lambda: ag.sum_all(ag.linear(x2, w, b)), [x2, w, b], rng)


def test_cross_entropy_matches_closed_form(rng):
    p = ag.softmax(node(rng, 2))
    loss = ag.cross_entropy(p, 1)
    assert abs(float(loss.data) - (-np.log(p.data[1]))) < 1e-12


def test_cross_entropy_grads(rng):
    a = node(rng, 2)
    from conftest import fd_check
    fd_check(lambda: ag.cross_entropy(ag.softmax(a), 0), [a], rng)


def test_cross_entropy_clamps_zero_probability():
    p = ag.Node(np.array([1.0, 0.0]))
    loss = ag.cross_entropy(p, 1)
    assert np.isfinite(loss.data)
    assert abs(float(loss.data) + np.log(ag.CE_CLAMP)) < 1e-9


# ---------------------------------------------------------------------------
# lstm cells
# ---------------------------------------------------------------------------


def lstm_params(rng, d_in, hidden):
    w_ih = node(rng, 4 * hidden, d_in)
    w_hh = node(rng, 4 * hidden, hidden)
    b = node(rng, 4 * hidden)
    return w_ih, w_hh, b


def test_lstm_cell_grads(rng):
    w_ih, w_hh, b = lstm_params(rng, 3, 4)
    x, h, c = node(rng, 3), node(rng, 4), node(rng, 4)

    def build():
        h1, c1 = ag.lstm_cell(x, h, c, w_ih, w_hh, b)
        h2, c2 = ag.lstm_cell(x, h1, c1, w_ih, w_hh, b)
        return ag.sum_all(ag.mul(h2, c2))

    from conftest import fd_check
    fd_check(build, [x, h, c, w_ih, w_hh, b], rng, n_coords=3)


def test_lstm_cell_batch_matches_single(rng):
    w_ih, w_hh, b = lstm_params(rng, 3, 4)
    xb, hb, cb = node(rng, 5, 3), node(rng, 5, 4), node(rng, 5, 4)
    hn, cn = ag.lstm_cell_batch(xb, hb, cb, w_ih, w_hh, b, np.ones(5))
    for i in range(5):
        hi, ci = ag.lstm_cell(ag.Node(xb.data[i]), ag.Node(hb.data[i]),
                              ag.Node(cb.data[i]), w_ih, w_hh, b)
        np.testing.assert_allclose(hn.data[i], hi.data, rtol=0, atol=1e-14)
        np.testing.assert_allclose(cn.data[i], ci.data, rtol=0, atol=1e-14)


def test_lstm_cell_batch_mask_passthrough_exact(rng):
    w_ih, w_hh, b = lstm_params(rng, 3, 4)
    xb, hb, cb = node(rng, 4, 3), node(rng, 4, 4), node(rng, 4, 4)
    mask = np.array([1.0, 0.0, 1.0, 0.0])
    hn, cn = ag.lstm_cell_batch(xb, hb, cb, w_ih, w_hh, b, mask)
    np.testing.assert_array_equal(hn.data[1], hb.data[1])
    np.testing.assert_array_equal(cn.data[3], cb.data[3])


def test_lstm_cell_batch_grads(rng):
    w_ih, w_hh, b = lstm_params(rng, 3, 4)
    xb, hb, cb = node(rng, 4, 3), node(rng, 4, 4), node(rng, 4, 4)
    mask = np.array([1.0, 1.0, 0.0, 1.0])

    def build():
        h1, c1 = ag.lstm_cell_batch(xb, hb, cb, w_ih, w_hh, b, mask)
        h2, c2 = ag.lstm_cell_batch(xb, h1, c1, w_ih, w_hh, b, mask)
        return ag.sum_all(ag.mul(h2, c2))

    from conftest import fd_check
    fd_check(build, [xb, hb, cb, w_ih, w_hh, b], rng, n_coords=3)


# ---------------------------------------------------------------------------
# composition, accumulation, faults
# ---------------------------------------------------------------------------


def test_grad_accumulates_across_reuse(rng):
    a = node(rng, 3)
    loss = ag.sum_all(ag.add(ag.mul(a, a), ag.scale(a, 2.0)))
    ag.backward(loss)
    np.testing.assert_allclose(a.grad, 2.0 * a.data + 2.0)


def test_backward_requires_scalar(rng):
    with pytest.raises(ValueError):
        ag.backward(node(rng, 3))


def test_constants_are_left_alone(rng):
    a = node(rng, 4)
    const = rng.standard_normal(4)
    loss = ag.sum_all(ag.mul(a, const))
    ag.backward(loss)
    np.testing.assert_allclose(a.grad, const)


def test_nonfinite_forward_raises():
    big = ag.Node(np.array([1e308, 1e308]))
    with pytest.raises(ag.NumericalFault):
        ag.matmul(ag.reshape(big, (1, 2)), ag.reshape(big, (2, 1)))
    with pytest.raises(ag.NumericalFault):
        ag.log(ag.Node(np.array([0.5, -1.0])))


def test_deep_chain_no_recursion_limit(rng):
    x = node(rng, 2)
    out = x
    for _ in range(5000):
        out = ag.scale(out, 1.0)
    ag.backward(ag.sum_all(out))
    np.testing.assert_allclose(x.grad, np.ones(2))


def test_full_composite_many_seeds():
    """Randomized end-to-end graphs: linear -> lstm steps -> softmax -> ce."""
    from conftest import fd_check
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        w_ih, w_hh, b = lstm_params(rng, 4, 3)
        w_out, b_out = node(rng, 2, 6), node(rng, 2)
        xs = [node(rng, 4) for _ in range(3)]
        params = [w_ih, w_hh, b, w_out, b_out] + xs

        def build():
            h = ag.Node(np.zeros(3))
            c = ag.Node(np.zeros(3))
            hs = []
            for x in xs:
                h, c = ag.lstm_cell(x, h, c, w_ih, w_hh, b)
                hs.append(h)
            feat = ag.concat([hs[-1], ag.sigmoid(hs[0])])
            probs = ag.softmax(ag.linear(feat, w_out, b_out))
            return ag.cross_entropy(probs, seed % 2)

        worst = max(worst, fd_check(build, params, rng, n_coords=2))
    assert worst < 1e-4
