import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emac import nets


def make_net(sizes, seed, **kwargs):
    return nets.Mlp.create(sizes, np.random.default_rng(seed), **kwargs)


def fd_param_grads(net, loss_fn, h=1e-5):
    """Central finite differences of loss_fn() w.r.t. every parameter."""
    out = []
    for arr in net.weights + net.biases:
        g = np.empty_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        out.append(g)
    return out


def max_rel_error(analytic, fd, floor=1e-3):
    worst = 0.0
    for a, f in zip(analytic, fd):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), floor)
        worst = max(worst, float(np.max(np.abs(a - f) / denom)))
    return worst


class TestForward:
    def test_zero_network_gives_zero_output(self):
        net = nets.Mlp([np.zeros((4, 3)), np.zeros((2, 4))],
                       [np.zeros(4), np.zeros(2)])
        assert np.array_equal(net.forward(np.array([1.0, -2.0, 3.0])), np.zeros(2))

    def test_identity_single_layer(self):
        net = nets.Mlp([np.eye(3)], [np.zeros(3)], hidden_activation="identity")
        x = np.array([0.3, -1.2, 2.5])
        assert np.array_equal(net.forward(x), x)

    def test_matches_affine_chain_oracle(self):
        # Straight-line re-implementation of the 3-4-2 forward pass.
        net = make_net([3, 4, 2], seed=7)
        rng = np.random.default_rng(11)
        x = rng.standard_normal(3)
        h = x
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            z = np.array([sum(w[r, c] * h[c] for c in range(w.shape[1])) + b[r]
                          for r in range(w.shape[0])])
            h = np.maximum(z, 0.0) if i < len(net.weights) - 1 else z
        np.testing.assert_allclose(net.forward(x), h, rtol=0, atol=1e-12)

    def test_batch_matches_single(self):
        # BLAS picks different kernels for matrix-matrix vs single-row
        # products, so agreement is to rounding, not bitwise.
        net = make_net([3, 8, 2], seed=3)
        xs = np.random.default_rng(4).standard_normal((5, 3))
        batched = net.forward(xs)
        for i, x in enumerate(xs):
            np.testing.assert_allclose(batched[i], net.forward(x), rtol=0, atol=1e-12)

    def test_tanh_output_scaling(self):
        net = nets.Mlp([np.array([[2.0]])], [np.zeros(1)],
                       output_activation="tanh", output_scale=3.0)
        x = np.array([0.7])
        assert np.allclose(net.forward(x), 3.0 * np.tanh(1.4))

    def test_repeated_forward_is_bit_identical(self):
        net = make_net([4, 16, 3], seed=5)
        x = np.random.default_rng(6).standard_normal(4)
        assert np.array_equal(net.forward(x), net.forward(x))

    def test_dimension_mismatch_raises(self):
        net = make_net([3, 4, 2], seed=0)
        with pytest.raises(ValueError):
            net.forward(np.zeros(5))

    def test_bad_layer_chain_raises(self):
        with pytest.raises(ValueError):
            nets.Mlp([np.zeros((4, 3)), np.zeros((2, 5))], [np.zeros(4), np.zeros(2)])


class TestBackward:
    def test_linear_gradient(self):
        # y = w . x with loss = y: dloss/dw = x, dloss/dx = w
        w = np.array([[1.5, -2.0, 0.5]])
        net = nets.Mlp([w], [np.zeros(1)])
        x = np.array([0.4, 1.1, -0.6])
        _, cache = net.forward_cached(x)
        grads, dx = nets.backward(net, cache, np.array([1.0]))
        np.testing.assert_array_equal(grads.d_weights[0], x[None, :])
        np.testing.assert_array_equal(dx, w[0])

    def test_dead_relu_unit_gets_zero_gradient(self):
        # Single hidden unit with strictly negative pre-activation.
        net = nets.Mlp([np.array([[1.0]]), np.array([[1.0]])],
                       [np.array([-5.0]), np.zeros(1)])
        x = np.array([1.0])  # pre-activation = -4 < 0
        _, cache = net.forward_cached(x)
        grads, dx = nets.backward(net, cache, np.array([1.0]))
        assert grads.d_weights[0][0, 0] == 0.0
        assert dx[0] == 0.0

    @pytest.mark.parametrize("out_act,scale", [("identity", 1.0), ("tanh", 2.0)])
    def test_matches_finite_differences(self, out_act, scale):
        net = make_net([3, 6, 5, 2], seed=21, output_activation=out_act,
                       output_scale=scale)
        rng = np.random.default_rng(22)
        x = rng.standard_normal((4, 3))
        target = rng.standard_normal((4, 2))

        def loss():
            return float(np.sum((net.forward(x) - target) ** 2))

        _, cache = net.forward_cached(x)
        grads, _ = nets.backward(net, cache, 2.0 * (net.forward(x) - target))
        fd = fd_param_grads(net, loss)
        assert max_rel_error(grads.d_weights + grads.d_biases, fd) <= 1e-4

    def test_input_gradient_matches_finite_differences(self):
        net = make_net([4, 8, 1], seed=31)
        x0 = np.random.default_rng(32).standard_normal(4)
        _, cache = net.forward_cached(x0)
        _, dx = nets.backward(net, cache, np.ones(1))
        h = 1e-6
        for i in range(4):
            xp, xm = x0.copy(), x0.copy()
            xp[i] += h
            xm[i] -= h
            fd = (net.forward(xp)[0] - net.forward(xm)[0]) / (2 * h)
            assert abs(dx[i] - fd) <= 1e-4 * max(abs(fd), 1e-3)

    def test_backward_is_pure_and_repeatable(self):
        net = make_net([3, 5, 2], seed=41)
        x = np.random.default_rng(42).standard_normal((2, 3))
        _, cache = net.forward_cached(x)
        g = np.ones((2, 2))
        g1, dx1 = nets.backward(net, cache, g)
        g2, dx2 = nets.backward(net, cache, g)
        assert np.array_equal(dx1, dx2)
        for a, b in zip(g1.d_weights, g2.d_weights):
            assert np.array_equal(a, b)

    def test_stale_cache_rejected(self):
        net = make_net([3, 4, 2], seed=51)
        _, cache = net.forward_cached(np.zeros(3))
        opt = nets.Adam(net)
        grads, _ = nets.backward(net, cache, np.ones(2))
        opt.step(net, grads, 0.001)  # mutates the network
        with pytest.raises(ValueError, match="stale"):
            nets.backward(net, cache, np.ones(2))

    def test_foreign_cache_rejected(self):
        a = make_net([3, 4, 2], seed=1)
        b = make_net([3, 4, 2], seed=2)
        _, cache = a.forward_cached(np.zeros(3))
        with pytest.raises(ValueError, match="different network"):
            nets.backward(b, cache, np.ones(2))


class TestAdam:
    def test_single_step_matches_hand_recurrence(self):
        # One scalar parameter, g=1, lr=1e-3, published defaults.
        net = nets.Mlp([np.array([[0.5]])], [np.zeros(1)],
                       hidden_activation="identity")
        opt = nets.Adam(net)
        grads = nets.ParamGrads([np.array([[1.0]])], [np.array([0.0])])
        opt.step(net, grads, 1e-3)
        m = 0.1 * 1.0
        v = 0.001 * 1.0
        m_hat = m / (1 - 0.9)
        v_hat = v / (1 - 0.999)
        expected = 0.5 - 1e-3 * m_hat / (np.sqrt(v_hat) + 1e-8)
        assert abs(net.weights[0][0, 0] - expected) <= 1e-12
        assert abs(expected - (0.5 - 1e-3)) < 1e-10  # decreases by ~lr at t=1
        assert opt.t == 1

    def test_zero_gradient_leaves_params_fixed_and_decays_moments(self):
        net = make_net([2, 3, 1], seed=61)
        before = [w.copy() for w in net.weights]
        opt = nets.Adam(net)
        # seed the moments with one real step, then push zero gradients
        zero = nets.ParamGrads.zeros_like(net)
        for _ in range(5):
            opt.step(net, zero, 0.01)
        for w, b in zip(net.weights, before):
            np.testing.assert_array_equal(w, b)
        assert all(np.all(m == 0.0) for m in opt.m_weights)

    def test_moments_decay_toward_zero_after_real_step(self):
        net = make_net([2, 3, 1], seed=62)
        opt = nets.Adam(net)
        ones = nets.ParamGrads([np.ones_like(w) for w in net.weights],
                               [np.ones_like(b) for b in net.biases])
        opt.step(net, ones, 1e-3)
        m_after_one = opt.m_weights[0].copy()
        zero = nets.ParamGrads.zeros_like(net)
        opt.step(net, zero, 1e-3)
        assert np.all(np.abs(opt.m_weights[0]) < np.abs(m_after_one))

    def test_deterministic_across_identical_nets(self):
        net1 = make_net([3, 8, 2], seed=71)
        net2 = make_net([3, 8, 2], seed=71)
        o1, o2 = nets.Adam(net1), nets.Adam(net2)
        rng = np.random.default_rng(72)
        g = nets.ParamGrads([rng.standard_normal(w.shape) for w in net1.weights],
                            [rng.standard_normal(b.shape) for b in net1.biases])
        for _ in range(3):
            o1.step(net1, g, 1e-3)
            o2.step(net2, g, 1e-3)
        for a, b in zip(net1.weights, net2.weights):
            assert np.array_equal(a, b)

    def test_non_finite_gradients_rejected(self):
        net = make_net([2, 2], seed=81)
        opt = nets.Adam(net)
        bad = nets.ParamGrads([np.full((2, 2), np.nan)], [np.zeros(2)])
        with pytest.raises(FloatingPointError):
            opt.step(net, bad, 1e-3)
        assert opt.t == 0

    def test_step_counter_increments_by_one(self):
        net = make_net([2, 2], seed=82)
        opt = nets.Adam(net)
        zero = nets.ParamGrads.zeros_like(net)
        for expected in range(1, 6):
            opt.step(net, zero, 1e-3)
            assert opt.t == expected


class TestSoftUpdate:
    def test_tau_one_copies(self):
        tgt, onl = make_net([2, 3, 1], seed=91), make_net([2, 3, 1], seed=92)
        nets.soft_update(tgt, onl, 1.0)
        for a, b in zip(tgt.weights, onl.weights):
            assert np.array_equal(a, b)

    def test_tau_zero_freezes(self):
        tgt, onl = make_net([2, 3, 1], seed=93), make_net([2, 3, 1], seed=94)
        before = [w.copy() for w in tgt.weights]
        nets.soft_update(tgt, onl, 0.0)
        for a, b in zip(tgt.weights, before):
            assert np.array_equal(a, b)

    def test_scalar_formula(self):
        tgt = nets.Mlp([np.array([[0.0]])], [np.zeros(1)])
        onl = nets.Mlp([np.array([[1.0]])], [np.zeros(1)])
        nets.soft_update(tgt, onl, 0.005)
        assert tgt.weights[0][0, 0] == pytest.approx(0.005, abs=1e-15)

    @given(tau=st.floats(0.0, 1.0), seed=st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_result_is_convex_combination(self, tau, seed):
        rng = np.random.default_rng(seed)
        tgt = nets.Mlp.create([3, 4, 2], rng)
        onl = nets.Mlp.create([3, 4, 2], rng)
        lo = [np.minimum(a, b) for a, b in zip(tgt.weights, onl.weights)]
        hi = [np.maximum(a, b) for a, b in zip(tgt.weights, onl.weights)]
        nets.soft_update(tgt, onl, tau)
        for w, l, h in zip(tgt.weights, lo, hi):
            assert np.all(w >= l - 1e-15) and np.all(w <= h + 1e-15)

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            nets.soft_update(make_net([2, 3, 1], seed=1), make_net([2, 4, 1], seed=1), 0.5)


class TestCheckpoint:
    def test_round_trip(self):
        net = make_net([3, 8, 2], seed=101, output_activation="tanh", output_scale=2.0)
        blob = nets.dump_params(net)
        other = make_net([3, 8, 2], seed=999, output_activation="tanh", output_scale=2.0)
        nets.load_params(other, blob)
        for a, b in zip(net.weights, other.weights):
            assert np.array_equal(a, b)
        for a, b in zip(net.biases, other.biases):
            assert np.array_equal(a, b)

    def test_binary_layout(self):
        # magic + layer count + (out, in) pairs as little-endian int32, then
        # row-major little-endian float64 weights and biases per layer.
        w = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([5.0, 6.0])
        net = nets.Mlp([w], [b])
        blob = nets.dump_params(net)
        assert blob[:4] == b"EMNN"
        assert int.from_bytes(blob[4:8], "little") == 1
        assert int.from_bytes(blob[8:12], "little") == 2   # out
        assert int.from_bytes(blob[12:16], "little") == 2  # in
        body = np.frombuffer(blob[16:], dtype="<f8")
        np.testing.assert_array_equal(body, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])

    def test_shape_mismatch_rejected(self):
        blob = nets.dump_params(make_net([3, 4, 2], seed=1))
        with pytest.raises(ValueError):
            nets.load_params(make_net([3, 5, 2], seed=1), blob)

    def test_file_round_trip(self, tmp_path):
        net = make_net([2, 4, 1], seed=13)
        path = tmp_path / "net.bin"
        nets.save_params(net, path)
        other = make_net([2, 4, 1], seed=14)
        nets.load_params_file(other, path)
        assert np.array_equal(net.weights[1], other.weights[1])


@given(seed=st.integers(0, 100_000))
@settings(max_examples=25, deadline=None)
def test_gradcheck_random_networks(seed):
    rng = np.random.default_rng(seed)
    sizes = [3, int(rng.integers(2, 6)), int(rng.integers(2, 6)), 2]
    net = nets.Mlp.create(sizes, rng)
    x = rng.standard_normal((3, 3))
    target = rng.standard_normal((3, 2))

    def loss():
        return float(np.mean((net.forward(x) - target) ** 2))

    y, cache = net.forward_cached(x)
    grads, _ = nets.backward(net, cache, 2.0 * (y - target) / y.size)
    fd = fd_param_grads(net, loss)
    assert max_rel_error(grads.d_weights + grads.d_biases, fd) <= 1e-4
