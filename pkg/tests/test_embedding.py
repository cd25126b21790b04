import numpy as np
import pytest

from _oracles import central_difference, max_relative_error, straight_line_forward
from tripletlearn.embedding import (
    CheckpointError,
    EmbeddingNetwork,
    NetworkGradients,
    apply_sgd_step,
    embed_backward,
    embed_forward,
    init_network,
    load_checkpoint,
    parameter_count,
    save_checkpoint,
)


def hand_net(weights, biases):
    dims = (weights[0].shape[1],) + tuple(w.shape[0] for w in weights)
    return EmbeddingNetwork(
        layer_dims=dims,
        weights=tuple(np.asarray(w, dtype=float) for w in weights),
        biases=tuple(np.asarray(b, dtype=float) for b in biases),
    )


class TestInit:
    def test_parameter_count_4_8_3(self):
        # Independent count: sum over layers of fan_in*fan_out + fan_out.
        dims = [4, 8, 3]
        expected = sum(dims[k] * dims[k + 1] + dims[k + 1] for k in range(len(dims) - 1))
        assert expected == 67
        net = init_network(dims, seed=0)
        stored = sum(w.size for w in net.weights) + sum(b.size for b in net.biases)
        assert stored == 67
        assert parameter_count(dims) == 67

    def test_same_seed_identical(self):
        a = init_network([4, 8, 3], seed=7)
        b = init_network([4, 8, 3], seed=7)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)
        for ba, bb in zip(a.biases, b.biases):
            assert np.array_equal(ba, bb)

    def test_different_seed_differs(self):
        a = init_network([4, 8, 3], seed=7)
        b = init_network([4, 8, 3], seed=8)
        assert any(not np.array_equal(wa, wb) for wa, wb in zip(a.weights, b.weights))

    def test_biases_zero_and_bounds(self):
        net = init_network([6, 9], seed=3)
        assert np.array_equal(net.biases[0], np.zeros(9))
        bound = np.sqrt(6.0 / (6 + 9))
        assert np.abs(net.weights[0]).max() <= bound

    def test_init_scale_shrinks_bound(self):
        net = init_network([6, 9], seed=3, init_scale=0.1)
        assert np.abs(net.weights[0]).max() <= 0.1 * np.sqrt(6.0 / 15)

    @pytest.mark.parametrize("dims", [[5], [], [4, 0], [4, -2, 3]])
    def test_bad_dims_rejected(self, dims):
        with pytest.raises(ValueError):
            init_network(dims, seed=0)


class TestForward:
    def test_identity_layer(self):
        net = hand_net([np.eye(3)], [np.zeros(3)])
        x = np.array([0.5, -1.5, 2.0])
        out, _ = embed_forward(net, x)
        assert np.array_equal(out, x)

    def test_all_zero_parameters(self):
        net = hand_net([np.zeros((4, 3)), np.zeros((2, 4))], [np.zeros(4), np.zeros(2)])
        out, _ = embed_forward(net, np.array([1.0, 2.0, 3.0]))
        assert np.array_equal(out, np.zeros(2))

    def test_matches_straight_line_oracle(self):
        w1 = np.array([[0.5, -1.0], [2.0, 0.25], [-0.75, 1.5]])
        b1 = np.array([0.1, -0.2, 0.0])
        w2 = np.array([[1.0, -1.0, 0.5], [0.0, 2.0, -0.5]])
        b2 = np.array([-1.0, 0.5])
        net = hand_net([w1, w2], [b1, b2])
        x = np.array([0.3, -0.8])
        out, _ = embed_forward(net, x)
        expected = straight_line_forward([w1, w2], [b1, b2], x)
        np.testing.assert_allclose(out, expected, rtol=1e-12, atol=0)

    def test_pure_and_repeatable(self):
        net = init_network([4, 6, 3], seed=1)
        x = np.random.default_rng(2).normal(size=4)
        out1, _ = embed_forward(net, x)
        out2, _ = embed_forward(net, x)
        assert np.array_equal(out1, out2)

    def test_dimension_mismatch(self):
        net = init_network([4, 3], seed=0)
        with pytest.raises(ValueError, match="shape"):
            embed_forward(net, np.zeros(5))

    def test_nonfinite_input_rejected(self):
        net = init_network([2, 3], seed=0)
        with pytest.raises(ValueError):
            embed_forward(net, np.array([np.nan, 0.0]))

    def test_cache_shapes(self):
        net = init_network([4, 6, 3], seed=1)
        _, cache = embed_forward(net, np.zeros(4))
        assert [z.shape[0] for z in cache.pre_activations] == [6, 3]
        assert [h.shape[0] for h in cache.post_activations] == [6, 3]


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self):
        net = init_network([3, 5, 2], seed=4)
        _, cache = embed_forward(net, np.array([1.0, -2.0, 0.5]))
        grads = embed_backward(net, cache, np.zeros(2))
        assert all(np.array_equal(g, np.zeros_like(g)) for g in grads.weights)
        assert all(np.array_equal(g, np.zeros_like(g)) for g in grads.biases)

    def test_single_linear_layer_closed_form(self):
        rng = np.random.default_rng(5)
        w = rng.normal(size=(3, 4))
        net = hand_net([w], [rng.normal(size=3)])
        x = rng.normal(size=4)
        _, cache = embed_forward(net, x)
        upstream = rng.normal(size=3)
        grads = embed_backward(net, cache, upstream)
        np.testing.assert_allclose(grads.weights[0], np.outer(upstream, x), rtol=1e-12)
        np.testing.assert_allclose(grads.biases[0], upstream, rtol=1e-12)

    def test_gradient_shape_mismatch(self):
        net = init_network([3, 5, 2], seed=4)
        _, cache = embed_forward(net, np.zeros(3))
        with pytest.raises(ValueError, match="shape"):
            embed_backward(net, cache, np.zeros(3))

    def test_relu_subgradient_at_zero_is_zero(self):
        # Hidden pre-activation is exactly 0: no gradient may flow through.
        net = hand_net(
            [np.array([[1.0]]), np.array([[1.0]])],
            [np.array([0.0]), np.array([0.0])],
        )
        out, cache = embed_forward(net, np.array([0.0]))
        assert cache.pre_activations[0][0] == 0.0
        grads = embed_backward(net, cache, np.array([1.0]))
        assert grads.weights[0][0, 0] == 0.0
        assert grads.biases[0][0] == 0.0
        # The output layer itself still sees its input (which is 0 here).
        assert grads.biases[1][0] == 1.0

    def test_finite_difference_two_hidden_layers(self):
        # Scalar objective g . f(x); checked at points clear of ReLU kinks.
        rng = np.random.default_rng(6)
        dims = [3, 5, 4, 2]
        checked = 0
        attempts = 0
        while checked < 10 and attempts < 200:
            attempts += 1
            net = init_network(dims, seed=int(rng.integers(1 << 30)))
            x = rng.normal(size=3)
            direction = rng.normal(size=2)
            _, cache = embed_forward(net, x)
            if min(np.abs(z).min() for z in cache.pre_activations[:-1]) < 1e-3:
                continue
            checked += 1
            grads = embed_backward(net, cache, direction)
            flat = np.concatenate(
                [w.ravel() for w in net.weights] + [b.ravel() for b in net.biases]
            )

            def objective(theta):
                ws, bs = [], []
                pos = 0
                for k in range(len(dims) - 1):
                    n = dims[k] * dims[k + 1]
                    ws.append(theta[pos : pos + n].reshape(dims[k + 1], dims[k]))
                    pos += n
                for k in range(len(dims) - 1):
                    bs.append(theta[pos : pos + dims[k + 1]])
                    pos += dims[k + 1]
                trial = EmbeddingNetwork(tuple(dims), tuple(ws), tuple(bs))
                out, _ = embed_forward(trial, x)
                return float(direction @ out)

            numeric = central_difference(objective, flat, step=1e-5)
            analytic = np.concatenate(
                [w.ravel() for w in grads.weights] + [b.ravel() for b in grads.biases]
            )
            assert max_relative_error(analytic, numeric) < 1e-4
        assert checked == 10


class TestSgdStep:
    def test_zero_lr_is_identity(self):
        net = init_network([3, 4], seed=0)
        grads = NetworkGradients(
            weights=(np.ones((4, 3)),), biases=(np.ones(4),)
        )
        updated = apply_sgd_step(net, grads, 0.0)
        assert np.array_equal(updated.weights[0], net.weights[0])
        assert np.array_equal(updated.biases[0], net.biases[0])

    def test_single_weight_arithmetic(self):
        net = hand_net([np.array([[1.0]])], [np.array([0.0])])
        grads = NetworkGradients(weights=(np.array([[2.0]]),), biases=(np.array([0.0]),))
        updated = apply_sgd_step(net, grads, 0.1)
        assert updated.weights[0][0, 0] == pytest.approx(0.8, abs=1e-15)

    def test_constant_gradients_compose_additively(self):
        net = init_network([2, 3], seed=1)
        rng = np.random.default_rng(2)
        g1 = NetworkGradients((rng.normal(size=(3, 2)),), (rng.normal(size=3),))
        g2 = NetworkGradients((rng.normal(size=(3, 2)),), (rng.normal(size=3),))
        lr = 0.05
        stepped = apply_sgd_step(apply_sgd_step(net, g1, lr), g2, lr)
        combined = apply_sgd_step(net, g1.add(g2), lr)
        np.testing.assert_allclose(stepped.weights[0], combined.weights[0], rtol=1e-12)
        np.testing.assert_allclose(stepped.biases[0], combined.biases[0], rtol=1e-12)

    def test_does_not_mutate_input(self):
        net = init_network([2, 3], seed=1)
        before = net.weights[0].copy()
        grads = NetworkGradients((np.ones((3, 2)),), (np.ones(3),))
        apply_sgd_step(net, grads, 0.5)
        assert np.array_equal(net.weights[0], before)

    def test_shape_mismatch_rejected(self):
        net = init_network([2, 3], seed=1)
        bad = NetworkGradients((np.ones((2, 3)),), (np.ones(3),))
        with pytest.raises(ValueError):
            apply_sgd_step(net, bad, 0.1)

    def test_negative_lr_rejected(self):
        net = init_network([2, 3], seed=1)
        grads = NetworkGradients((np.zeros((3, 2)),), (np.zeros(3),))
        with pytest.raises(ValueError):
            apply_sgd_step(net, grads, -0.1)


class TestCheckpoint:
    def test_round_trip_exact(self, tmp_path):
        net = init_network([4, 7, 3], seed=99)
        path = tmp_path / "net.tfnet"
        save_checkpoint(net, path)
        loaded = load_checkpoint(path)
        assert loaded.layer_dims == net.layer_dims
        for a, b in zip(loaded.weights, net.weights):
            assert np.array_equal(a, b)
        for a, b in zip(loaded.biases, net.biases):
            assert np.array_equal(a, b)

    def test_magic_string_leads_file(self, tmp_path):
        net = init_network([2, 2], seed=0)
        path = tmp_path / "net.tfnet"
        save_checkpoint(net, path)
        assert path.read_text().startswith("TFNET1\n")

    def test_trailing_provenance_comments_ignored(self, tmp_path):
        net = init_network([3, 4, 2], seed=1)
        path = tmp_path / "net.tfnet"
        save_checkpoint(net, path, comments=["config: {}", "seed: 1"])
        text = path.read_text()
        assert text.startswith("TFNET1\n")
        assert "# config: {}" in text
        loaded = load_checkpoint(path)
        assert all(np.array_equal(a, b) for a, b in zip(loaded.weights, net.weights))

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.tfnet"
        path.write_text("NOPE\n2 2\n")
        with pytest.raises(CheckpointError, match="TFNET1"):
            load_checkpoint(path)

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "short.tfnet"
        path.write_text("TFNET1\n2 3 2\n0 0 0 0 0 0\n0 0 0\n")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
