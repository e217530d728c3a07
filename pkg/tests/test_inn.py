import numpy as np
import pytest

from petkin.inn import (
    CouplingLayer,
    InnNetwork,
    MixingLayer,
    NetworkSpec,
    StaleCacheError,
    Subnet,
    conv3x3,
    coupling_forward,
    coupling_inverse,
    mixing_forward,
    mixing_inverse,
    network_backward,
    network_forward,
    network_inverse,
)


def randomize(net, rng, scale=0.3):
    """Give every parameter (including zero-initialized final layers) random values."""
    for name, arr in net.named_params().items():
        if name.endswith("mix.W"):
            continue
        arr[...] = rng.normal(0, scale, arr.shape)
    return net


def const_subnet(c_in, c_out, value):
    return Subnet([np.zeros((c_out, c_in, 3, 3))], [np.full(c_out, float(value))])


def random_coupling(rng, channels=6, sigma=2.0):
    layer = CouplingLayer.build(channels, hidden=8, layers=3, sigma=sigma, rng=rng)
    for net in layer.subnets():
        for arr in net.params():
            arr[...] = rng.normal(0, 0.3, arr.shape)
    return layer


class TestConv:
    def test_matches_direct_loop(self, rng):
        x = rng.standard_normal((2, 5, 4))
        w = rng.standard_normal((3, 2, 3, 3))
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
        ref = np.zeros((3, 5, 4))
        for o in range(3):
            for i in range(5):
                for j in range(4):
                    ref[o, i, j] = np.sum(w[o] * xp[:, i : i + 3, j : j + 3])
        assert np.allclose(conv3x3(x, w), ref)


class TestCoupling:
    def test_zero_subnets_identity(self, rng):
        layer = CouplingLayer.build(6, rng=rng)
        for net in layer.subnets():
            for arr in net.params():
                arr[...] = 0.0
        m = rng.standard_normal((6, 4, 4))
        assert np.array_equal(coupling_forward(layer, m), m)
        assert np.array_equal(coupling_inverse(layer, m), m)

    def test_constant_subnets(self):
        # huge sigma makes the clamp numerically transparent
        layer = CouplingLayer(1, 2, s=const_subnet(1, 1, np.log(2)), t=const_subnet(1, 1, 1.0),
                              r=const_subnet(1, 1, 0.0), sigma=1e8)
        m = np.stack([np.full((3, 3), 5.0), np.full((3, 3), 3.0)])
        n = coupling_forward(layer, m)
        assert np.allclose(n[0], 5.0) and np.allclose(n[1], 7.0, rtol=1e-12)
        assert np.allclose(coupling_inverse(layer, n), m, rtol=1e-12)

    @pytest.mark.parametrize("seed", range(100))
    def test_roundtrip(self, seed):
        rng = np.random.default_rng(seed)
        layer = random_coupling(rng)
        m = rng.standard_normal((6, 5, 5))
        assert np.max(np.abs(coupling_inverse(layer, coupling_forward(layer, m)) - m)) <= 1e-5
        n = rng.standard_normal((6, 5, 5))
        assert np.max(np.abs(coupling_forward(layer, coupling_inverse(layer, n)) - n)) <= 1e-5

    def test_scale_clamp_bound(self, rng):
        layer = random_coupling(rng, sigma=0.5)
        for net in (layer.s,):
            net.biases[-1][...] = 50.0
        m = np.stack([np.zeros((4, 4))] * 3 + [np.ones((4, 4))] * 3)
        n = coupling_forward(layer, m)
        # with m2 = 1 the factor is n2 - t(n1)
        n1 = n[:3]
        factor = n[3:] - layer.t.forward(n1)[0]
        assert np.all(factor <= np.exp(0.5) + 1e-12) and np.all(factor >= np.exp(-0.5) - 1e-12)

    def test_channel_checks(self, rng):
        layer = CouplingLayer.build(4, rng=rng)
        with pytest.raises(ValueError):
            coupling_forward(layer, np.zeros((3, 2, 2)))
        with pytest.raises(ValueError):
            CouplingLayer.build(4, d=4)
        with pytest.raises(ValueError):
            CouplingLayer.build(4, sigma=0.0)


class TestMixing:
    def test_identity_and_swap(self, rng):
        x = rng.standard_normal((2, 3, 3))
        assert np.array_equal(mixing_forward(MixingLayer(np.eye(2)), x), x)
        swapped = mixing_forward(MixingLayer(np.array([[0.0, 1.0], [1.0, 0.0]])), x)
        assert np.array_equal(swapped, x[::-1])

    @pytest.mark.parametrize("seed", range(20))
    def test_orthogonal_roundtrip(self, seed):
        rng = np.random.default_rng(seed)
        layer = MixingLayer.orthogonal(12, rng)
        assert np.max(np.abs(layer.W @ layer.W_inv - np.eye(12))) <= 1e-10
        x = rng.standard_normal((12, 4, 4))
        assert np.max(np.abs(mixing_inverse(layer, mixing_forward(layer, x)) - x)) <= 1e-6

    def test_singular_rejected(self):
        with pytest.raises(ValueError):
            MixingLayer(np.array([[1.0, 2.0], [2.0, 4.0]]))


class TestNetwork:
    def test_zero_blocks(self, rng):
        net = InnNetwork.build(NetworkSpec(channels=4, blocks=0))
        x = rng.standard_normal((4, 3, 3))
        assert np.array_equal(network_forward(net, x), x)

    def test_identity_blocks(self, rng):
        spec = NetworkSpec(channels=4, blocks=2, hidden=4, layers=2)
        net = InnNetwork.build(spec, seed=0)
        for mix in net.mixers:
            mix.W[...] = np.eye(4)
            mix.sync()
        x = rng.standard_normal((4, 3, 3))
        assert np.array_equal(network_forward(net, x), x)

    def test_identity_at_init(self, rng):
        net = InnNetwork.build(NetworkSpec(), seed=3)
        x = rng.standard_normal((12, 8, 8))
        ref = np.tensordot(net.mixing_product(), x, axes=(1, 0))
        assert np.max(np.abs(network_forward(net, x) - ref)) <= 1e-10

    @pytest.mark.parametrize("blocks", [4, 8])
    def test_roundtrip(self, blocks, rng):
        net = randomize(InnNetwork.build(NetworkSpec(blocks=blocks, hidden=16, layers=3), seed=1), rng, 0.05)
        x = rng.standard_normal((12, 8, 8))
        assert np.max(np.abs(network_inverse(net, network_forward(net, x)) - x)) <= 1e-4

    def test_designated_channels(self):
        with pytest.raises(ValueError):
            NetworkSpec(channels=4, param_channels=(0, 4))


class TestGradients:
    @pytest.fixture
    def small(self, rng):
        net = InnNetwork.build(NetworkSpec(channels=4, blocks=2, hidden=3, layers=2), seed=5)
        return randomize(net, rng)

    def test_zero_upstream(self, small, rng):
        x = rng.standard_normal((4, 4, 4))
        network_forward(small, x)
        dx, grads = network_backward(small, x, np.zeros((4, 4, 4)))
        assert not dx.any() and not any(g.any() for g in grads.values())

    def test_identity_net_passes_gradient(self, rng):
        net = InnNetwork.build(NetworkSpec(channels=4, blocks=1, hidden=3, layers=2), seed=0)
        net.mixers[0].W[...] = np.eye(4)
        net.sync()
        x = rng.standard_normal((4, 3, 3))
        dy = rng.standard_normal((4, 3, 3))
        network_forward(net, x)
        assert np.array_equal(network_backward(net, x, dy)[0], dy)

    def test_stale_cache(self, small, rng):
        x = rng.standard_normal((4, 3, 3))
        with pytest.raises(StaleCacheError):
            network_backward(small, x, x)
        network_forward(small, x)
        with pytest.raises(StaleCacheError):
            network_backward(small, x + 1, x)

    @staticmethod
    def fd_check(net, loss, analytic, h=1e-4):
        for name, arr in net.named_params().items():
            g = analytic[name].ravel()
            flat = arr.reshape(-1)
            for k in range(flat.size):
                step = h * max(1.0, abs(flat[k]))
                old = flat[k]
                flat[k] = old + step
                net.sync()
                up = loss()
                flat[k] = old - step
                net.sync()
                down = loss()
                flat[k] = old
                net.sync()
                num = (up - down) / (2 * step)
                assert abs(num - g[k]) <= max(1e-3 * abs(num), 1e-6), (name, k, num, g[k])

    def test_forward_fd(self, small, rng):
        x = rng.standard_normal((4, 4, 4))
        R = rng.standard_normal((4, 4, 4))
        network_forward(small, x)
        dx, grads = network_backward(small, x, R)
        self.fd_check(small, lambda: float(np.sum(small.forward(x)[0] * R)), grads)
        # input gradient
        for idx in [(0, 0, 0), (3, 2, 1), (1, 3, 3)]:
            e = np.zeros_like(x)
            e[idx] = 1e-5
            num = (np.sum(small.forward(x + e)[0] * R) - np.sum(small.forward(x - e)[0] * R)) / 2e-5
            assert num == pytest.approx(dx[idx], rel=1e-4, abs=1e-7)

    def test_inverse_fd(self, small, rng):
        y = rng.standard_normal((4, 4, 4))
        R = rng.standard_normal((4, 4, 4))
        _, tape = small.inverse(y)
        grads = small.zero_grads()
        dy = small.inverse_backward(tape, R, grads)
        self.fd_check(small, lambda: float(np.sum(small.inverse(y)[0] * R)), grads)
        e = np.zeros_like(y)
        e[2, 1, 1] = 1e-5
        num = (np.sum(small.inverse(y + e)[0] * R) - np.sum(small.inverse(y - e)[0] * R)) / 2e-5
        assert num == pytest.approx(dy[2, 1, 1], rel=1e-4, abs=1e-7)
