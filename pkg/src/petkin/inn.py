"""Invertible network: 1x1 channel mixing + affine coupling blocks, numpy only.

Feature maps are ``(C, H, W)`` float64 arrays. Every pass returns a tape that
the matching backward call consumes, which gives exact reverse-mode gradients
for both the forward map and its inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class StaleCacheError(RuntimeError):
    """Backward called with an input that does not match the cached forward pass."""


# -- convolution primitives -------------------------------------------------


def conv3x3(x, w, b=None):
    """'Same' 3x3 cross-correlation, stride 1: ``(C, H, W) -> (Cout, H, W)``."""
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    cols = sliding_window_view(xp, (3, 3), axis=(1, 2))
    out = np.tensordot(w, cols, axes=([1, 2, 3], [0, 3, 4]))
    if b is not None:
        out += b[:, None, None]
    return out


def conv3x3_backward(x, w, dy):
    """Gradients ``(dx, dw, db)`` of :func:`conv3x3` for upstream ``dy``."""
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    cols = sliding_window_view(xp, (3, 3), axis=(1, 2))
    dw = np.tensordot(dy, cols, axes=([1, 2], [1, 2]))
    db = dy.sum(axis=(1, 2))
    dx = conv3x3(dy, w.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    return dx, dw, db


def leaky_relu(z, slope):
    return np.where(z > 0, z, slope * z)


# -- layers -----------------------------------------------------------------


@dataclass
class Subnet:
    """Shape-preserving conv stack ``c_in -> hidden -> ... -> c_out``.

    Hidden layers use a leaky rectifier; the last layer is linear and starts at
    zero so a fresh coupling layer is the identity.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    slope: float = 0.01

    @classmethod
    def build(cls, c_in, c_out, hidden=32, layers=4, slope=0.01, rng=None, zero_last=True):
        rng = rng if rng is not None else np.random.default_rng()
        if layers < 1:
            raise ValueError("a subnet needs at least one layer")
        sizes = [c_in] + [hidden] * (layers - 1) + [c_out]
        weights, biases = [], []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == layers - 1
            if last and zero_last:
                w = np.zeros((b, a, 3, 3))
            else:
                w = rng.normal(0.0, np.sqrt(2.0 / (9 * a)), size=(b, a, 3, 3))
            weights.append(w)
            biases.append(np.zeros(b))
        return cls(weights, biases, slope)

    def forward(self, x):
        tape = []
        h = x
        n = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = conv3x3(h, w, b)
            tape.append((h, z))
            h = z if i == n - 1 else leaky_relu(z, self.slope)
        return h, tape

    def backward(self, tape, dy, grads: list | None = None):
        """Return input gradient; parameter gradients are accumulated into ``grads``."""
        n = len(self.weights)
        g = dy
        for i in range(n - 1, -1, -1):
            h, z = tape[i]
            if i < n - 1:
                g = np.where(z > 0, g, self.slope * g)
            dx, dw, db = conv3x3_backward(h, self.weights[i], g)
            if grads is not None:
                grads[2 * i] += dw
                grads[2 * i + 1] += db
            g = dx
        return g

    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


@dataclass
class MixingLayer:
    """Invertible 1x1 convolution: per-pixel channel matrix ``W`` with stored inverse."""

    W: np.ndarray
    W_inv: np.ndarray = field(init=False)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.sync()

    def sync(self):
        """Recompute the stored inverse after ``W`` changed."""
        if self.W.ndim != 2 or self.W.shape[0] != self.W.shape[1]:
            raise ValueError("mixing matrix must be square")
        if abs(np.linalg.det(self.W)) < 1e-8:
            raise ValueError("mixing matrix is (nearly) singular")
        self.W_inv = np.linalg.inv(self.W)

    @classmethod
    def orthogonal(cls, channels, rng=None):
        rng = rng if rng is not None else np.random.default_rng()
        q, r = np.linalg.qr(rng.standard_normal((channels, channels)))
        return cls(q * np.sign(np.diag(r)))

    def forward(self, x):
        _check_channels(x, self.W.shape[0])
        return np.tensordot(self.W, x, axes=(1, 0)), x

    def inverse(self, y):
        _check_channels(y, self.W.shape[0])
        return np.tensordot(self.W_inv, y, axes=(1, 0)), y

    def backward(self, x, dy, grads):
        grads[0] += np.tensordot(dy, x, axes=([1, 2], [1, 2]))
        return np.tensordot(self.W.T, dy, axes=(1, 0))

    def inverse_backward(self, y, dx, grads):
        g_inv = np.tensordot(dx, y, axes=([1, 2], [1, 2]))
        grads[0] += -self.W_inv.T @ g_inv @ self.W_inv.T
        return np.tensordot(self.W_inv.T, dx, axes=(1, 0))

    def params(self):
        return [self.W]


def _check_channels(x, channels):
    if x.ndim != 3 or x.shape[0] != channels:
        raise ValueError(f"expected {channels} channels, got array of shape {x.shape}")


@dataclass
class CouplingLayer:
    """Affine coupling with an additive update of the first half.

    Forward::

        n1 = m1 + r(m2)
        n2 = m2 * exp(clamp(s(n1))) + t(n1)

    with ``clamp(z) = sigma * tanh(z / sigma)``; the inverse undoes the two
    steps in reverse order.
    """

    d: int
    channels: int
    s: Subnet
    t: Subnet
    r: Subnet
    sigma: float = 2.0

    @classmethod
    def build(cls, channels, d=None, hidden=32, layers=4, slope=0.01, sigma=2.0, rng=None):
        d = channels // 2 if d is None else d
        if not 1 <= d <= channels - 1:
            raise ValueError("split index must satisfy 1 <= d <= D-1")
        if sigma <= 0:
            raise ValueError("clamp constant must be > 0")
        rng = rng if rng is not None else np.random.default_rng()
        return cls(
            d,
            channels,
            s=Subnet.build(d, channels - d, hidden, layers, slope, rng),
            t=Subnet.build(d, channels - d, hidden, layers, slope, rng),
            r=Subnet.build(channels - d, d, hidden, layers, slope, rng),
            sigma=sigma,
        )

    def _scale(self, n1):
        raw, tape = self.s.forward(n1)
        th = np.tanh(raw / self.sigma)
        return self.sigma * th, th, tape

    def forward(self, m):
        _check_channels(m, self.channels)
        m1, m2 = m[: self.d], m[self.d :]
        rv, r_tape = self.r.forward(m2)
        n1 = m1 + rv
        sc, th, s_tape = self._scale(n1)
        tv, t_tape = self.t.forward(n1)
        e = np.exp(sc)
        n2 = m2 * e + tv
        return np.concatenate([n1, n2]), (m2, n1, e, th, r_tape, s_tape, t_tape)

    def inverse(self, n):
        _check_channels(n, self.channels)
        n1, n2 = n[: self.d], n[self.d :]
        sc, th, s_tape = self._scale(n1)
        tv, t_tape = self.t.forward(n1)
        e = np.exp(-sc)
        m2 = (n2 - tv) * e
        rv, r_tape = self.r.forward(m2)
        m1 = n1 - rv
        return np.concatenate([m1, m2]), (m2, n1, e, th, r_tape, s_tape, t_tape)

    def backward(self, tape, dn, grads):
        m2, n1, e, th, r_tape, s_tape, t_tape = tape
        gs, gt, gr = grads
        dn1, dn2 = dn[: self.d], dn[self.d :]
        dm2 = dn2 * e
        dsc = dn2 * m2 * e
        draw = dsc * (1.0 - th * th)
        dn1 = dn1 + self.s.backward(s_tape, draw, gs) + self.t.backward(t_tape, dn2, gt)
        dm2 = dm2 + self.r.backward(r_tape, dn1, gr)
        return np.concatenate([dn1, dm2])

    def inverse_backward(self, tape, dm, grads):
        m2, n1, e, th, r_tape, s_tape, t_tape = tape
        gs, gt, gr = grads
        dm1, dm2 = dm[: self.d], dm[self.d :]
        dn1 = dm1.copy()
        dm2 = dm2 + self.r.backward(r_tape, -dm1, gr)
        dn2 = dm2 * e
        dtv = -dn2
        draw = -(dm2 * m2) * (1.0 - th * th)
        dn1 += self.s.backward(s_tape, draw, gs) + self.t.backward(t_tape, dtv, gt)
        return np.concatenate([dn1, dn2])

    def subnets(self):
        return (self.s, self.t, self.r)


def coupling_forward(layer: CouplingLayer, m):
    return layer.forward(m)[0]


def coupling_inverse(layer: CouplingLayer, n):
    return layer.inverse(n)[0]


def mixing_forward(layer: MixingLayer, x):
    return layer.forward(x)[0]


def mixing_inverse(layer: MixingLayer, y):
    return layer.inverse(y)[0]


# -- network ----------------------------------------------------------------


@dataclass
class NetworkSpec:
    channels: int = 12
    blocks: int = 6
    hidden: int = 32
    layers: int = 4
    slope: float = 0.01
    sigma: float = 2.0
    split: int | None = None
    param_channels: tuple[int, ...] = (0, 1, 2, 3)

    def __post_init__(self):
        self.param_channels = tuple(int(c) for c in self.param_channels)
        if any(c < 0 or c >= self.channels for c in self.param_channels):
            raise ValueError("designated channels must lie in [0, channels)")
        if self.split is None:
            self.split = self.channels // 2

    def to_dict(self):
        return {
            "channels": self.channels,
            "blocks": self.blocks,
            "hidden": self.hidden,
            "layers": self.layers,
            "slope": self.slope,
            "sigma": self.sigma,
            "split": self.split,
            "param_channels": list(self.param_channels),
        }


class InnNetwork:
    """Ordered invertible blocks, each channel mixing followed by coupling."""

    def __init__(self, spec: NetworkSpec, mixers: list[MixingLayer], couplings: list[CouplingLayer]):
        if len(mixers) != len(couplings):
            raise ValueError("every block needs one mixing and one coupling layer")
        self.spec = spec
        self.mixers = mixers
        self.couplings = couplings
        self._cache = None

    @classmethod
    def build(cls, spec: NetworkSpec, seed=0) -> InnNetwork:
        rng = np.random.default_rng(seed)
        mixers, couplings = [], []
        for _ in range(spec.blocks):
            mixers.append(MixingLayer.orthogonal(spec.channels, rng))
            couplings.append(
                CouplingLayer.build(spec.channels, spec.split, spec.hidden, spec.layers, spec.slope, spec.sigma, rng)
            )
        return cls(spec, mixers, couplings)

    @property
    def n_blocks(self) -> int:
        return len(self.mixers)

    # parameters are exposed as an ordered name -> array mapping (arrays are live views)
    def named_params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (mix, cpl) in enumerate(zip(self.mixers, self.couplings)):
            out[f"block{i}.mix.W"] = mix.W
            for name, net in zip("str", cpl.subnets()):
                for j, arr in enumerate(net.params()):
                    kind = "w" if j % 2 == 0 else "b"
                    out[f"block{i}.{name}.{kind}{j // 2}"] = arr
        return out

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.named_params().items()}

    def sync(self):
        for mix in self.mixers:
            mix.sync()

    def _block_grads(self, grads, i):
        mix = [grads[f"block{i}.mix.W"]]
        sub = []
        for name, net in zip("str", self.couplings[i].subnets()):
            g = []
            for j in range(len(net.params())):
                kind = "w" if j % 2 == 0 else "b"
                g.append(grads[f"block{i}.{name}.{kind}{j // 2}"])
            sub.append(g)
        return mix, sub

    def forward(self, x, keep: bool = False):
        """Apply all blocks in order; returns ``(y, tape)``."""
        x = np.asarray(x, dtype=float)
        _check_channels(x, self.spec.channels)
        tape = []
        h = x
        for mix, cpl in zip(self.mixers, self.couplings):
            h, mt = mix.forward(h)
            h, ct = cpl.forward(h)
            tape.append((mt, ct))
        if keep:
            self._cache = (x.copy(), tape)
        return h, tape

    def inverse(self, y):
        """Undo the blocks in reverse order; returns ``(x, tape)``."""
        y = np.asarray(y, dtype=float)
        _check_channels(y, self.spec.channels)
        tape = []
        h = y
        for mix, cpl in zip(reversed(self.mixers), reversed(self.couplings)):
            h, ct = cpl.inverse(h)
            h, mt = mix.inverse(h)
            tape.append((mt, ct))
        return h, tape

    def backward(self, tape, dy, grads):
        """Reverse-mode through a forward tape; accumulates into ``grads``, returns ``dx``."""
        g = dy
        for i in range(self.n_blocks - 1, -1, -1):
            mt, ct = tape[i]
            gmix, gsub = self._block_grads(grads, i)
            g = self.couplings[i].backward(ct, g, gsub)
            g = self.mixers[i].backward(mt, g, gmix)
        return g

    def inverse_backward(self, tape, dx, grads):
        """Reverse-mode through an inverse tape; returns the gradient w.r.t. the inverse's input."""
        g = dx
        n = self.n_blocks
        for step in range(n - 1, -1, -1):
            i = n - 1 - step
            mt, ct = tape[step]
            gmix, gsub = self._block_grads(grads, i)
            g = self.mixers[i].inverse_backward(mt, g, gmix)
            g = self.couplings[i].inverse_backward(ct, g, gsub)
        return g

    def mixing_product(self) -> np.ndarray:
        out = np.eye(self.spec.channels)
        for mix in self.mixers:
            out = mix.W @ out
        return out


def network_forward(net: InnNetwork, x):
    return net.forward(x, keep=True)[0]


def network_inverse(net: InnNetwork, y):
    return net.inverse(y)[0]


def network_backward(net: InnNetwork, x, dy):
    """Gradients for the most recent :func:`network_forward` call on ``x``.

    Returns ``(dx, grads)`` with ``grads`` keyed like :meth:`InnNetwork.named_params`.
    """
    if net._cache is None or not np.array_equal(net._cache[0], np.asarray(x, dtype=float)):
        raise StaleCacheError("no cached forward pass for this input; call network_forward first")
    grads = net.zero_grads()
    dx = net.backward(net._cache[1], np.asarray(dy, dtype=float), grads)
    return dx, grads
