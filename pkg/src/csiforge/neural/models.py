"""Network architectures: the CSI refiner and the learned-encoder benchmark.

The refiner is five residual blocks, each conv(C->16) + LeakyReLU,
conv(16->32) + LeakyReLU, conv(32->C) + Tanh with an additive skip from the
block input, so a zero-initialized refiner is exactly the identity map.
The benchmark pairs a per-user convolutional encoder with sign binarization
(straight-through gradient) and a dense decoder feeding a refiner.
"""

from __future__ import annotations

import numpy as np

from .layers import (
    Conv2d,
    Dense,
    Flatten,
    Layer,
    LeakyReLU,
    Parameter,
    Sequential,
    SteBinarize,
    Tanh,
)

REFINER_HIDDEN = (16, 32)
REFINER_BLOCKS = 5
ENCODER_WIDTHS = (8, 8, 16, 16, 32, 32)  # stride 2 on every second block


INIT_MODES = ("random", "zero", "identity")


class RefinerBlock(Layer):
    def __init__(self, channels, init, rng, dtype):
        h1, h2 = REFINER_HIDDEN
        zero_all = init == "zero"
        # "identity" zero-initializes only the last conv of the residual
        # path: the block starts as the identity map, yet every layer
        # receives a useful gradient from the first step on.
        zero_last = init in ("zero", "identity")
        self.path = Sequential([
            Conv2d(channels, h1, zero_init=zero_all, rng=rng, dtype=dtype),
            LeakyReLU(),
            Conv2d(h1, h2, zero_init=zero_all, rng=rng, dtype=dtype),
            LeakyReLU(),
            Conv2d(h2, channels, zero_init=zero_last, rng=rng, dtype=dtype),
            Tanh(),
        ])

    def params(self):
        return self.path.params()

    def forward(self, x):
        return x + self.path.forward(x)

    def backward(self, grad):
        path_grad = self.path.backward(grad)
        if path_grad is None:
            # First conv of the whole net skips its input gradient; the
            # block input gradient is then unusable by construction.
            return None
        return grad + path_grad


class RefinerNet(Layer):
    """Stack of residual refining blocks over a (B, N_t, K, 2U) tensor."""

    def __init__(self, n_users, init="identity", rng=None, dtype=np.float64,
                 n_blocks=REFINER_BLOCKS):
        if init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}")
        if rng is None and init != "zero":
            raise ValueError(f"init={init!r} requires an rng")
        self.n_users = n_users
        self.dtype = np.dtype(dtype)
        self.blocks = [
            RefinerBlock(2 * n_users, init, rng, self.dtype)
            for _ in range(n_blocks)
        ]
        # The first conv of the first block never needs an input gradient.
        self.blocks[0].path.layers[0]._need_input_grad = False

    def params(self):
        return [p for b in self.blocks for p in b.params()]

    def forward(self, x):
        for b in self.blocks:
            x = b.forward(x)
        return x

    def backward(self, grad):
        for b in reversed(self.blocks):
            grad = b.backward(grad)
        return grad

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.params())

    def architecture(self) -> dict:
        return {
            "kind": "refiner",
            "n_users": self.n_users,
            "n_blocks": len(self.blocks),
            "hidden": list(REFINER_HIDDEN),
        }


class EncoderDecoderNet(Layer):
    """Learned per-user encoder to B bits plus a dense decoder and refiner.

    The encoder (shared across users) runs on each user's 2-channel CSI
    tensor; its B logits are binarized by `SteBinarize`. The decoder maps
    the concatenated U*B bits back to a (N_t, K, 2U) tensor and refines it.
    Input/output layout matches `RefinerNet` plus a leading user axis on
    the encoder side: forward takes (B, U, N_t, K, 2).
    """

    def __init__(self, n_users, n_tx, n_subcarriers, feedback_bits,
                 rng=None, dtype=np.float64):
        self.n_users = n_users
        self.n_tx, self.n_subcarriers = n_tx, n_subcarriers
        self.feedback_bits = feedback_bits
        self.dtype = np.dtype(dtype)

        layers = []
        c_prev = 2
        h, w = n_tx, n_subcarriers
        for i, width in enumerate(ENCODER_WIDTHS):
            stride = 2 if i % 2 == 1 else 1
            conv = Conv2d(c_prev, width, stride=stride, rng=rng, dtype=self.dtype)
            if i == 0:
                conv._need_input_grad = False
            layers += [conv, LeakyReLU()]
            h, w = conv.out_shape(h, w)
            c_prev = width
        layers.append(Flatten())
        layers.append(Dense(h * w * c_prev, feedback_bits, rng=rng, dtype=self.dtype))
        self.encoder = Sequential(layers)
        self.binarize = SteBinarize()
        self.decoder_dense = Dense(
            n_users * feedback_bits,
            n_tx * n_subcarriers * 2 * n_users,
            rng=rng,
            dtype=self.dtype,
        )
        self.refiner = RefinerNet(n_users, init="identity", rng=rng, dtype=self.dtype)
        # Unlike a standalone refiner, this one has layers below it that
        # need the gradient w.r.t. its input.
        self.refiner.blocks[0].path.layers[0]._need_input_grad = True

    def params(self):
        return (
            self.encoder.params()
            + self.decoder_dense.params()
            + self.refiner.params()
        )

    def forward(self, x):
        b, u = x.shape[0], x.shape[1]
        flat_users = x.reshape(b * u, self.n_tx, self.n_subcarriers, 2)
        logits = self.encoder.forward(flat_users)  # (B*U, bits)
        bits = self.binarize.forward(logits)
        code = bits.reshape(b, u * self.feedback_bits)
        dec = self.decoder_dense.forward(code)
        dec = dec.reshape(b, self.n_tx, self.n_subcarriers, 2 * u)
        return self.refiner.forward(dec)

    def backward(self, grad):
        b = grad.shape[0]
        u = self.n_users
        g = self.refiner.backward(grad)
        g = self.decoder_dense.backward(g.reshape(b, -1))
        g = self.binarize.backward(g.reshape(b * u, self.feedback_bits))
        g = self.encoder.backward(g)
        if g is None:
            return None
        return g.reshape(b, u, self.n_tx, self.n_subcarriers, 2)

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.params())

    def architecture(self) -> dict:
        return {
            "kind": "encdec",
            "n_users": self.n_users,
            "n_tx": self.n_tx,
            "n_subcarriers": self.n_subcarriers,
            "feedback_bits": self.feedback_bits,
            "encoder_widths": list(ENCODER_WIDTHS),
        }


def get_flat_params(net: Layer) -> np.ndarray:
    return np.concatenate([p.value.ravel() for p in net.params()]).astype(np.float64)


def set_flat_params(net: Layer, flat: np.ndarray):
    offset = 0
    for p in net.params():
        n = p.size
        p.value[...] = flat[offset : offset + n].reshape(p.value.shape)
        offset += n
    if offset != flat.size:
        raise ValueError(f"parameter count mismatch: {offset} != {flat.size}")


def zero_grads(net: Layer):
    for p in net.params():
        p.grad[...] = 0.0
