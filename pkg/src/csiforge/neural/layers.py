"""Differentiable building blocks with explicit forward and backward passes.

Layers operate on channels-last real arrays (batch, height, width, channels)
for cache-friendly convolution via strided views; no autograd graph exists
beyond the fixed architectures in `models`. Every layer caches what its
backward pass needs, and `backward(grad)` both accumulates parameter
gradients and returns the gradient w.r.t. its input.
"""

from __future__ import annotations

import math

import numpy as np

LEAKY_SLOPE = 0.2


class Parameter:
    """A trainable array with a matching gradient buffer."""

    def __init__(self, value: np.ndarray):
        self.value = value
        self.grad = np.zeros_like(value)

    @property
    def size(self) -> int:
        return self.value.size


class Layer:
    def params(self) -> list[Parameter]:
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _glorot_uniform(shape, fan_in, fan_out, rng, dtype):
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, shape).astype(dtype)


class Conv2d(Layer):
    """3x3 (by default) convolution with zero padding, optional stride.

    Kernel layout (kh, kw, c_in, c_out). Implemented as a sum of shifted
    batched matmuls over the kernel footprint, which keeps the work inside
    BLAS without materializing an im2col buffer.
    """

    def __init__(self, c_in, c_out, kernel_size=3, stride=1, pad=1,
                 zero_init=False, rng=None, dtype=np.float64):
        self.c_in, self.c_out = c_in, c_out
        self.k, self.stride, self.pad = kernel_size, stride, pad
        fan = kernel_size * kernel_size
        if zero_init:
            kernel = np.zeros((kernel_size, kernel_size, c_in, c_out), dtype)
        else:
            kernel = _glorot_uniform(
                (kernel_size, kernel_size, c_in, c_out),
                fan * c_in, fan * c_out, rng, dtype,
            )
        self.kernel = Parameter(kernel)
        self.bias = Parameter(np.zeros(c_out, dtype))
        self._xp = None
        self._need_input_grad = True

    def params(self):
        return [self.kernel, self.bias]

    def out_shape(self, h, w):
        k, s, p = self.k, self.stride, self.pad
        return (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1

    def forward(self, x):
        b, h, w, _ = x.shape
        p, s, k = self.pad, self.stride, self.k
        xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else x
        self._xp = xp
        self._in_shape = x.shape
        ho, wo = self.out_shape(h, w)
        out = np.empty((b, ho, wo, self.c_out), x.dtype)
        out[:] = self.bias.value
        kv = self.kernel.value
        for dy in range(k):
            for dx in range(k):
                xs = xp[:, dy : dy + s * ho : s, dx : dx + s * wo : s, :]
                out += xs @ kv[dy, dx]
        return out

    def backward(self, grad):
        if self._xp is None:
            raise RuntimeError("backward called before forward")
        xp = self._xp
        b, h, w, _ = self._in_shape
        p, s, k = self.pad, self.stride, self.k
        ho, wo = grad.shape[1], grad.shape[2]
        kv = self.kernel.value

        self.bias.grad += grad.sum(axis=(0, 1, 2))
        for dy in range(k):
            for dx in range(k):
                xs = xp[:, dy : dy + s * ho : s, dx : dx + s * wo : s, :]
                # (B, Ho, Cin, Wo) @ (B, Ho, Wo, Cout), summed over batch/space
                self.kernel.grad[dy, dx] += np.matmul(
                    xs.transpose(0, 1, 3, 2), grad
                ).sum(axis=(0, 1))
        self._xp = None
        if not self._need_input_grad:
            return None

        if s == 1 and p * 2 == k - 1:
            # Stride-1 'same' case: the input gradient is itself a 'same'
            # convolution of the output gradient with the flipped,
            # transposed kernel, accumulated into a contiguous buffer.
            gp = np.pad(grad, ((0, 0), (p, p), (p, p), (0, 0)))
            gx = np.zeros(self._in_shape, grad.dtype)
            for dy in range(k):
                for dx in range(k):
                    sy, sx = k - 1 - dy, k - 1 - dx
                    gx += gp[:, sy : sy + h, sx : sx + w, :] @ kv[dy, dx].T
            return gx

        gxp = np.zeros((b, h + 2 * p, w + 2 * p, self.c_in), grad.dtype)
        for dy in range(k):
            for dx in range(k):
                gxp[:, dy : dy + s * ho : s, dx : dx + s * wo : s, :] += (
                    grad @ kv[dy, dx].T
                )
        return gxp[:, p : p + h, p : p + w, :] if p else gxp


class Dense(Layer):
    def __init__(self, n_in, n_out, zero_init=False, rng=None, dtype=np.float64):
        if zero_init:
            weight = np.zeros((n_in, n_out), dtype)
        else:
            weight = _glorot_uniform((n_in, n_out), n_in, n_out, rng, dtype)
        self.weight = Parameter(weight)
        self.bias = Parameter(np.zeros(n_out, dtype))
        self._x = None

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        self._x = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad):
        if self._x is None:
            raise RuntimeError("backward called before forward")
        self.weight.grad += self._x.T @ grad
        self.bias.grad += grad.sum(axis=0)
        self._x = None
        return grad @ self.weight.value.T


class LeakyReLU(Layer):
    def __init__(self, slope=LEAKY_SLOPE):
        self.slope = slope
        self._factor = None

    def forward(self, x):
        self._factor = np.where(x < 0, x.dtype.type(self.slope), x.dtype.type(1.0))
        return x * self._factor

    def backward(self, grad):
        factor, self._factor = self._factor, None
        return grad * factor


class Tanh(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x):
        self._y = np.tanh(x)
        return self._y

    def backward(self, grad):
        y, self._y = self._y, None
        return grad * (1.0 - y * y)


class Flatten(Layer):
    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class SteBinarize(Layer):
    """Sign binarization with a hard-tanh straight-through gradient.

    Forward maps to {-1, +1} (zero goes to +1); backward passes the
    upstream gradient unchanged where |input| <= 1 and blocks it outside.
    """

    def __init__(self):
        self._pass = None

    def forward(self, x):
        self._pass = np.abs(x) <= 1.0
        return np.where(x >= 0, 1.0, -1.0).astype(x.dtype)

    def backward(self, grad):
        mask, self._pass = self._pass, None
        return grad * mask


class Sequential(Layer):
    def __init__(self, layers):
        self.layers = list(layers)

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad
