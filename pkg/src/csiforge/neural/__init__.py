"""From-scratch differentiable layer, refiner/benchmark nets, losses, Adam."""

from __future__ import annotations

import numpy as np

from .layers import (  # noqa: F401
    Conv2d,
    Dense,
    Flatten,
    LeakyReLU,
    Parameter,
    Sequential,
    SteBinarize,
    Tanh,
)
from .models import (  # noqa: F401
    EncoderDecoderNet,
    RefinerNet,
    get_flat_params,
    set_flat_params,
    zero_grads,
)
from .optim import Adam  # noqa: F401
from .losses import (  # noqa: F401
    loss_e2e,
    loss_ts_rate,
    loss_ts_recon,
    normalize_precoders,
    sum_rate_batch,
    single_user_rate_batch,
    tensor_to_complex_multi,
    tensor_to_complex_single,
)


def complex_to_tensor(channels: np.ndarray) -> np.ndarray:
    """(U, N_t, K) complex -> (2U, N_t, K) real; channel 2u is the real part
    of user u and channel 2u+1 the imaginary part."""
    u, n_tx, k = channels.shape
    out = np.empty((2 * u, n_tx, k))
    out[0::2] = channels.real
    out[1::2] = channels.imag
    return out


def tensor_to_complex(tensor: np.ndarray) -> np.ndarray:
    """Exact inverse of `complex_to_tensor`."""
    return tensor[0::2] + 1j * tensor[1::2]


def to_net_layout(tensor: np.ndarray) -> np.ndarray:
    """Channel-first (..., 2U, N_t, K) -> channels-last (..., N_t, K, 2U)."""
    return np.moveaxis(tensor, -3, -1)


def from_net_layout(tensor: np.ndarray) -> np.ndarray:
    return np.moveaxis(tensor, -1, -3)


def batch_to_net_input(channels: np.ndarray, dtype=np.float64) -> np.ndarray:
    """(B, U, N_t, K) complex -> (B, N_t, K, 2U) real network input."""
    b, u, n_tx, k = channels.shape
    out = np.empty((b, n_tx, k, 2 * u), dtype)
    moved = np.moveaxis(channels, 1, -1)  # (B, N_t, K, U)
    out[..., 0::2] = moved.real
    out[..., 1::2] = moved.imag
    return out


def refiner_forward(net: RefinerNet, x: np.ndarray) -> np.ndarray:
    """Run the refiner on a channel-first (2U, N_t, K) tensor."""
    if x.ndim != 3 or x.shape[0] != 2 * net.n_users:
        raise ValueError(f"expected (2U, N_t, K) input, got {x.shape}")
    y = net.forward(to_net_layout(x.astype(net.dtype))[None])
    return from_net_layout(y[0])
