"""Training objectives with analytic gradients w.r.t. the network output.

All losses take a channels-last real network output and a batch of true
frequency-domain channels, and return (scalar, gradient) where the gradient
has the output's shape. Complex intermediates use the Wirtinger convention
g = dL/d(conj(z)), so real-part gradients are 2*Re(g) and imaginary-part
gradients are 2*Im(g); every path below is covered by finite-difference
checks in the test suite.

Layouts:
  multi-user output  (B, N_t, K, 2U)  -> precoders (B, K, N_t, U)
  single-user output (B, N_t, K, 2)   -> refined CSI (B, N_t, K)
  true channels      (B, U, N_t, K) or (B, N_t, K)
"""

from __future__ import annotations

import logging

import numpy as np

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)


def tensor_to_complex_multi(y: np.ndarray) -> np.ndarray:
    """(B, N_t, K, 2U) real -> (B, K, N_t, U) complex precoder candidates."""
    re = y[..., 0::2]
    im = y[..., 1::2]
    return (re + 1j * im).transpose(0, 2, 1, 3)


def complex_to_tensor_grad_multi(g: np.ndarray, dtype) -> np.ndarray:
    """Wirtinger gradient (B, K, N_t, U) -> real gradient (B, N_t, K, 2U)."""
    g = g.transpose(0, 2, 1, 3)
    out = np.empty(g.shape[:-1] + (2 * g.shape[-1],), dtype)
    out[..., 0::2] = 2.0 * g.real
    out[..., 1::2] = 2.0 * g.imag
    return out


def tensor_to_complex_single(y: np.ndarray) -> np.ndarray:
    """(B, N_t, K, 2) real -> (B, N_t, K) complex."""
    return y[..., 0] + 1j * y[..., 1]


def complex_to_tensor_grad_single(g: np.ndarray, dtype) -> np.ndarray:
    out = np.empty(g.shape + (2,), dtype)
    out[..., 0] = 2.0 * g.real
    out[..., 1] = 2.0 * g.imag
    return out


def normalize_precoders(f_raw: np.ndarray, power: float):
    """Scale each (b, k) precoder matrix to the exact sum-power budget.

    Zero matrices stay zero (flagged) and contribute zero rate; returns the
    scaled precoders plus what the gradient pass needs.
    """
    energy = np.sum(np.abs(f_raw) ** 2, axis=(2, 3))  # (B, K)
    zero = energy == 0.0
    if zero.any():
        logger.warning("%d zero precoder matrix(es) mapped to zero output", zero.sum())
    safe = np.where(zero, 1.0, energy)
    t = np.where(zero, 0.0, np.sqrt(power / safe))  # (B, K)
    return f_raw * t[:, :, None, None], (t, safe, zero)


def normalize_precoders_backward(g_f, f_raw, cache):
    """Pull a Wirtinger gradient back through the power normalization."""
    t, energy, zero = cache
    inner = np.sum((np.conj(g_f) * f_raw).real, axis=(2, 3))  # dL/dt / 2
    coef = np.where(zero, 0.0, inner * t / energy)  # (B, K)
    return t[:, :, None, None] * g_f - coef[:, :, None, None] * f_raw


def sum_rate_batch(channels: np.ndarray, precoders: np.ndarray, noise_power: float):
    """Per-sample sum rates and the Wirtinger gradient of their batch mean.

    channels (B, U, N_t, K), precoders (B, K, N_t, U). Returns
    (rates (B,), g) with g = d(mean_b R_b)/d(conj(F)).
    """
    b, u = channels.shape[0], channels.shape[1]
    k = channels.shape[3]
    eff = np.einsum("bunk,bknv->bkuv", channels.conj(), precoders)
    gains = np.abs(eff) ** 2
    idx = np.arange(u)
    signal = gains[:, :, idx, idx]  # (B, K, U)
    interf = gains.sum(axis=3) - signal + noise_power
    total = signal + interf
    rates = np.log2(1.0 + signal / interf).sum(axis=(1, 2)) / k  # (B,)

    # d(mean R)/dS and d(mean R)/dI per (b, k, u)
    ds = 1.0 / (b * k * LN2 * total)
    di = -signal / (b * k * LN2 * total * interf)
    # dL/d(conj(eff_{uv})): diagonal from S_u, off-diagonal from I_u.
    g_eff = di[:, :, :, None] * eff
    g_eff[:, :, idx, idx] = ds * eff[:, :, idx, idx]
    g_f = np.einsum("bunk,bkuv->bknv", channels, g_eff)
    return rates, g_f


def loss_e2e(net_output: np.ndarray, channels: np.ndarray, power: float,
             noise_power: float):
    """Negative batch-mean sum rate of the power-normalized output precoders."""
    f_raw = tensor_to_complex_multi(net_output)
    f, cache = normalize_precoders(f_raw, power)
    rates, g_f = sum_rate_batch(channels, f, noise_power)
    g_raw = normalize_precoders_backward(-g_f, f_raw, cache)
    return -float(rates.mean()), complex_to_tensor_grad_multi(g_raw, net_output.dtype)


def single_user_rate_batch(channels: np.ndarray, csi: np.ndarray, power: float,
                           noise_power: float):
    """Per-sample single-user rates with unit-norm + sqrt(P) column scaling.

    channels, csi: (B, N_t, K). Returns (rates (B,), g) where g is the
    Wirtinger gradient of the batch-mean rate w.r.t. the raw CSI columns.
    Zero columns contribute zero rate and zero gradient.
    """
    b, _, k = channels.shape
    norms = np.linalg.norm(csi, axis=1)  # (B, K)
    zero = norms == 0.0
    safe = np.where(zero, 1.0, norms)
    scale = np.where(zero, 0.0, np.sqrt(power) / safe)  # (B, K)
    w = csi * scale[:, None, :]
    c = np.einsum("bnk,bnk->bk", channels.conj(), w)
    snr = np.abs(c) ** 2 / noise_power
    rates = np.log2(1.0 + snr).mean(axis=1)

    g_c = c / (noise_power + np.abs(c) ** 2) / (b * k * LN2)  # (B, K)
    g_w = channels * g_c[:, None, :]
    proj = np.sum((np.conj(csi) * g_w).real, axis=1)  # Re<u, g_w> per column
    g_u = scale[:, None, :] * g_w - (
        np.where(zero, 0.0, np.sqrt(power) * proj / safe**3)[:, None, :] * csi
    )
    return rates, g_u


def loss_ts_rate(net_output: np.ndarray, channels: np.ndarray, power: float,
                 noise_power: float):
    """Negative batch-mean single-user rate of the refined CSI."""
    csi = tensor_to_complex_single(net_output)
    rates, g_u = single_user_rate_batch(channels, csi, power, noise_power)
    return -float(rates.mean()), complex_to_tensor_grad_single(-g_u, net_output.dtype)


def loss_ts_recon(net_output: np.ndarray, channels: np.ndarray):
    """Batch-mean squared Frobenius distance to the normalized true channel.

    The target has unit-norm per-subcarrier columns; true columns with zero
    norm are excluded from the loss and flagged.
    """
    csi = tensor_to_complex_single(net_output)
    b = csi.shape[0]
    norms = np.linalg.norm(channels, axis=1)  # (B, K)
    zero = norms == 0.0
    if zero.any():
        logger.warning("%d zero-norm true column(s) excluded from recon loss", zero.sum())
    target = channels / np.where(zero, 1.0, norms)[:, None, :]
    diff = csi - target
    diff[np.broadcast_to(zero[:, None, :], diff.shape)] = 0.0
    loss = float(np.sum(np.abs(diff) ** 2) / b)
    return loss, complex_to_tensor_grad_single(diff / b, net_output.dtype)
