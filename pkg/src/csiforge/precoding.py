"""Zero-forcing precoding and spectral-efficiency metrics.

All functions are pure and operate on stacked per-user frequency-domain
channels of shape (U, N_t, K). Precoder sets are (K, N_t, U) arrays: one
N_t x U matrix per subcarrier under a sum-power budget P.
"""

from __future__ import annotations

import logging

import numpy as np

logger = logging.getLogger(__name__)

ZF_REG_SCALE = 1e-12


def zero_forcing(channels: np.ndarray, power: float) -> np.ndarray:
    """Per-subcarrier zero-forcing directions with equal per-user power.

    channels: (U, N_t, K) complex. Returns (K, N_t, U) with
    Tr(F_k F_k^H) = P exactly when every user column is non-degenerate.
    Directions come from a Tikhonov-regularized pseudo-inverse; a user
    column that collapses to zero (rank deficiency beyond the regularizer)
    is left at zero and flagged.
    """
    u, n_tx, k = channels.shape
    if u > n_tx:
        raise ValueError("zero-forcing requires U <= N_t")
    h = channels.transpose(2, 1, 0)  # (K, N_t, U)
    gram = h.conj().transpose(0, 2, 1) @ h  # (K, U, U)
    scale = np.einsum("kuu->k", gram).real / u  # mean per-user channel energy
    eps = ZF_REG_SCALE * np.maximum(scale, np.finfo(float).tiny)
    gram = gram + eps[:, None, None] * np.eye(u)
    directions = h @ np.linalg.inv(gram)  # (K, N_t, U)

    norms = np.linalg.norm(directions, axis=1, keepdims=True)  # (K, 1, U)
    zero = norms == 0.0
    if zero.any():
        logger.warning("zero-forcing produced %d degenerate user column(s)", zero.sum())
    safe = np.where(zero, 1.0, norms)
    return directions / safe * np.where(zero, 0.0, np.sqrt(power / u))


def sum_rate(channels: np.ndarray, precoders: np.ndarray, noise_power: float) -> float:
    """Average downlink sum rate in bits/s/Hz.

    channels: (U, N_t, K); precoders: (K, N_t, U). Treats inter-user leakage
    as noise per user and subcarrier, then averages over subcarriers.
    """
    if noise_power <= 0:
        raise ValueError("noise_power must be positive")
    # eff[k, u, v] = h_{k,u}^H f_{k,v}
    eff = np.einsum("unk,knv->kuv", channels.conj(), precoders)
    gains = np.abs(eff) ** 2
    k, u = gains.shape[0], gains.shape[1]
    signal = gains[:, np.arange(u), np.arange(u)]
    interference = gains.sum(axis=2) - signal
    sinr = signal / (interference + noise_power)
    return float(np.log2(1.0 + sinr).sum() / k)


def single_user_rate(
    channel: np.ndarray, csi: np.ndarray, power: float, noise_power: float
) -> float:
    """Rate of one user served alone by its (refined) CSI columns.

    channel, csi: (N_t, K). Each CSI column is normalized to unit norm and
    scaled by sqrt(P) before evaluation, so the metric shares the sum-power
    budget with the multi-user path. Zero columns contribute zero rate.
    """
    norms = np.linalg.norm(csi, axis=0)
    safe = np.where(norms == 0.0, 1.0, norms)
    w = csi / safe * np.where(norms == 0.0, 0.0, np.sqrt(power))
    gains = np.abs(np.einsum("nk,nk->k", channel.conj(), w)) ** 2
    return float(np.log2(1.0 + gains / noise_power).mean())


def genie_zf_rate(channels: np.ndarray, power: float, noise_power: float) -> float:
    """Zero-forcing on the true channels: the evaluation ceiling."""
    return sum_rate(channels, zero_forcing(channels, power), noise_power)
