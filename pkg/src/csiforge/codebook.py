"""Standardized CSI compression: Type-I and Type-II DFT-beam codebooks.

Type-I feeds back a single oversampled DFT beam index; Type-II feeds back a
quantized linear combination of L orthogonal DFT beams with per-subband
phase/amplitude coefficients. Reports serialize to byte-aligned bitstrings
with a fully documented layout, and `overhead_bits` gives the exact bit
count of that layout.

Bit layout (MSB-first): Type-I is just the beam index. Type-II is
rotation, combinatorial beam-set index, strongest-beam position, wideband
amplitude levels, subband amplitude bits, subband phase levels.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

logger = logging.getLogger(__name__)

WIDEBAND_AMP_BITS = 3
SUBBAND_PHASE_BITS = 3
SUBBAND_AMP_BITS = 1

# Wideband amplitude alphabet: zero plus sqrt(2^-i), i = 6..0 (dB-stepped).
WIDEBAND_AMP_LEVELS = np.array(
    [0.0] + [math.sqrt(2.0 ** (-i)) for i in range(6, -1, -1)]
)
# Subband amplitude alphabet: multiplier on the wideband amplitude.
SUBBAND_AMP_LEVELS = np.array([1.0, math.sqrt(0.5)])
N_PSK = 2 ** SUBBAND_PHASE_BITS


class ReportDecodeError(ValueError):
    """Raised when a bitstring cannot be parsed into a report."""


@dataclass(frozen=True)
class CodebookConfigTypeI:
    oversampling: int = 1

    def __post_init__(self):
        if self.oversampling not in (1, 2, 4):
            raise ValueError("oversampling must be one of {1, 2, 4}")


@dataclass(frozen=True)
class CodebookConfigTypeII:
    oversampling: int = 4
    n_beams: int = 2
    n_subbands: int = 2

    def __post_init__(self):
        if self.oversampling not in (1, 2, 4):
            raise ValueError("oversampling must be one of {1, 2, 4}")
        if self.n_beams < 1:
            raise ValueError("n_beams must be >= 1")
        if self.n_subbands < 1:
            raise ValueError("n_subbands must be >= 1")


CodebookConfig = Union[CodebookConfigTypeI, CodebookConfigTypeII]


@dataclass(frozen=True)
class CsiReportTypeI:
    beam_index: int  # over the O*N_t oversampled grid


@dataclass(frozen=True)
class CsiReportTypeII:
    rotation_index: int
    beams: tuple[int, ...]          # L orthogonal beam indices, ascending
    strongest_beam: int             # position within `beams`
    wideband_amp_levels: tuple[int, ...]      # (L-1,) 3-bit levels
    subband_amp_levels: tuple[tuple[int, ...], ...]    # (N_SB, L-1) 1-bit
    subband_phase_levels: tuple[tuple[int, ...], ...]  # (N_SB, L-1) 3-bit


CsiReport = Union[CsiReportTypeI, CsiReportTypeII]


# ---------------------------------------------------------------------------
# DFT beams and subband maps

def dft_beam(beam_index: int, rotation_index: int, oversampling: int, n_tx: int) -> np.ndarray:
    """Unit-norm oversampled DFT beam; equal-rotation beams are orthogonal."""
    if not 0 <= beam_index < n_tx:
        raise ValueError(f"beam_index {beam_index} out of range [0, {n_tx})")
    if not 0 <= rotation_index < oversampling:
        raise ValueError(
            f"rotation_index {rotation_index} out of range [0, {oversampling})"
        )
    n = np.arange(n_tx)
    phase = 2 * np.pi * n * (beam_index + rotation_index / oversampling) / n_tx
    return np.exp(1j * phase) / math.sqrt(n_tx)


def beam_matrix(rotation_index: int, oversampling: int, n_tx: int) -> np.ndarray:
    """All N_t orthogonal beams of one rotation as columns, (N_t, N_t)."""
    n = np.arange(n_tx)
    b = np.arange(n_tx) + rotation_index / oversampling
    return np.exp(2j * np.pi * np.outer(n, b) / n_tx) / math.sqrt(n_tx)


def flat_beam_index(beam: int, rotation: int, oversampling: int) -> int:
    """Type-I index over the O*N_t oversampled grid, ordered by angle."""
    return beam * oversampling + rotation


def build_subband_map(k_subcarriers: int, n_subbands: int) -> np.ndarray:
    """Subband index per subcarrier: contiguous, maximally equal blocks."""
    if n_subbands > k_subcarriers:
        raise ValueError("more subbands than subcarriers")
    return (np.arange(k_subcarriers) * n_subbands) // k_subcarriers


# ---------------------------------------------------------------------------
# Type-I

def typeI_encode(est_channel: np.ndarray, config: CodebookConfigTypeI) -> CsiReportTypeI:
    """Pick the oversampled beam maximizing total captured power.

    Exhaustive over all O*N_t beams; ties broken by lowest index. A zero
    channel falls back to beam 0 with a warning.
    """
    n_tx = est_channel.shape[0]
    o = config.oversampling
    if not np.any(est_channel):
        logger.warning("Type-I encode on zero channel; returning beam 0")
        return CsiReportTypeI(beam_index=0)
    grid = np.hstack(
        [beam_matrix(r, o, n_tx) for r in range(o)]
    )  # columns ordered (rotation-major within hstack)
    # Reorder columns to the flat (beam, rotation) index convention.
    order = np.argsort([flat_beam_index(b, r, o) for r in range(o) for b in range(n_tx)])
    grid = grid[:, order]
    power = np.sum(np.abs(grid.conj().T @ est_channel) ** 2, axis=1)
    return CsiReportTypeI(beam_index=int(np.argmax(power)))


def typeI_decode(
    report: CsiReportTypeI, config: CodebookConfigTypeI, n_tx: int, n_subbands: int = 1
) -> np.ndarray:
    """Every subband column equals the selected unit-norm beam; (N_t, N_SB)."""
    beam, rot = divmod(report.beam_index, config.oversampling)
    w = dft_beam(beam, rot, config.oversampling, n_tx)
    return np.tile(w[:, None], (1, n_subbands))


# ---------------------------------------------------------------------------
# Type-II

def _quantize_nearest(values: np.ndarray, levels: np.ndarray) -> np.ndarray:
    return np.argmin(np.abs(values[..., None] - levels[None, ...]), axis=-1)


def _quantize_phase(angles: np.ndarray) -> np.ndarray:
    return np.round(angles / (2 * np.pi) * N_PSK).astype(int) % N_PSK


def typeII_encode(
    est_channel: np.ndarray,
    config: CodebookConfigTypeII,
    subband_map: np.ndarray,
) -> CsiReportTypeII:
    """Greedy Type-II compression of an (N_t, K) channel estimate.

    Steps: average the channel per subband; for each rotation project onto
    that rotation's orthogonal beam set and keep the rotation whose top-L
    beams capture the most power; quantize per-beam wideband amplitudes
    (RMS over subbands, relative to the strongest beam) and per-subband
    relative coefficients (8-PSK phase plus a 1-bit amplitude multiplier on
    the wideband amplitude). All ties break toward the lowest index.
    """
    n_tx, k = est_channel.shape
    o, n_beams, n_sb = config.oversampling, config.n_beams, config.n_subbands
    if n_beams > n_tx:
        raise ValueError("n_beams must not exceed n_tx")

    if not np.any(est_channel):
        logger.warning("Type-II encode on zero channel; returning default report")
        return CsiReportTypeII(
            rotation_index=0,
            beams=tuple(range(n_beams)),
            strongest_beam=0,
            wideband_amp_levels=(0,) * (n_beams - 1),
            subband_amp_levels=tuple((0,) * (n_beams - 1) for _ in range(n_sb)),
            subband_phase_levels=tuple((0,) * (n_beams - 1) for _ in range(n_sb)),
        )

    # Per-subband average channels g_s, (N_t, N_SB).
    g = np.stack(
        [est_channel[:, subband_map == s].mean(axis=1) for s in range(n_sb)], axis=1
    )

    best = None
    for r in range(o):
        proj = beam_matrix(r, o, n_tx).conj().T @ g  # (N_t, N_SB)
        power = np.sum(np.abs(proj) ** 2, axis=1)
        top = np.sort(np.argsort(-power, kind="stable")[:n_beams])
        captured = power[top].sum()
        if best is None or captured > best[0] + 0.0:
            best = (captured, r, tuple(int(b) for b in top), proj[top, :])
    _, rotation, beams, proj = best  # proj: (L, N_SB) projections of kept beams

    rms = np.sqrt(np.mean(np.abs(proj) ** 2, axis=1))  # (L,)
    strongest = int(np.argmax(rms))
    ref = rms[strongest]

    companions = [l for l in range(n_beams) if l != strongest]
    wb_levels = _quantize_nearest(rms[companions] / ref, WIDEBAND_AMP_LEVELS)

    wb_amp = np.empty(n_beams)
    wb_amp[strongest] = 1.0
    wb_amp[companions] = WIDEBAND_AMP_LEVELS[wb_levels]

    sb_amp, sb_phase = [], []
    for s in range(n_sb):
        ref_proj = proj[strongest, s]
        amps, phases = [], []
        for l in companions:
            if ref_proj == 0 or wb_amp[l] == 0:
                c = 0.0 + 0.0j
            else:
                c = proj[l, s] / ref_proj / wb_amp[l]
            amps.append(int(_quantize_nearest(np.abs(np.array([c])), SUBBAND_AMP_LEVELS)[0]))
            phases.append(int(_quantize_phase(np.angle(np.array([c])))[0]))
        sb_amp.append(tuple(amps))
        sb_phase.append(tuple(phases))

    return CsiReportTypeII(
        rotation_index=rotation,
        beams=beams,
        strongest_beam=strongest,
        wideband_amp_levels=tuple(int(v) for v in wb_levels),
        subband_amp_levels=tuple(sb_amp),
        subband_phase_levels=tuple(sb_phase),
    )


def typeII_decode(
    report: CsiReportTypeII, config: CodebookConfigTypeII, n_tx: int
) -> np.ndarray:
    """Reconstruct the (N_t, N_SB) CSI as beams x wideband amps x subband
    coefficients, with each subband column normalized to unit norm.

    A column that is exactly zero before normalization is left as zeros and
    flagged in the log.
    """
    n_beams, n_sb = config.n_beams, config.n_subbands
    w1 = np.stack(
        [dft_beam(b, report.rotation_index, config.oversampling, n_tx) for b in report.beams],
        axis=1,
    )  # (N_t, L)

    wb_amp = np.empty(n_beams)
    wb_amp[report.strongest_beam] = 1.0
    companions = [l for l in range(n_beams) if l != report.strongest_beam]
    wb_amp[companions] = WIDEBAND_AMP_LEVELS[list(report.wideband_amp_levels)]

    coeff = np.zeros((n_beams, n_sb), dtype=np.complex128)
    coeff[report.strongest_beam, :] = 1.0
    for s in range(n_sb):
        for j, l in enumerate(companions):
            amp = SUBBAND_AMP_LEVELS[report.subband_amp_levels[s][j]]
            phase = 2 * np.pi * report.subband_phase_levels[s][j] / N_PSK
            coeff[l, s] = amp * np.exp(1j * phase)

    w = w1 @ (np.diag(wb_amp) @ coeff)  # (N_t, N_SB)
    norms = np.linalg.norm(w, axis=0)
    zero = norms == 0.0
    if zero.any():
        logger.warning("Type-II decode produced %d zero subband column(s)", zero.sum())
        norms = np.where(zero, 1.0, norms)
    return w / norms


def subband_to_subcarrier(w: np.ndarray, subband_map: np.ndarray) -> np.ndarray:
    """Expand (N_t, N_SB) subband CSI to (N_t, K) by subband assignment."""
    return w[:, subband_map]


# ---------------------------------------------------------------------------
# Bit packing

def _combo_rank(beams: tuple[int, ...], n: int) -> int:
    """Lexicographic rank of an ascending k-subset of range(n)."""
    k = len(beams)
    rank = 0
    prev = -1
    for i, b in enumerate(beams):
        for c in range(prev + 1, b):
            rank += math.comb(n - 1 - c, k - 1 - i)
        prev = b
    return rank


def _combo_unrank(rank: int, n: int, k: int) -> tuple[int, ...]:
    beams = []
    c = 0
    for i in range(k):
        while True:
            block = math.comb(n - 1 - c, k - 1 - i)
            if rank < block:
                beams.append(c)
                c += 1
                break
            rank -= block
            c += 1
    return tuple(beams)


class _BitWriter:
    def __init__(self):
        self.bits: list[int] = []

    def write(self, value: int, n_bits: int):
        if not 0 <= value < (1 << n_bits):
            raise ValueError(f"value {value} does not fit in {n_bits} bits")
        for i in range(n_bits - 1, -1, -1):
            self.bits.append((value >> i) & 1)

    def to_bytes(self) -> bytes:
        bits = self.bits + [0] * (-len(self.bits) % 8)
        out = bytearray()
        for i in range(0, len(bits), 8):
            byte = 0
            for b in bits[i : i + 8]:
                byte = (byte << 1) | b
            out.append(byte)
        return bytes(out)


class _BitReader:
    def __init__(self, data: bytes, n_bits: int):
        if len(data) * 8 < n_bits:
            raise ReportDecodeError(
                f"bitstring too short: {len(data) * 8} bits, need {n_bits}"
            )
        self.data = data
        self.pos = 0

    def read(self, n_bits: int) -> int:
        value = 0
        for _ in range(n_bits):
            byte = self.data[self.pos // 8]
            value = (value << 1) | ((byte >> (7 - self.pos % 8)) & 1)
            self.pos += 1
        return value


def _bits(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 0


def overhead_bits(config: CodebookConfig, n_tx: int) -> int:
    """Exact bit count of the documented packing scheme."""
    if isinstance(config, CodebookConfigTypeI):
        return math.ceil(math.log2(config.oversampling * n_tx))
    l, n_sb = config.n_beams, config.n_subbands
    return (
        _bits(config.oversampling)
        + _bits(math.comb(n_tx, l))
        + _bits(l)
        + WIDEBAND_AMP_BITS * (l - 1)
        + n_sb * (l - 1) * (SUBBAND_AMP_BITS + SUBBAND_PHASE_BITS)
    )


def pack_bits(report: CsiReport, config: CodebookConfig, n_tx: int) -> bytes:
    """Serialize a report MSB-first; trailing byte zero-padded."""
    w = _BitWriter()
    if isinstance(report, CsiReportTypeI):
        w.write(report.beam_index, overhead_bits(config, n_tx))
        return w.to_bytes()
    l, n_sb = config.n_beams, config.n_subbands
    w.write(report.rotation_index, _bits(config.oversampling))
    w.write(_combo_rank(report.beams, n_tx), _bits(math.comb(n_tx, l)))
    w.write(report.strongest_beam, _bits(l))
    for level in report.wideband_amp_levels:
        w.write(level, WIDEBAND_AMP_BITS)
    for s in range(n_sb):
        for level in report.subband_amp_levels[s]:
            w.write(level, SUBBAND_AMP_BITS)
    for s in range(n_sb):
        for level in report.subband_phase_levels[s]:
            w.write(level, SUBBAND_PHASE_BITS)
    return w.to_bytes()


def unpack_bits(data: bytes, config: CodebookConfig, n_tx: int) -> CsiReport:
    """Inverse of `pack_bits`; raises ReportDecodeError on a length mismatch."""
    n_bits = overhead_bits(config, n_tx)
    if len(data) != (n_bits + 7) // 8:
        raise ReportDecodeError(
            f"expected {(n_bits + 7) // 8} bytes for {n_bits} bits, got {len(data)}"
        )
    r = _BitReader(data, n_bits)
    if isinstance(config, CodebookConfigTypeI):
        beam = r.read(n_bits)
        if beam >= config.oversampling * n_tx:
            raise ReportDecodeError(f"beam index {beam} out of range")
        return CsiReportTypeI(beam_index=beam)
    l, n_sb = config.n_beams, config.n_subbands
    rotation = r.read(_bits(config.oversampling))
    rank = r.read(_bits(math.comb(n_tx, l)))
    if rank >= math.comb(n_tx, l):
        raise ReportDecodeError(f"beam combination rank {rank} out of range")
    beams = _combo_unrank(rank, n_tx, l)
    strongest = r.read(_bits(l))
    if strongest >= l:
        raise ReportDecodeError(f"strongest-beam position {strongest} out of range")
    wb = tuple(r.read(WIDEBAND_AMP_BITS) for _ in range(l - 1))
    sb_amp = tuple(
        tuple(r.read(SUBBAND_AMP_BITS) for _ in range(l - 1)) for _ in range(n_sb)
    )
    sb_phase = tuple(
        tuple(r.read(SUBBAND_PHASE_BITS) for _ in range(l - 1)) for _ in range(n_sb)
    )
    return CsiReportTypeII(
        rotation_index=rotation,
        beams=beams,
        strongest_beam=strongest,
        wideband_amp_levels=wb,
        subband_amp_levels=sb_amp,
        subband_phase_levels=sb_phase,
    )


def encode(est_channel: np.ndarray, config: CodebookConfig, subband_map: np.ndarray) -> CsiReport:
    """Variant dispatch used by the pipeline."""
    if isinstance(config, CodebookConfigTypeI):
        return typeI_encode(est_channel, config)
    return typeII_encode(est_channel, config, subband_map)


def decode(report: CsiReport, config: CodebookConfig, n_tx: int, n_subbands: int) -> np.ndarray:
    if isinstance(config, CodebookConfigTypeI):
        return typeI_decode(report, config, n_tx, n_subbands)
    return typeII_decode(report, config, n_tx)


def describe_report(report: CsiReport, config: CodebookConfig, n_tx: int) -> str:
    """Human-readable field-by-field dump, used by the debug CLI."""
    lines = [f"overhead_bits: {overhead_bits(config, n_tx)}"]
    if isinstance(report, CsiReportTypeI):
        beam, rot = divmod(report.beam_index, config.oversampling)
        lines += [
            f"variant: Type-I (oversampling {config.oversampling})",
            f"beam_index: {report.beam_index} (beam {beam}, rotation {rot})",
        ]
    else:
        lines += [
            f"variant: Type-II (O={config.oversampling}, L={config.n_beams}, "
            f"N_SB={config.n_subbands})",
            f"rotation_index: {report.rotation_index}",
            f"beams: {list(report.beams)}",
            f"strongest_beam: {report.strongest_beam}",
            f"wideband_amp_levels: {list(report.wideband_amp_levels)}",
            f"subband_amp_levels: {[list(s) for s in report.subband_amp_levels]}",
            f"subband_phase_levels: {[list(s) for s in report.subband_phase_levels]}",
        ]
    return "\n".join(lines)
