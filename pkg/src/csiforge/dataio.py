"""Binary persistence and report emission.

Formats (all little-endian, CRC32-terminated):

Dataset file ("CSIF"): header {magic, version u32, n_tx, k, d, u, n_samples
(all u32), scenario hash (32 bytes)}, then per record and user the tap
matrix (d x n_tx), the frequency matrix (n_tx x k), and finally the u
estimate matrices (n_tx x k), each as interleaved (re, im) float64. A
sidecar JSON file (path + ".json") holds the full scenario configuration.

Checkpoint file ("CSIW"): header {magic, version u32, architecture JSON
length u32 + bytes}, parameter count u64, parameters as float64 in layer
order, CRC32.

Reports: CSV plus a gnuplot-compatible .dat (one block per method, rate vs
overhead); emission is deterministic so re-emitting a report reproduces
byte-identical files.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from pathlib import Path
from typing import Union

import numpy as np

from .channel import Dataset, DatasetRecord, ScenarioConfig, UserChannel
from .neural.models import (
    EncoderDecoderNet,
    RefinerNet,
    get_flat_params,
    set_flat_params,
)
from .training import EvalReport, EvalRow

DATASET_MAGIC = b"CSIF"
DATASET_VERSION = 1
CHECKPOINT_MAGIC = b"CSIW"
CHECKPOINT_VERSION = 1


class DataFormatError(ValueError):
    """Base class for persistence format failures."""


class MagicError(DataFormatError):
    pass


class VersionError(DataFormatError):
    pass


class CrcError(DataFormatError):
    pass


def _complex_bytes(a: np.ndarray) -> bytes:
    """Interleaved (re, im) float64, little-endian, C order."""
    flat = np.ascontiguousarray(a, dtype=np.complex128).ravel()
    out = np.empty(flat.size * 2, dtype="<f8")
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out.tobytes()


def _complex_from(buf: memoryview, shape: tuple[int, ...]) -> np.ndarray:
    n = int(np.prod(shape))
    raw = np.frombuffer(buf[: n * 16], dtype="<f8")
    return (raw[0::2] + 1j * raw[1::2]).reshape(shape).astype(np.complex128)


def _check_trailer(data: bytes, kind: str) -> bytes:
    """Validate the trailing CRC32; return the payload without it."""
    if len(data) < 4:
        raise CrcError(f"{kind} file truncated before checksum")
    payload, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(payload) != crc:
        raise CrcError(f"{kind} checksum mismatch (truncated or corrupt file)")
    return payload


# ---------------------------------------------------------------------------
# Datasets

def save_dataset(dataset: Dataset, path: Union[str, Path]) -> None:
    path = Path(path)
    scenario = dataset.scenario
    n = len(dataset.records)
    u = dataset.n_users
    chunks = [
        DATASET_MAGIC,
        struct.pack(
            "<6I",
            DATASET_VERSION,
            scenario.n_tx,
            scenario.n_subcarriers,
            scenario.n_taps,
            u,
            n,
        ),
        scenario.hash_bytes(),
    ]
    for record in dataset.records:
        for uc in record.user_channels:
            chunks.append(_complex_bytes(uc.taps))
            chunks.append(_complex_bytes(uc.freq))
        for est in record.estimated_channels:
            chunks.append(_complex_bytes(est))
    payload = b"".join(chunks)
    path.write_bytes(payload + struct.pack("<I", zlib.crc32(payload)))
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(scenario.to_dict(), indent=2, sort_keys=True))


def load_dataset(path: Union[str, Path]) -> Dataset:
    path = Path(path)
    payload = _check_trailer(path.read_bytes(), "dataset")
    if payload[:4] != DATASET_MAGIC:
        raise MagicError(f"bad dataset magic {payload[:4]!r}, expected {DATASET_MAGIC!r}")
    version, n_tx, k, d, u, n = struct.unpack("<6I", payload[4:28])
    if version != DATASET_VERSION:
        raise VersionError(
            f"dataset version {version} unsupported; this reader handles "
            f"version {DATASET_VERSION}"
        )
    scen_hash = payload[28:60]
    sidecar = path.with_name(path.name + ".json")
    scenario = ScenarioConfig.from_dict(json.loads(sidecar.read_text()))
    if scenario.hash_bytes() != scen_hash:
        raise DataFormatError("sidecar scenario does not match dataset header hash")
    scenario_id = scen_hash.hex()[:16]

    mv = memoryview(payload)[60:]
    rec_bytes = (u * (d * n_tx + n_tx * k) + u * n_tx * k) * 16
    if len(mv) != n * rec_bytes:
        raise CrcError(f"dataset body length {len(mv)} != expected {n * rec_bytes}")
    records = []
    pos = 0
    for i in range(n):
        users, ests = [], []
        for _ in range(u):
            taps = _complex_from(mv[pos:], (d, n_tx))
            pos += d * n_tx * 16
            freq = _complex_from(mv[pos:], (n_tx, k))
            pos += n_tx * k * 16
            users.append(UserChannel(taps=taps, freq=freq))
        for _ in range(u):
            ests.append(_complex_from(mv[pos:], (n_tx, k)))
            pos += n_tx * k * 16
        records.append(
            DatasetRecord(
                user_channels=users,
                estimated_channels=ests,
                scenario_id=scenario_id,
                sample_index=i,
            )
        )
    return Dataset(scenario=scenario, records=records)


# ---------------------------------------------------------------------------
# Checkpoints

def save_checkpoint(net, path: Union[str, Path]) -> None:
    arch = json.dumps(net.architecture(), sort_keys=True).encode()
    params = get_flat_params(net).astype("<f8")
    payload = b"".join(
        [
            CHECKPOINT_MAGIC,
            struct.pack("<2I", CHECKPOINT_VERSION, len(arch)),
            arch,
            struct.pack("<Q", params.size),
            params.tobytes(),
        ]
    )
    Path(path).write_bytes(payload + struct.pack("<I", zlib.crc32(payload)))


def _net_from_architecture(arch: dict):
    kind = arch.get("kind")
    if kind == "refiner":
        net = RefinerNet(arch["n_users"], init="zero", n_blocks=arch["n_blocks"])
    elif kind == "encdec":
        net = EncoderDecoderNet(
            arch["n_users"],
            arch["n_tx"],
            arch["n_subcarriers"],
            arch["feedback_bits"],
            rng=np.random.default_rng(0),
        )
    else:
        raise DataFormatError(f"unknown checkpoint architecture kind {kind!r}")
    return net


def load_checkpoint(path: Union[str, Path]):
    payload = _check_trailer(Path(path).read_bytes(), "checkpoint")
    if payload[:4] != CHECKPOINT_MAGIC:
        raise MagicError(
            f"bad checkpoint magic {payload[:4]!r}, expected {CHECKPOINT_MAGIC!r}"
        )
    version, arch_len = struct.unpack("<2I", payload[4:12])
    if version != CHECKPOINT_VERSION:
        raise VersionError(
            f"checkpoint version {version} unsupported; this reader handles "
            f"version {CHECKPOINT_VERSION}"
        )
    arch = json.loads(payload[12 : 12 + arch_len].decode())
    pos = 12 + arch_len
    (count,) = struct.unpack("<Q", payload[pos : pos + 8])
    pos += 8
    params = np.frombuffer(payload[pos : pos + count * 8], dtype="<f8")
    if params.size != count:
        raise CrcError("checkpoint parameter block truncated")
    net = _net_from_architecture(arch)
    set_flat_params(net, params.astype(np.float64))
    return net


# ---------------------------------------------------------------------------
# Reports

def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def report_to_csv(report: EvalReport) -> str:
    lines = [",".join(EvalReport.CSV_COLUMNS)]
    for r in report.rows:
        lines.append(
            ",".join(_fmt(getattr(r, c)) for c in EvalReport.CSV_COLUMNS)
        )
    return "\n".join(lines) + "\n"


def report_from_csv(text: str) -> EvalReport:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    if tuple(header) != EvalReport.CSV_COLUMNS:
        raise DataFormatError(f"unexpected report columns {header}")
    rows = []
    for ln in lines[1:]:
        vals = ln.split(",")
        d = dict(zip(EvalReport.CSV_COLUMNS, vals))
        rows.append(
            EvalRow(
                method=d["method"],
                codebook=d["codebook"],
                overhead_bits=int(d["overhead_bits"]),
                mean_rate=float(d["mean_rate"]),
                ci95=float(d["ci95"]),
                n=int(d["n"]),
                seed=int(d["seed"]),
                config_hash=d["config_hash"],
            )
        )
    return EvalReport(rows)


def report_to_dat(report: EvalReport) -> str:
    """Gnuplot blocks: one per method, rate vs feedback overhead."""
    methods: dict[str, list[EvalRow]] = {}
    for r in report.rows:
        methods.setdefault(r.method, []).append(r)
    blocks = []
    for method in sorted(methods):
        rows = sorted(methods[method], key=lambda r: (r.overhead_bits, r.codebook))
        lines = [f"# method {method}", "# overhead_bits mean_rate ci95"]
        lines += [
            f"{r.overhead_bits} {_fmt(r.mean_rate)} {_fmt(r.ci95)}" for r in rows
        ]
        blocks.append("\n".join(lines))
    return "\n\n\n".join(blocks) + "\n"


def emit_report(report: EvalReport, out_dir: Union[str, Path],
                stem: str = "report") -> list[Path]:
    """Write <stem>.csv and <stem>.dat; deterministic byte-for-byte."""
    if not report.rows:
        raise ValueError("refusing to emit an empty report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    dat_path = out_dir / f"{stem}.dat"
    csv_path.write_text(report_to_csv(report))
    dat_path.write_text(report_to_dat(report))
    return [csv_path, dat_path]


# ---------------------------------------------------------------------------
# Output-directory lock

class OutputLock:
    """Exclusive-creation lock file guarding an output directory."""

    def __init__(self, out_dir: Union[str, Path]):
        self.path = Path(out_dir) / ".csiforge.lock"

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RuntimeError(
                f"output directory is locked by another writer: {self.path}"
            ) from None
        with os.fdopen(fd, "w") as f:
            f.write(str(os.getpid()))
        return self

    def __exit__(self, *exc):
        self.path.unlink(missing_ok=True)
        return False
