"""Experiment orchestration: feedback pipelines, training loops, evaluation.

Pipelines compress each user's *estimated* channel with a codebook, decode
it at the transmitter, optionally refine it with a neural decoder, precode,
and score the result on the *true* channels. Supported schemes:

  CODEBOOK_ONLY     decoded codebook CSI -> zero-forcing
  TWO_STAGE_RATE    per-user refiner trained on the single-user rate,
                    then zero-forcing on the refined CSI
  TWO_STAGE_RECON   same refiner trained on reconstruction error
  E2E               multi-user refiner maps stacked codebook CSI directly
                    to power-normalized precoders (no zero-forcing)
  ENCDEC_BENCHMARK  learned binary-feedback encoder/decoder pair
  GENIE             zero-forcing on the true channels (evaluation ceiling)

Everything is deterministic given (config, seed): data, initialization,
shuffling, and therefore every reported number.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from . import codebook as cb
from . import precoding
from .channel import Dataset, ScenarioConfig, TwinPerturbation, generate_dataset
from .neural import (
    Adam,
    EncoderDecoderNet,
    RefinerNet,
    batch_to_net_input,
    loss_e2e,
    loss_ts_rate,
    loss_ts_recon,
    normalize_precoders,
    tensor_to_complex_multi,
    tensor_to_complex_single,
)
from .neural.models import get_flat_params, set_flat_params

logger = logging.getLogger(__name__)

CI95_Z = 1.959963984540054  # two-sided 95% normal quantile


class NumericalError(RuntimeError):
    """Raised when training or evaluation hits non-finite numbers."""


class DecoderScheme(str, Enum):
    E2E = "E2E"
    TWO_STAGE_RATE = "TWO_STAGE_RATE"
    TWO_STAGE_RECON = "TWO_STAGE_RECON"
    ENCDEC_BENCHMARK = "ENCDEC_BENCHMARK"
    CODEBOOK_ONLY = "CODEBOOK_ONLY"
    GENIE = "GENIE"


TRAINED_SCHEMES = (
    DecoderScheme.E2E,
    DecoderScheme.TWO_STAGE_RATE,
    DecoderScheme.TWO_STAGE_RECON,
    DecoderScheme.ENCDEC_BENCHMARK,
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment bit-exactly."""

    scenario: ScenarioConfig
    scheme: DecoderScheme = DecoderScheme.CODEBOOK_ONLY
    codebook: cb.CodebookConfig = cb.CodebookConfigTypeI(oversampling=1)
    n_users: int = 2
    n_samples: int = 5000
    split_ratio: float = 0.8       # train fraction of n_samples
    val_fraction: float = 0.1      # of the training split, carved by seed
    epochs: int = 30
    learning_rate: float = 1e-3
    batch_size: int = 64
    train_dtype: str = "float32"   # training precision; metrics stay float64
    feedback_bits: int = 64        # learned-encoder benchmark only
    nmse_db: Optional[float] = None  # channel-estimation error; None = perfect
    twin: Optional[TwinPerturbation] = None  # perturbs *training* data only
    data_seed: int = 0
    seed: int = 0                  # training seed: init + shuffling

    def __post_init__(self):
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError("split_ratio must be in (0, 1)")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")

    @property
    def n_train(self) -> int:
        return int(round(self.n_samples * self.split_ratio))

    @property
    def n_test(self) -> int:
        return self.n_samples - self.n_train

    def to_dict(self) -> dict:
        d = {
            "scenario": self.scenario.to_dict(),
            "scheme": self.scheme.value,
            "codebook": codebook_to_dict(self.codebook),
            "n_users": self.n_users,
            "n_samples": self.n_samples,
            "split_ratio": self.split_ratio,
            "val_fraction": self.val_fraction,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "train_dtype": self.train_dtype,
            "feedback_bits": self.feedback_bits,
            "nmse_db": self.nmse_db,
            "twin": self.twin.to_dict() if self.twin else None,
            "data_seed": self.data_seed,
            "seed": self.seed,
        }
        return d

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def codebook_to_dict(config: cb.CodebookConfig) -> dict:
    if isinstance(config, cb.CodebookConfigTypeI):
        return {"variant": "typeI", "oversampling": config.oversampling}
    return {
        "variant": "typeII",
        "oversampling": config.oversampling,
        "n_beams": config.n_beams,
        "n_subbands": config.n_subbands,
    }


def codebook_from_dict(d: dict) -> cb.CodebookConfig:
    d = dict(d)
    variant = d.pop("variant")
    if variant == "typeI":
        return cb.CodebookConfigTypeI(**d)
    if variant == "typeII":
        return cb.CodebookConfigTypeII(**d)
    raise ValueError(f"unknown codebook variant {variant!r}")


def codebook_label(config: cb.CodebookConfig) -> str:
    if isinstance(config, cb.CodebookConfigTypeI):
        return f"typeI-O{config.oversampling}"
    return f"typeII-L{config.n_beams}-SB{config.n_subbands}"


def _codebook_n_subbands(config: cb.CodebookConfig) -> int:
    return 1 if isinstance(config, cb.CodebookConfigTypeI) else config.n_subbands


# ---------------------------------------------------------------------------
# Codebook round trips over datasets (cached: encoding dominates, and every
# scheme sharing a dataset + codebook config reuses the same reconstruction)

def reconstruct_channel(
    est_channel: np.ndarray, config: cb.CodebookConfig, subband_map: np.ndarray
) -> np.ndarray:
    """Estimated (N_t, K) channel -> codebook round trip -> (N_t, K) CSI."""
    n_tx = est_channel.shape[0]
    report = cb.encode(est_channel, config, subband_map)
    w = cb.decode(report, config, n_tx, _codebook_n_subbands(config))
    return cb.subband_to_subcarrier(w, subband_map)


def dataset_channels(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """(true, estimated) channel stacks, shape (B, U, N_t, K), cached."""
    cache = getattr(dataset, "_channel_cache", None)
    if cache is None:
        cache = (dataset.true_channels(), dataset.estimated())
        dataset._channel_cache = cache
    return cache


def codebook_reconstruct(dataset: Dataset, config: cb.CodebookConfig) -> np.ndarray:
    """Codebook CSI for every (sample, user) in a dataset, (B, U, N_t, K)."""
    cache = getattr(dataset, "_codebook_cache", None)
    if cache is None:
        cache = {}
        dataset._codebook_cache = cache
    key = (codebook_label(config), config.oversampling)
    if key not in cache:
        k = dataset.scenario.n_subcarriers
        sb_map = cb.build_subband_map(k, _codebook_n_subbands(config))
        _, est = dataset_channels(dataset)
        b, u = est.shape[0], est.shape[1]
        # C-contiguous regardless of the estimate stack's memory layout, so
        # an exact-identity refiner yields bit-identical downstream numerics.
        out = np.empty(est.shape, dtype=est.dtype)
        for i in range(b):
            for j in range(u):
                out[i, j] = reconstruct_channel(est[i, j], config, sb_map)
        cache[key] = out
    return cache[key]


# ---------------------------------------------------------------------------
# Pipeline evaluation

def _zf_batch(csi: np.ndarray, power: float) -> np.ndarray:
    """Zero-forcing per sample: (B, U, N_t, K) CSI -> (B, K, N_t, U)."""
    return np.stack([precoding.zero_forcing(c, power) for c in csi])


def _refine_two_stage(net: RefinerNet, csi: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Refine per-user CSI (B, U, N_t, K) -> same shape, users independent."""
    b, u, n_tx, k = csi.shape
    flat = csi.reshape(b * u, 1, n_tx, k)
    out = np.empty((b * u, n_tx, k), dtype=np.complex128)
    for lo in range(0, b * u, chunk):
        x = batch_to_net_input(flat[lo : lo + chunk], net.dtype)
        y = net.forward(x)
        out[lo : lo + chunk] = tensor_to_complex_single(y.astype(np.float64))
    return out.reshape(b, u, n_tx, k)


def _e2e_precoders(net: RefinerNet, csi: np.ndarray, power: float,
                   chunk: int = 128) -> np.ndarray:
    """Stacked codebook CSI (B, U, N_t, K) -> precoders (B, K, N_t, U)."""
    b, u, n_tx, k = csi.shape
    out = np.empty((b, k, n_tx, u), dtype=np.complex128)
    for lo in range(0, b, chunk):
        x = batch_to_net_input(csi[lo : lo + chunk], net.dtype)
        y = net.forward(x).astype(np.float64)
        f_raw = tensor_to_complex_multi(y)
        out[lo : lo + chunk] = normalize_precoders(f_raw, power)[0]
    return out


def _normalize_encoder_input(est: np.ndarray) -> np.ndarray:
    """Scale each user's estimate to unit mean column energy.

    The learned encoder should not depend on the absolute path-loss scale;
    downstream rate mappings renormalize anyway.
    """
    k = est.shape[-1]
    norms = np.sqrt(np.sum(np.abs(est) ** 2, axis=(-2, -1), keepdims=True) / k)
    return est / np.where(norms == 0.0, 1.0, norms)


def _encdec_input(net: EncoderDecoderNet, est: np.ndarray) -> np.ndarray:
    """(B, U, N_t, K) complex estimates -> (B, U, N_t, K, 2) real input."""
    scaled = _normalize_encoder_input(est)
    out = np.empty(scaled.shape + (2,), net.dtype)
    out[..., 0] = scaled.real
    out[..., 1] = scaled.imag
    return out


def _encdec_precoders(net: EncoderDecoderNet, est: np.ndarray, power: float,
                      chunk: int = 128) -> np.ndarray:
    b, u, n_tx, k = est.shape
    out = np.empty((b, k, n_tx, u), dtype=np.complex128)
    for lo in range(0, b, chunk):
        y = net.forward(_encdec_input(net, est[lo : lo + chunk])).astype(np.float64)
        f_raw = tensor_to_complex_multi(y)
        out[lo : lo + chunk] = normalize_precoders(f_raw, power)[0]
    return out


def pipeline_rates(
    scheme: DecoderScheme,
    dataset: Dataset,
    config: cb.CodebookConfig,
    net=None,
    indices: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Per-sample sum rates of one method over a dataset, shape (B,).

    Encoding sees only the estimated channels; rates are always computed on
    the true channels.
    """
    scenario = dataset.scenario
    power, noise = scenario.tx_power, scenario.noise_power
    true, est = dataset_channels(dataset)
    if scheme is not DecoderScheme.GENIE:
        csi = codebook_reconstruct(dataset, config)
    if indices is not None:
        true = true[indices]
        est = est[indices]
        if scheme is not DecoderScheme.GENIE:
            csi = csi[indices]

    if scheme is DecoderScheme.GENIE:
        precoders = _zf_batch(true, power)
    elif scheme is DecoderScheme.CODEBOOK_ONLY:
        precoders = _zf_batch(csi, power)
    elif scheme in (DecoderScheme.TWO_STAGE_RATE, DecoderScheme.TWO_STAGE_RECON):
        precoders = _zf_batch(_refine_two_stage(net, csi), power)
    elif scheme is DecoderScheme.E2E:
        precoders = _e2e_precoders(net, csi, power)
    elif scheme is DecoderScheme.ENCDEC_BENCHMARK:
        precoders = _encdec_precoders(net, est, power)
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(f"unknown scheme {scheme}")

    eff = np.einsum("bunk,bknv->bkuv", true.conj(), precoders)
    gains = np.abs(eff) ** 2
    u = gains.shape[2]
    idx = np.arange(u)
    signal = gains[:, :, idx, idx]
    interference = gains.sum(axis=3) - signal
    k = gains.shape[1]
    rates = np.log2(1.0 + signal / (interference + noise)).sum(axis=(1, 2)) / k
    if not np.all(np.isfinite(rates)):
        raise NumericalError(f"non-finite rate in {scheme.value} evaluation")
    return rates


def run_pipeline_sample(record, codebook_cfg, decoder, scheme, power, noise_power) -> float:
    """Sum rate of a single dataset record under one scheme.

    Convenience wrapper over the batched path for tests and debugging; the
    record is wrapped into a one-sample dataset sharing no cache.
    """
    ds = Dataset(scenario=_infer_scenario(record, power, noise_power), records=[record])
    return float(pipeline_rates(scheme, ds, codebook_cfg, decoder)[0])


def _infer_scenario(record, power: float, noise_power: float) -> ScenarioConfig:
    """Minimal scenario carrying shapes and budgets for a bare record."""
    n_tx, k = record.user_channels[0].freq.shape
    # Solve eirp/noise-figure knobs so the properties reproduce the budgets.
    eirp = 10.0 * math.log10(power) + 30.0
    bandwidth = k * 30e3
    nf = 10.0 * math.log10(noise_power) + 30.0 + 174.0 - 10.0 * math.log10(bandwidth)
    from .channel import ClusterSpec

    return ScenarioConfig(
        n_tx=n_tx, n_subcarriers=k, n_taps=min(n_tx, k), eirp_dbm=eirp,
        noise_figure_db=nf,
        cluster_layout=(ClusterSpec(0.0, 0.0, 0.0, 0.0, 0.0, 0.0),),
    )


# ---------------------------------------------------------------------------
# Training

@dataclass
class TrainResult:
    net: object
    scheme: DecoderScheme
    train_losses: list[float]
    val_rates: list[float]
    best_epoch: int
    config: ExperimentConfig
    wall_seconds: float = 0.0


def _split_indices(n: int, val_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic train/validation index split."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1001]))
    perm = rng.permutation(n)
    n_val = int(round(n * val_fraction))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def make_decoder(config: ExperimentConfig, scenario: ScenarioConfig):
    """Freshly initialized decoder for a scheme, seeded by the config."""
    dtype = np.dtype(config.train_dtype)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2002]))
    if config.scheme in (DecoderScheme.TWO_STAGE_RATE, DecoderScheme.TWO_STAGE_RECON):
        if config.epochs == 0:
            return RefinerNet(1, init="zero", dtype=np.float64)
        return RefinerNet(1, init="identity", rng=rng, dtype=dtype)
    if config.scheme is DecoderScheme.E2E:
        if config.epochs == 0:
            return RefinerNet(config.n_users, init="zero", dtype=np.float64)
        return RefinerNet(config.n_users, init="identity", rng=rng, dtype=dtype)
    if config.scheme is DecoderScheme.ENCDEC_BENCHMARK:
        return EncoderDecoderNet(
            config.n_users,
            scenario.n_tx,
            scenario.n_subcarriers,
            config.feedback_bits,
            rng=rng,
            dtype=dtype,
        )
    raise ValueError(f"scheme {config.scheme} has no trainable decoder")


def train(config: ExperimentConfig, dataset: Dataset) -> TrainResult:
    """Minibatch Adam training of one decoder on a training dataset.

    Logs per-epoch training loss and held-out (validation) sum rate, and
    returns the best-by-validation checkpoint. With `epochs == 0` the
    zero-initialized (exact identity) decoder is returned untouched.
    A non-finite loss aborts with a diagnostics dump.
    """
    if config.scheme not in TRAINED_SCHEMES:
        raise ValueError(f"scheme {config.scheme} is not trainable")
    scenario = dataset.scenario
    net = make_decoder(config, scenario)
    if config.epochs == 0:
        return TrainResult(net, config.scheme, [], [], -1, config)

    start = time.perf_counter()
    power, noise = scenario.tx_power, scenario.noise_power
    dtype = np.dtype(config.train_dtype)
    true, est = dataset_channels(dataset)
    two_stage = config.scheme in (
        DecoderScheme.TWO_STAGE_RATE,
        DecoderScheme.TWO_STAGE_RECON,
    )

    # Assemble (inputs, channel targets) once. Two-stage decoders operate on
    # a single user's CSI, so records are flattened to per-user samples.
    if two_stage:
        csi = codebook_reconstruct(dataset, config.codebook)
        b, u, n_tx, k = csi.shape
        x_all = batch_to_net_input(csi.reshape(b * u, 1, n_tx, k), dtype)
        h_all = true.reshape(b * u, n_tx, k)
    elif config.scheme is DecoderScheme.E2E:
        csi = codebook_reconstruct(dataset, config.codebook)
        x_all = batch_to_net_input(csi, dtype)
        h_all = true
    else:  # ENCDEC_BENCHMARK
        x_all = _encdec_input(net, est)
        h_all = true

    n_records = len(dataset.records)
    train_rec, val_rec = _split_indices(n_records, config.val_fraction, config.seed)
    if two_stage:
        # Per-user sample indices of the record split.
        u = true.shape[1]
        train_idx = (train_rec[:, None] * u + np.arange(u)).ravel()
    else:
        train_idx = train_rec

    opt = Adam(net.params(), lr=config.learning_rate)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 3003]))

    def loss_fn(x, h):
        y = net.forward(x)
        if config.scheme is DecoderScheme.TWO_STAGE_RATE:
            loss, grad = loss_ts_rate(y, h, power, noise)
        elif config.scheme is DecoderScheme.TWO_STAGE_RECON:
            loss, grad = loss_ts_recon(y, h)
        else:
            loss, grad = loss_e2e(y, h, power, noise)
        return loss, grad

    best_rate, best_epoch, best_params = -np.inf, -1, get_flat_params(net)
    train_losses: list[float] = []
    val_rates: list[float] = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(train_idx)
        epoch_loss, n_batches = 0.0, 0
        for lo in range(0, order.size, config.batch_size):
            sel = order[lo : lo + config.batch_size]
            opt.zero_grad()
            loss, grad = loss_fn(x_all[sel], h_all[sel])
            if not math.isfinite(loss):
                _abort_non_finite(config, epoch, n_batches, loss, net)
            net.backward(grad.astype(dtype))
            if not opt.step():
                logger.warning(
                    "epoch %d batch %d: non-finite gradient, step skipped",
                    epoch, n_batches,
                )
            epoch_loss += loss
            n_batches += 1
        train_losses.append(epoch_loss / max(n_batches, 1))

        if val_rec.size:
            val_rate = float(
                pipeline_rates(
                    config.scheme, dataset, config.codebook, net, indices=val_rec
                ).mean()
            )
        else:
            val_rate = -train_losses[-1]
        val_rates.append(val_rate)
        if val_rate > best_rate:
            best_rate, best_epoch = val_rate, epoch
            best_params = get_flat_params(net)
        logger.info(
            "[%s seed %d] epoch %d/%d loss %.6g val rate %.6g",
            config.scheme.value, config.seed, epoch + 1, config.epochs,
            train_losses[-1], val_rate,
        )

    set_flat_params(net, best_params)
    return TrainResult(
        net, config.scheme, train_losses, val_rates, best_epoch, config,
        wall_seconds=time.perf_counter() - start,
    )


def _abort_non_finite(config, epoch, batch, loss, net):
    grad_norms = {
        f"param{i}": float(np.linalg.norm(p.grad)) for i, p in enumerate(net.params())
    }
    raise NumericalError(
        "non-finite training loss: "
        + json.dumps(
            {
                "scheme": config.scheme.value,
                "seed": config.seed,
                "epoch": epoch,
                "batch": batch,
                "loss": repr(loss),
                "grad_norms": grad_norms,
            }
        )
    )


# ---------------------------------------------------------------------------
# Evaluation reports

@dataclass
class MethodSpec:
    """One row-producing method: a scheme plus its codebook and decoder."""

    name: str
    scheme: DecoderScheme
    codebook: cb.CodebookConfig
    net: object = None
    seed: int = 0


@dataclass
class EvalRow:
    method: str
    codebook: str
    overhead_bits: int
    mean_rate: float
    ci95: float
    n: int
    seed: int
    config_hash: str
    rates: np.ndarray = field(repr=False, default=None)


@dataclass
class EvalReport:
    rows: list[EvalRow]

    CSV_COLUMNS = (
        "method", "codebook", "overhead_bits", "mean_rate", "ci95", "n",
        "seed", "config_hash",
    )

    def row(self, method: str) -> EvalRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)


def evaluate(
    methods: Sequence[MethodSpec],
    test_dataset: Dataset,
    config_hash: str = "",
) -> EvalReport:
    """Mean sum rate with a 95% confidence half-width per method."""
    if not test_dataset.records:
        raise ValueError("empty test set")
    n_tx = test_dataset.scenario.n_tx
    rows = []
    for m in methods:
        rates = pipeline_rates(m.scheme, test_dataset, m.codebook, m.net)
        n = rates.size
        ci = float(CI95_Z * rates.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        rows.append(
            EvalRow(
                method=m.name,
                codebook=codebook_label(m.codebook),
                overhead_bits=cb.overhead_bits(m.codebook, n_tx),
                mean_rate=float(rates.mean()),
                ci95=ci,
                n=n,
                seed=m.seed,
                config_hash=config_hash,
                rates=rates,
            )
        )
    return EvalReport(rows)


# ---------------------------------------------------------------------------
# Full experiments

def prepare_datasets(config: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """(train, test) datasets; the twin perturbation degrades training only.

    Train and test draws come from disjoint sample-index ranges of the same
    seeded stream family, so a twin training set shares its underlying path
    realizations with the unperturbed training set from the same seed.
    """
    train_ds = generate_dataset(
        config.scenario,
        config.n_users,
        config.n_train,
        pert=config.twin,
        seed=config.data_seed,
        nmse_db=config.nmse_db,
    )
    test_scenario = dataclasses.replace(config.scenario, rng_seed=config.data_seed + 1)
    test_ds = generate_dataset(
        test_scenario,
        config.n_users,
        config.n_test,
        seed=config.data_seed + 1,
        nmse_db=config.nmse_db,
    )
    return train_ds, test_ds


def run_experiment(config: ExperimentConfig,
                   datasets: Optional[tuple[Dataset, Dataset]] = None) -> EvalReport:
    """Train (if the scheme learns) and evaluate against the baselines."""
    train_ds, test_ds = datasets if datasets is not None else prepare_datasets(config)
    methods = [
        MethodSpec("GENIE", DecoderScheme.GENIE, config.codebook, seed=config.seed),
        MethodSpec(
            "CODEBOOK_ONLY", DecoderScheme.CODEBOOK_ONLY, config.codebook,
            seed=config.seed,
        ),
    ]
    if config.scheme in TRAINED_SCHEMES:
        result = train(config, train_ds)
        methods.append(
            MethodSpec(
                config.scheme.value, config.scheme, config.codebook,
                net=result.net, seed=config.seed,
            )
        )
    return evaluate(methods, test_ds, config_hash=config.config_hash())


def twin_transfer_experiment(
    config: ExperimentConfig,
    foliage_twin: Optional[TwinPerturbation] = None,
    position_twin: Optional[TwinPerturbation] = None,
) -> EvalReport:
    """Train on degraded environment replicas, evaluate on the target.

    Emits rows: target-trained, twin-trained (foliage removed), twin-trained
    (foliage removed + position error), codebook-only, genie — all on the
    same target test set.
    """
    if foliage_twin is None:
        foliage_twin = TwinPerturbation(drop_foliage=True)
    if position_twin is None:
        position_twin = TwinPerturbation(drop_foliage=True, position_error_std=5.0)
    base = dataclasses.replace(config, twin=None)
    _, test_ds = prepare_datasets(base)

    methods = [
        MethodSpec("GENIE", DecoderScheme.GENIE, config.codebook, seed=config.seed),
        MethodSpec(
            "CODEBOOK_ONLY", DecoderScheme.CODEBOOK_ONLY, config.codebook,
            seed=config.seed,
        ),
    ]
    for name, pert in (
        ("TARGET_TRAINED", None),
        ("TWIN_FOLIAGE", foliage_twin),
        ("TWIN_FOLIAGE_POS", position_twin),
    ):
        cfg = dataclasses.replace(config, twin=pert)
        train_ds, _ = prepare_datasets(cfg)
        result = train(cfg, train_ds)
        methods.append(
            MethodSpec(name, config.scheme, config.codebook, net=result.net,
                       seed=config.seed)
        )
    return evaluate(methods, test_ds, config_hash=config.config_hash())
