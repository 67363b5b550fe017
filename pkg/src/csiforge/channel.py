"""Synthetic multipath channel generation.

A parametric cluster-based path sampler stands in for a ray tracer: each
scenario defines a fixed set of scatterer clusters, and every user draws its
paths from those clusters. Paths are converted to delay-tap and
frequency-domain channel matrices, optionally perturbed to emulate an
imperfect environment replica (foliage removal, scatterer position error),
and packaged into datasets for training and evaluation.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_HZ = -174.0

# Tags marking which environment feature produced a path.
TAG_BUILDING = 0
TAG_FOLIAGE = 1
TAG_NAMES = {TAG_BUILDING: "BUILDING", TAG_FOLIAGE: "FOLIAGE"}

# Nominal scatterer distance used to map a position error to an angle error.
SCATTERER_DISTANCE_M = 50.0

MAX_DELAY_RETRIES = 100


class ConfigurationError(ValueError):
    """Raised when a scenario or cluster configuration is invalid."""


@dataclass(frozen=True)
class ClusterSpec:
    """One scatterer cluster: paths are drawn around its mean geometry."""

    mean_azimuth: float
    mean_elevation: float
    mean_delay: float
    angular_spread: float
    delay_spread: float
    mean_power_db: float
    tag: int = TAG_BUILDING


@dataclass(frozen=True)
class ScenarioConfig:
    """Static system and environment parameters for one deployment site.

    Defaults are the full-scale benchmark settings; `desk_scale_scenario`
    returns a small configuration suitable for fast experiments.
    """

    n_tx: int = 32
    n_subcarriers: int = 288
    subcarrier_spacing: float = 30e3
    carrier_freq: float = 3.5e9
    n_taps: int = 32
    eirp_dbm: float = 30.0
    noise_figure_db: float = 7.0
    cluster_layout: tuple[ClusterSpec, ...] = ()
    paths_per_cluster: int = 4
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_taps > self.n_subcarriers:
            raise ConfigurationError("n_taps must not exceed n_subcarriers")
        if self.n_tx < 1 or self.n_subcarriers < 1:
            raise ConfigurationError("n_tx and n_subcarriers must be positive")
        if self.paths_per_cluster < 1:
            raise ConfigurationError("paths_per_cluster must be >= 1")

    @property
    def sample_duration(self) -> float:
        """Tap spacing Ts in seconds."""
        return 1.0 / (self.n_subcarriers * self.subcarrier_spacing)

    @property
    def tx_power(self) -> float:
        """Transmit power budget in watts, from the configured EIRP."""
        return 10.0 ** ((self.eirp_dbm - 30.0) / 10.0)

    @property
    def noise_power(self) -> float:
        """Receiver noise power in watts over the occupied bandwidth.

        Thermal floor plus the configured noise figure, computed at runtime
        from the subcarrier grid; never hard-coded.
        """
        bandwidth = self.n_subcarriers * self.subcarrier_spacing
        noise_dbm = (
            THERMAL_NOISE_DBM_HZ
            + 10.0 * math.log10(bandwidth)
            + self.noise_figure_db
        )
        return 10.0 ** ((noise_dbm - 30.0) / 10.0)

    @property
    def n_paths(self) -> int:
        """Fixed per-user path count (clusters x paths_per_cluster)."""
        return len(self.cluster_layout) * self.paths_per_cluster

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cluster_layout"] = [asdict(c) for c in self.cluster_layout]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        clusters = tuple(ClusterSpec(**c) for c in d.pop("cluster_layout", ()))
        return cls(cluster_layout=clusters, **d)

    def hash_bytes(self) -> bytes:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(payload).digest()


def desk_scale_scenario(seed: int = 0) -> ScenarioConfig:
    """Small site used throughout the test and experiment suite.

    Three clusters (one foliage) at distinct angles; mean path powers around
    -100 dB put zero-forcing on quantized CSI firmly in the
    interference-limited regime, where CSI refinement is visible.
    """
    clusters = (
        ClusterSpec(-0.8, 0.05, 0.3e-6, 0.10, 0.08e-6, -95.0, TAG_BUILDING),
        ClusterSpec(0.2, -0.05, 0.8e-6, 0.10, 0.10e-6, -98.0, TAG_BUILDING),
        ClusterSpec(1.0, 0.10, 1.5e-6, 0.12, 0.12e-6, -99.0, TAG_FOLIAGE),
    )
    return ScenarioConfig(
        n_tx=16,
        n_subcarriers=48,
        subcarrier_spacing=30e3,
        n_taps=16,
        cluster_layout=clusters,
        paths_per_cluster=4,
        rng_seed=seed,
    )


@dataclass(frozen=True)
class TwinPerturbation:
    """Imperfections of the synthetic environment replica.

    `drop_foliage` removes (zeroes) all foliage-tagged paths;
    `position_error_std` misplaces each scatterer object by a Gaussian
    distance in meters, coherently shifting the delays and azimuths of all
    paths bouncing off it.
    """

    drop_foliage: bool = False
    position_error_std: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.position_error_std < 0:
            raise ConfigurationError("position_error_std must be >= 0")

    @property
    def is_identity(self) -> bool:
        return not self.drop_foliage and self.position_error_std == 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PathSet:
    """Per-user multipath parameters as parallel arrays of length L."""

    gain: np.ndarray       # complex128 (L,)
    delay: np.ndarray      # float64 (L,), seconds
    azimuth: np.ndarray    # float64 (L,), [-pi, pi)
    elevation: np.ndarray  # float64 (L,), [-pi/2, pi/2]
    tag: np.ndarray        # int64 (L,)
    # Scatterer (building/foliage object) index per path; paths sharing an
    # index move together under position errors. None = one object per path.
    cluster: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.gain.shape[0]


@dataclass
class UserChannel:
    """Delay-tap and frequency-domain channel of one user."""

    taps: np.ndarray  # complex128 (D, N_t)
    freq: np.ndarray  # complex128 (N_t, K)


@dataclass
class DatasetRecord:
    """One drop: ground-truth channels and their noisy estimates for U users."""

    user_channels: list[UserChannel]
    estimated_channels: list[np.ndarray]  # each (N_t, K) complex128
    scenario_id: str
    sample_index: int


@dataclass
class Dataset:
    scenario: ScenarioConfig
    records: list[DatasetRecord]

    @property
    def n_users(self) -> int:
        return len(self.records[0].user_channels)

    def true_channels(self) -> np.ndarray:
        """Stacked ground truth, shape (n_samples, U, N_t, K)."""
        return np.stack(
            [np.stack([uc.freq for uc in r.user_channels]) for r in self.records]
        )

    def estimated(self) -> np.ndarray:
        """Stacked channel estimates, shape (n_samples, U, N_t, K)."""
        return np.stack(
            [np.stack(r.estimated_channels) for r in self.records]
        )


def _wrap_angle(a: np.ndarray) -> np.ndarray:
    return (a + np.pi) % (2 * np.pi) - np.pi


def sample_paths(
    scenario: ScenarioConfig, user_index: int, rng: np.random.Generator
) -> PathSet:
    """Draw one user's multipath parameters from the scenario's clusters.

    Per cluster: angles are Laplacian around the cluster mean (scale chosen
    so the standard deviation equals the configured spread), delays are
    shifted-exponential with mean `mean_delay` and std `delay_spread`, and
    gains are complex Gaussian with power 10^(mean_power_db/10). Delays at
    or beyond the tap window D*Ts are redrawn, then truncated as a last
    resort.
    """
    if not scenario.cluster_layout:
        raise ConfigurationError("cluster_layout must not be empty")
    del user_index  # users are i.i.d. draws; identity is carried by the rng

    ts = scenario.sample_duration
    max_delay = scenario.n_taps * ts
    n = scenario.paths_per_cluster

    gains, delays, azs, els, tags, clusters = [], [], [], [], [], []
    for ci, cluster in enumerate(scenario.cluster_layout):
        lap_scale = cluster.angular_spread / math.sqrt(2.0)
        az = _wrap_angle(cluster.mean_azimuth + rng.laplace(0.0, lap_scale, n))
        el = np.clip(
            cluster.mean_elevation + rng.laplace(0.0, lap_scale, n),
            -np.pi / 2,
            np.pi / 2,
        )
        delay = _draw_delays(cluster, n, max_delay, rng)
        power = 10.0 ** (cluster.mean_power_db / 10.0)
        g = math.sqrt(power / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        gains.append(g)
        delays.append(delay)
        azs.append(az)
        els.append(el)
        tags.append(np.full(n, cluster.tag, dtype=np.int64))
        clusters.append(np.full(n, ci, dtype=np.int64))

    return PathSet(
        gain=np.concatenate(gains),
        delay=np.concatenate(delays),
        azimuth=np.concatenate(azs),
        elevation=np.concatenate(els),
        tag=np.concatenate(tags),
        cluster=np.concatenate(clusters),
    )


def _draw_delays(
    cluster: ClusterSpec, n: int, max_delay: float, rng: np.random.Generator
) -> np.ndarray:
    """Shifted-exponential delays; redraw out-of-window values, then truncate."""

    def draw(count):
        # mean = mean_delay, std = delay_spread, support [mean - spread, inf)
        e = rng.exponential(1.0, count)
        return np.maximum(cluster.mean_delay + cluster.delay_spread * (e - 1.0), 0.0)

    delay = draw(n)
    for _ in range(MAX_DELAY_RETRIES):
        bad = delay >= max_delay
        if not bad.any():
            break
        delay[bad] = draw(int(bad.sum()))
    else:
        delay = np.minimum(delay, np.nextafter(max_delay, 0.0))
    return delay


def array_response(azimuth, elevation, n_tx: int) -> np.ndarray:
    """Half-wavelength ULA steering vector(s), unit-magnitude entries.

    Accepts scalars or arrays of angles; returns shape (..., n_tx).
    """
    az = np.asarray(azimuth, dtype=np.float64)
    el = np.asarray(elevation, dtype=np.float64)
    n = np.arange(n_tx)
    phase = np.pi * np.cos(el)[..., None] * np.sin(az)[..., None] * n
    return np.exp(1j * phase)


def delay_domain_channel(paths: PathSet, scenario: ScenarioConfig) -> np.ndarray:
    """Sum path contributions into D tap vectors, shape (D, N_t).

    Sinc pulse shaping: a path at an integer multiple of Ts lands exactly on
    one tap.
    """
    ts = scenario.sample_duration
    d = np.arange(scenario.n_taps)
    if len(paths) == 0:
        return np.zeros((scenario.n_taps, scenario.n_tx), dtype=np.complex128)
    # (D, L) pulse samples; np.sinc is sin(pi x)/(pi x)
    pulse = np.sinc(d[:, None] - paths.delay[None, :] / ts)
    steering = array_response(paths.azimuth, paths.elevation, scenario.n_tx)  # (L, N_t)
    return (pulse * paths.gain[None, :]) @ steering


def freq_channel(taps: np.ndarray, k_subcarriers: Optional[int] = None) -> np.ndarray:
    """DFT of the tap vectors over the K-subcarrier grid, shape (N_t, K).

    Subcarriers are indexed k = 0..K-1; with D <= K this is a zero-padded
    FFT along the tap axis. K defaults to the number of taps.
    """
    k = taps.shape[0] if k_subcarriers is None else k_subcarriers
    return np.fft.fft(taps, n=k, axis=0).T


def apply_twin_perturbation(
    paths: PathSet, pert: TwinPerturbation, rng: np.random.Generator,
    max_delay: Optional[float] = None,
) -> PathSet:
    """Degrade a path set the way an imperfect environment model would.

    Foliage paths are zeroed (gain 0) so array shapes stay fixed. Position
    errors model misplaced scatterer objects: one Gaussian offset dd is drawn
    per object (paths sharing a `cluster` index move together), shifting each
    of its paths' delay by dd/c and azimuth by atan(dd/r), with r the nominal
    scatterer distance. A coherent per-object shift biases the synthetic
    geometry, unlike independent per-path jitter which merely widens spreads.
    The identity perturbation returns the input unchanged.
    """
    if pert.is_identity:
        return paths

    gain = paths.gain.copy()
    delay = paths.delay.copy()
    azimuth = paths.azimuth.copy()

    if pert.drop_foliage:
        gain[paths.tag == TAG_FOLIAGE] = 0.0
        if not np.any(gain != 0.0):
            logger.warning("twin perturbation removed all paths (zero channel)")

    if pert.position_error_std > 0.0:
        if paths.cluster is None:
            inverse = np.arange(len(paths))
            n_objects = len(paths)
        else:
            _, inverse = np.unique(paths.cluster, return_inverse=True)
            n_objects = int(inverse.max()) + 1 if len(paths) else 0
        dd = rng.normal(0.0, pert.position_error_std, n_objects)[inverse]
        delay = np.maximum(delay + dd / SPEED_OF_LIGHT, 0.0)
        if max_delay is not None:
            delay = np.minimum(delay, np.nextafter(max_delay, 0.0))
        azimuth = _wrap_angle(azimuth + np.arctan(dd / SCATTERER_DISTANCE_M))

    return PathSet(
        gain=gain,
        delay=delay,
        azimuth=azimuth,
        elevation=paths.elevation.copy(),
        tag=paths.tag.copy(),
        cluster=None if paths.cluster is None else paths.cluster.copy(),
    )


def estimate_channel(
    freq: np.ndarray, nmse_db: Optional[float], rng: np.random.Generator
) -> np.ndarray:
    """Noisy copy of a frequency-domain channel at a configured NMSE.

    `nmse_db=None` (or -inf) means perfect CSI and returns the input as-is.
    """
    if nmse_db is None or nmse_db == -math.inf:
        return freq
    if nmse_db > 0:
        raise ValueError("nmse_db must be <= 0")
    power = np.mean(np.abs(freq) ** 2)
    var = 10.0 ** (nmse_db / 10.0) * power
    noise = math.sqrt(var / 2.0) * (
        rng.standard_normal(freq.shape) + 1j * rng.standard_normal(freq.shape)
    )
    return freq + noise


def _child_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent stream for (seed, key...) so parallel and serial runs agree."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, *key]))


def build_user_channel(paths: PathSet, scenario: ScenarioConfig) -> UserChannel:
    taps = delay_domain_channel(paths, scenario)
    return UserChannel(taps=taps, freq=freq_channel(taps, scenario.n_subcarriers))


def generate_sample(
    scenario: ScenarioConfig,
    n_users: int,
    sample_index: int,
    master_seed: int,
    pert: Optional[TwinPerturbation] = None,
    nmse_db: Optional[float] = None,
) -> DatasetRecord:
    """One dataset record; fully determined by (config, seed, index)."""
    scenario_id = scenario.hash_bytes().hex()[:16]
    max_delay = scenario.n_taps * scenario.sample_duration
    users, estimates = [], []
    for u in range(n_users):
        path_rng = _child_rng(master_seed, sample_index, u, 0)
        paths = sample_paths(scenario, u, path_rng)
        if pert is not None and not pert.is_identity:
            # One fixed degraded scene per perturbation seed: the same
            # scatterer position errors apply to every sample and user, a
            # systematic modeling bias rather than per-sample augmentation.
            pert_rng = _child_rng(pert.rng_seed, 0, 0, 1)
            paths = apply_twin_perturbation(paths, pert, pert_rng, max_delay)
        channel = build_user_channel(paths, scenario)
        est_rng = _child_rng(master_seed, sample_index, u, 2)
        estimates.append(estimate_channel(channel.freq, nmse_db, est_rng))
        users.append(channel)
    return DatasetRecord(
        user_channels=users,
        estimated_channels=estimates,
        scenario_id=scenario_id,
        sample_index=sample_index,
    )


def generate_dataset(
    scenario: ScenarioConfig,
    n_users: int,
    n_samples: int,
    pert: Optional[TwinPerturbation] = None,
    seed: Optional[int] = None,
    nmse_db: Optional[float] = None,
) -> Dataset:
    """Generate `n_samples` independent records.

    Each sample derives its own child stream from (seed, index), so the
    output is identical whether samples are produced serially or in
    parallel, and a twin dataset shares its underlying path draws with the
    target dataset generated from the same seed.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    master = scenario.rng_seed if seed is None else seed
    records = [
        generate_sample(scenario, n_users, i, master, pert, nmse_db)
        for i in range(n_samples)
    ]
    return Dataset(scenario=scenario, records=records)
