"""Flat JSON experiment configuration with dotted-key overrides.

A config file is a flat JSON object; the CLI additionally accepts
`key=value` overrides. Precedence: defaults < file < overrides. Unknown
keys are rejected with the full list of valid keys, and the fully resolved
configuration is echoed to the output directory by the CLI.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Union

from . import codebook as cb
from .channel import (
    ClusterSpec,
    ConfigurationError,
    ScenarioConfig,
    TwinPerturbation,
    desk_scale_scenario,
)
from .training import DecoderScheme, ExperimentConfig, codebook_from_dict


class ConfigError(ValueError):
    """Invalid configuration file, value, or override."""


def full_scale_scenario(seed: int = 0) -> ScenarioConfig:
    """Default large configuration; cluster geometry mirrors the desk site."""
    desk = desk_scale_scenario(seed)
    return ScenarioConfig(cluster_layout=desk.cluster_layout, rng_seed=seed)


_SCENARIO_KEYS = (
    "n_tx", "n_subcarriers", "subcarrier_spacing", "carrier_freq", "n_taps",
    "eirp_dbm", "noise_figure_db", "paths_per_cluster", "rng_seed",
)
_EXPERIMENT_KEYS = (
    "scheme", "n_users", "n_samples", "split_ratio", "val_fraction", "epochs",
    "learning_rate", "batch_size", "train_dtype", "feedback_bits", "nmse_db",
    "data_seed", "seed",
)
_OTHER_KEYS = (
    "preset",                       # "desk" (default) or "full"
    "codebook.variant",             # "typeI" or "typeII"
    "codebook.oversampling",
    "codebook.n_beams",
    "codebook.n_subbands",
    "twin.drop_foliage",
    "twin.position_error_std",
    "twin.rng_seed",
)
VALID_KEYS = tuple(
    sorted(
        [f"scenario.{k}" for k in _SCENARIO_KEYS]
        + list(_EXPERIMENT_KEYS)
        + list(_OTHER_KEYS)
    )
)

_INT_KEYS = {
    "scenario.n_tx", "scenario.n_subcarriers", "scenario.n_taps",
    "scenario.paths_per_cluster", "scenario.rng_seed",
    "n_users", "n_samples", "epochs", "batch_size", "feedback_bits",
    "data_seed", "seed", "codebook.oversampling", "codebook.n_beams",
    "codebook.n_subbands", "twin.rng_seed",
}
_FLOAT_KEYS = {
    "scenario.subcarrier_spacing", "scenario.carrier_freq",
    "scenario.eirp_dbm", "scenario.noise_figure_db",
    "split_ratio", "val_fraction", "learning_rate", "nmse_db",
    "twin.position_error_std",
}
_BOOL_KEYS = {"twin.drop_foliage"}


def _parse_override(key: str, raw: str):
    """Parse a CLI override string to the key's declared type."""
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return None if raw.lower() in ("none", "null") else float(raw)
        if key in _BOOL_KEYS:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return raw
    except ValueError as e:
        raise ConfigError(f"override {key}={raw!r}: {e}") from None


def parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        key, raw = pair.split("=", 1)
        out[key] = _parse_override(key, raw)
    return out


def _reject_unknown(keys) -> None:
    unknown = sorted(set(keys) - set(VALID_KEYS))
    if unknown:
        raise ConfigError(
            f"unknown config key(s) {unknown}; valid keys: {list(VALID_KEYS)}"
        )


def resolve_config(
    file_values: Optional[dict] = None, overrides: Optional[dict] = None
) -> dict:
    """Merge defaults, file values, and overrides into one flat dict."""
    merged: dict = {"preset": "full"}
    for source in (file_values or {}, overrides or {}):
        _reject_unknown(source.keys())
        merged.update(source)
    return merged


def build_config(flat: dict) -> ExperimentConfig:
    """Flat key/value dict -> validated ExperimentConfig."""
    flat = dict(flat)
    preset = flat.pop("preset", "full")
    seed_for_scenario = int(flat.get("scenario.rng_seed", 0))
    if preset == "desk":
        scenario = desk_scale_scenario(seed_for_scenario)
    elif preset == "full":
        scenario = full_scale_scenario(seed_for_scenario)
    else:
        raise ConfigError(f"preset must be 'desk' or 'full', got {preset!r}")

    scen_kwargs = {}
    for k in _SCENARIO_KEYS:
        fk = f"scenario.{k}"
        if fk in flat:
            scen_kwargs[k] = flat.pop(fk)
    try:
        if scen_kwargs:
            import dataclasses

            scenario = dataclasses.replace(scenario, **scen_kwargs)
    except (ConfigurationError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid scenario settings: {e}") from None

    variant = flat.pop("codebook.variant", "typeI")
    cb_kwargs = {"variant": variant}
    for k in ("oversampling", "n_beams", "n_subbands"):
        fk = f"codebook.{k}"
        if fk in flat:
            cb_kwargs[k] = flat.pop(fk)
    if variant == "typeI":
        cb_kwargs.pop("n_beams", None)
        cb_kwargs.pop("n_subbands", None)
    try:
        codebook = codebook_from_dict(cb_kwargs)
    except (TypeError, ValueError) as e:
        allowed = "{1, 2, 4}"
        raise ConfigError(f"invalid codebook settings (oversampling must be in "
                          f"{allowed}): {e}") from None

    twin = None
    twin_keys = {k: flat.pop(k) for k in list(flat) if k.startswith("twin.")}
    if twin_keys:
        try:
            twin = TwinPerturbation(
                drop_foliage=bool(twin_keys.get("twin.drop_foliage", False)),
                position_error_std=float(
                    twin_keys.get("twin.position_error_std", 0.0)
                ),
                rng_seed=int(twin_keys.get("twin.rng_seed", 0)),
            )
        except (ConfigurationError, ValueError) as e:
            raise ConfigError(f"invalid twin settings: {e}") from None

    exp_kwargs = {}
    for k in _EXPERIMENT_KEYS:
        if k in flat:
            exp_kwargs[k] = flat.pop(k)
    if "scheme" in exp_kwargs:
        try:
            exp_kwargs["scheme"] = DecoderScheme(exp_kwargs["scheme"])
        except ValueError:
            raise ConfigError(
                f"invalid scheme {exp_kwargs['scheme']!r}; valid: "
                f"{[s.value for s in DecoderScheme]}"
            ) from None
    if flat:
        _reject_unknown(flat.keys())
    try:
        return ExperimentConfig(
            scenario=scenario, codebook=codebook, twin=twin, **exp_kwargs
        )
    except (ConfigurationError, ValueError) as e:
        raise ConfigError(f"invalid experiment settings: {e}") from None


def load_config(
    path: Optional[Union[str, Path]], overrides=None
) -> tuple[ExperimentConfig, dict]:
    """Load and validate a config; returns (config, resolved flat dict).

    `overrides` may be a dict of parsed values or a list of key=value
    strings. A missing/None path applies pure defaults.
    """
    file_values = {}
    if path is not None:
        text = Path(path).read_text()
        try:
            file_values = json.loads(text) if text.strip() else {}
        except json.JSONDecodeError as e:
            raise ConfigError(
                f"config parse error at line {e.lineno}, column {e.colno}: {e.msg}"
            ) from None
        if not isinstance(file_values, dict):
            raise ConfigError("config file must contain a JSON object")
    if not isinstance(overrides, dict):
        overrides = parse_overrides(overrides)
    else:
        _reject_unknown(overrides.keys())
    resolved = resolve_config(file_values, overrides)
    return build_config(resolved), resolved
