"""Key=value experiment configuration with dotted section prefixes.

A config file is UTF-8 lines of `section.key=value`; blank lines and lines
starting with # are ignored. Unset keys fall back to the full-scale defaults
(the reference deployment: 4x5 m area, 20 grids, 9 links, 90 subcarriers,
900 epochs). Because a full-scale run takes hours on one core, the CLI
applies a desk-scale override block by default and exposes the full-scale
values behind --full-scale.

validate_config reports every violation with its key path instead of
stopping at the first.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .chansim import ChannelParams
from .geometry import NonDivisibleArea, Scenario, TooManyLinks, build_scenario
from .pipeline import DatasetSpec, TrainConfig

SWEEP_VARIABLES = ("learning_rate", "optimizer", "n_targets", "n_links", "cell_width")
# sweep axes that only change evaluation, so each seed trains once
EVAL_ONLY_VARIABLES = ("n_targets",)

DEFAULTS: dict[str, float | int | str] = {
    "seed": 0,
    "scenario.area_width": 4.0,
    "scenario.area_height": 5.0,
    "scenario.cell_width": 1.0,
    "scenario.n_links": 9,
    "channel.subcarriers_per_pair": 30,
    "channel.antenna_pairs": 3,
    "channel.baseline_taps": 4,
    "channel.diffraction_amp": 12.0,
    "channel.diffraction_width": 0.9,
    "channel.scatter_amp": 4.0,
    "channel.scatter_decay": 0.8,
    "channel.noise_std": 0.5,
    "channel.profile_spread": 0.25,
    "dataset.images_per_location": 100,
    "dataset.window": 90,
    "dataset.multi_label_fraction": 0.2,
    "dataset.max_targets": 3,
    "dataset.train_ratio": 0.6,
    "dataset.val_ratio": 0.2,
    "dataset.test_ratio": 0.2,
    "training.batch_size": 256,
    "training.max_epochs": 900,
    "training.optimizer": "adam",
    "training.learning_rate": 0.001,
    "training.early_stop_patience": 30,
    "training.threshold": 0.5,
    "network.conv_layers": 3,
    "network.kernels": 16,
    "network.kernel_size": 5,
    "network.hidden_units": 128,
    "network.dropout_rate": 0.6,
    "eval.n_targets": 5,
    "eval.n_images": 60,
    "sweep.variable": "",
    "sweep.values": "",
}

DESK_OVERRIDES: dict[str, float | int | str] = {
    "scenario.area_width": 3.0,
    "scenario.area_height": 3.0,
    "scenario.n_links": 4,
    "channel.subcarriers_per_pair": 10,
    "dataset.images_per_location": 60,
    "dataset.window": 30,
    "training.batch_size": 32,
    "training.max_epochs": 200,
    "eval.n_targets": 2,
}

_INT_KEYS = {
    "seed", "scenario.n_links", "channel.subcarriers_per_pair",
    "channel.antenna_pairs", "channel.baseline_taps",
    "dataset.images_per_location", "dataset.window", "dataset.max_targets",
    "training.batch_size", "training.max_epochs", "training.early_stop_patience",
    "network.conv_layers", "network.kernels", "network.kernel_size",
    "network.hidden_units", "eval.n_targets", "eval.n_images",
}
_STR_KEYS = {"training.optimizer", "sweep.variable", "sweep.values"}


class ConfigInvalid(ValueError):
    """One or more config violations; .errors lists them with key paths."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


@dataclass(frozen=True)
class NetConfig:
    conv_layers: int = 3
    kernels: int = 16
    kernel_size: int = 5
    hidden_units: int = 128
    dropout_rate: float = 0.6


@dataclass
class ExperimentConfig:
    scenario: Scenario
    channel: ChannelParams
    images_per_location: int
    window: int
    multi_label_fraction: float
    max_targets: int
    split_ratio: tuple[float, float, float]
    training: TrainConfig
    network: NetConfig
    eval_n_targets: int
    eval_n_images: int
    sweep_variable: str | None
    sweep_values: list
    seed: int
    normalized: dict[str, str]

    def dataset_spec(self, seed: int | None = None) -> DatasetSpec:
        """Materialize the dataset recipe, rekeying the channel to the run seed."""
        run_seed = self.seed if seed is None else seed
        return DatasetSpec(
            scenario=self.scenario,
            channel=dataclasses.replace(self.channel, seed=run_seed),
            images_per_location=self.images_per_location,
            window=self.window,
            multi_label_fraction=self.multi_label_fraction,
            max_targets_in_training=self.max_targets,
            split_ratio=self.split_ratio,
            seed=run_seed,
        )


def _canon(value: float | int | str) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_config_file(path: str | Path) -> dict[str, str]:
    """Raw key -> string map from one file; syntax errors raise ConfigInvalid."""
    entries: dict[str, str] = {}
    errors: list[str] = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: {line!r} is not key=value")
            continue
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    if errors:
        raise ConfigInvalid(errors)
    return entries


def _merge(file_entries: dict[str, str], desk_scale: bool,
           errors: list[str]) -> dict[str, float | int | str]:
    merged = dict(DEFAULTS)
    if desk_scale:
        merged.update(DESK_OVERRIDES)
    for key, raw in file_entries.items():
        if key not in DEFAULTS:
            errors.append(f"{key}: unknown key")
            continue
        if key in _STR_KEYS:
            merged[key] = raw
        elif key in _INT_KEYS:
            try:
                merged[key] = int(raw)
            except ValueError:
                errors.append(f"{key}: expected integer, got {raw!r}")
        else:
            try:
                merged[key] = float(raw)
            except ValueError:
                errors.append(f"{key}: expected number, got {raw!r}")
    return merged


def _parse_sweep(merged: dict, errors: list[str]) -> tuple[str | None, list]:
    variable = str(merged["sweep.variable"]).strip()
    raw_values = str(merged["sweep.values"]).strip()
    if not variable:
        if raw_values:
            errors.append("sweep.values: set without sweep.variable")
        return None, []
    if variable not in SWEEP_VARIABLES:
        errors.append(f"sweep.variable: unknown {variable!r}, "
                      f"expected one of {', '.join(SWEEP_VARIABLES)}")
        return None, []
    if not raw_values:
        errors.append("sweep.values: empty value list")
        return variable, []
    values: list = []
    for token in raw_values.split(","):
        token = token.strip()
        try:
            if variable == "optimizer":
                if token not in ("adam", "sgd"):
                    raise ValueError
                values.append(token)
            elif variable in ("n_targets", "n_links"):
                values.append(int(token))
            else:
                values.append(float(token))
        except ValueError:
            errors.append(f"sweep.values: bad value {token!r} for {variable}")
    return variable, values


def build_config(file_entries: dict[str, str] | None = None,
                 desk_scale: bool = False,
                 seed: int | None = None) -> ExperimentConfig:
    """Merge defaults, optional desk-scale overrides, and file entries.

    Collects every violation (with its key path) before raising ConfigInvalid,
    so a bad file reports all problems at once.
    """
    errors: list[str] = []
    merged = _merge(file_entries or {}, desk_scale, errors)
    if seed is not None:
        merged["seed"] = seed
    if errors:
        raise ConfigInvalid(errors)

    scenario = None
    try:
        scenario = build_scenario(
            area_width=float(merged["scenario.area_width"]),
            area_height=float(merged["scenario.area_height"]),
            cell_width=float(merged["scenario.cell_width"]),
            n_links=int(merged["scenario.n_links"]),
        )
    except TooManyLinks as exc:
        errors.append(f"scenario.n_links: {exc}")
    except NonDivisibleArea as exc:
        errors.append(f"scenario.cell_width: {exc}")
    except ValueError as exc:
        errors.append(f"scenario.area_width: {exc}")

    channel = None
    try:
        channel = ChannelParams(
            n_subcarriers_per_pair=int(merged["channel.subcarriers_per_pair"]),
            n_antenna_pairs=int(merged["channel.antenna_pairs"]),
            baseline_taps=int(merged["channel.baseline_taps"]),
            diffraction_amp=float(merged["channel.diffraction_amp"]),
            diffraction_width=float(merged["channel.diffraction_width"]),
            scatter_amp=float(merged["channel.scatter_amp"]),
            scatter_decay=float(merged["channel.scatter_decay"]),
            noise_std=float(merged["channel.noise_std"]),
            profile_spread=float(merged["channel.profile_spread"]),
            seed=int(merged["seed"]),
        )
    except ValueError as exc:
        errors.append(f"channel: {exc}")

    training = None
    try:
        training = TrainConfig(
            batch_size=int(merged["training.batch_size"]),
            max_epochs=int(merged["training.max_epochs"]),
            optimizer=str(merged["training.optimizer"]),
            learning_rate=float(merged["training.learning_rate"]),
            early_stop_patience=int(merged["training.early_stop_patience"]),
            threshold=float(merged["training.threshold"]),
        )
    except ValueError as exc:
        errors.append(f"training.{_training_key(str(exc))}: {exc}")
    if training is not None and training.optimizer not in ("adam", "sgd"):
        errors.append(f"training.optimizer: unknown {training.optimizer!r}")

    ratios = (float(merged["dataset.train_ratio"]), float(merged["dataset.val_ratio"]),
              float(merged["dataset.test_ratio"]))
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        errors.append(f"dataset.train_ratio: split ratios {ratios} must be positive "
                      "and sum to 1")
    fraction = float(merged["dataset.multi_label_fraction"])
    if not 0.0 <= fraction <= 1.0:
        errors.append(f"dataset.multi_label_fraction: {fraction} outside [0, 1]")
    for key in ("dataset.images_per_location", "dataset.window", "eval.n_images"):
        if int(merged[key]) < 1:
            errors.append(f"{key}: must be >= 1")
    if int(merged["dataset.max_targets"]) < 1:
        errors.append("dataset.max_targets: must be >= 1")
    if int(merged["eval.n_targets"]) < 1:
        errors.append("eval.n_targets: must be >= 1")

    net = NetConfig(
        conv_layers=int(merged["network.conv_layers"]),
        kernels=int(merged["network.kernels"]),
        kernel_size=int(merged["network.kernel_size"]),
        hidden_units=int(merged["network.hidden_units"]),
        dropout_rate=float(merged["network.dropout_rate"]),
    )
    if net.conv_layers < 1 or net.kernels < 1 or net.hidden_units < 1:
        errors.append("network.conv_layers: layer, kernel, and unit counts must be >= 1")
    if net.kernel_size < 1 or net.kernel_size % 2 == 0:
        errors.append(f"network.kernel_size: {net.kernel_size} must be odd")
    if not 0.0 <= net.dropout_rate < 1.0:
        errors.append(f"network.dropout_rate: {net.dropout_rate} outside [0, 1)")

    variable, values = _parse_sweep(merged, errors)
    if errors:
        raise ConfigInvalid(errors)

    normalized = {k: _canon(v) for k, v in sorted(merged.items()) if k != "seed"}
    return ExperimentConfig(
        scenario=scenario,
        channel=channel,
        images_per_location=int(merged["dataset.images_per_location"]),
        window=int(merged["dataset.window"]),
        multi_label_fraction=fraction,
        max_targets=int(merged["dataset.max_targets"]),
        split_ratio=ratios,
        training=training,
        network=net,
        eval_n_targets=int(merged["eval.n_targets"]),
        eval_n_images=int(merged["eval.n_images"]),
        sweep_variable=variable,
        sweep_values=values,
        seed=int(merged["seed"]),
        normalized=normalized,
    )


def _training_key(message: str) -> str:
    for name in ("batch_size", "max_epochs", "learning_rate", "early_stop_patience",
                 "threshold"):
        if name in message:
            return name
    return "optimizer"


def validate_config(path: str | Path | None, desk_scale: bool = False,
                    seed: int | None = None) -> ExperimentConfig:
    """Load, default-fill, and validate a config file (None means no file)."""
    entries = read_config_file(path) if path is not None else {}
    return build_config(entries, desk_scale=desk_scale, seed=seed)
