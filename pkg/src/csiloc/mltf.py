"""Amplitude dynamics and multi-link time-frequency (MLTF) images.

A raw batch is differenced against its averaged ambient reference to isolate
the target-induced amplitude dynamic. Per-link dynamic matrices are then cut
into windows of T packets and stacked links-as-channels into T x d x M
tensors, each labeled with the binary occupancy vector of the grid.

The dataset file format lives here too: a text manifest plus a flat
little-endian float32 record file, written so a load/save cycle is bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .chansim import CsiBatch

DATASET_FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.txt"
RECORDS_NAME = "records.bin"


class WindowMismatch(ValueError):
    """Window length does not tile the packet axis, or link shapes disagree."""


@dataclass(frozen=True)
class LocationVector:
    """Binary occupancy vector over the N grid cells; bit n marks a target in cell n."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("location vector entries must be 0 or 1")

    @classmethod
    def from_grids(cls, n_grids: int, grids: Iterable[int]) -> "LocationVector":
        bits = [0] * n_grids
        for g in grids:
            if not 0 <= g < n_grids:
                raise IndexError(f"grid {g} outside [0, {n_grids})")
            bits[g] = 1
        return cls(tuple(bits))

    @property
    def k(self) -> int:
        return sum(self.bits)

    def grids(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bits) if b)

    def array(self, dtype=np.float32) -> np.ndarray:
        return np.asarray(self.bits, dtype=dtype)

    def __len__(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class MltfImage:
    """One T x d x M tensor (packets x subcarriers x links) with its label."""

    tensor: np.ndarray
    label: LocationVector

    def __post_init__(self):
        if self.tensor.ndim != 3:
            raise ValueError("MLTF tensor must be T x d x M")
        if not np.isfinite(self.tensor).all():
            raise ValueError("MLTF tensor must be finite")


def amplitude_dynamic(batch: CsiBatch) -> np.ndarray:
    """Measurement minus the packet-averaged ambient reference, per subcarrier.

    Averaging the target-free reference over its packets suppresses reference
    noise before subtraction; the static baseline cancels exactly.
    """
    return batch.amplitudes - batch.ambient.mean(axis=0)


def build_images(
    dynamics: Sequence[np.ndarray], label: LocationVector, window: int
) -> list[MltfImage]:
    """Cut per-link dynamic matrices into T-packet windows stacked links-last.

    Image i holds rows [i*T, (i+1)*T) of every link, in link order. Raises
    WindowMismatch unless all links share the packet count and T tiles it.
    """
    if not dynamics:
        raise WindowMismatch("need at least one link matrix")
    t_total = dynamics[0].shape[0]
    for m, dyn in enumerate(dynamics):
        if dyn.ndim != 2 or dyn.shape[0] != t_total:
            raise WindowMismatch(f"link {m} shape {dyn.shape} does not match T_total={t_total}")
    if window < 1 or t_total % window != 0:
        raise WindowMismatch(f"window {window} does not tile {t_total} packets")
    stacked = np.stack(dynamics, axis=-1)
    return [
        MltfImage(stacked[i * window : (i + 1) * window].copy(), label)
        for i in range(t_total // window)
    ]


@dataclass(frozen=True)
class NormStats:
    """Per-link-channel standardization statistics, from the training split only."""

    mean: np.ndarray  # (M,)
    std: np.ndarray  # (M,)


def compute_norm_stats(images: Sequence[MltfImage]) -> NormStats:
    if not images:
        raise ValueError("cannot compute statistics from an empty split")
    stacked = np.stack([im.tensor for im in images])  # (P, T, d, M)
    mean = stacked.mean(axis=(0, 1, 2), dtype=np.float64)
    std = stacked.std(axis=(0, 1, 2), dtype=np.float64)
    return NormStats(mean=mean, std=std)


def normalize(images: Sequence[MltfImage], stats: NormStats) -> list[MltfImage]:
    """Standardize each link channel; channels with zero spread are only centered."""
    scale = np.where(stats.std > 0, stats.std, 1.0)
    out = []
    for im in images:
        tensor = ((im.tensor - stats.mean) / scale).astype(im.tensor.dtype)
        out.append(MltfImage(tensor, im.label))
    return out


@dataclass
class Dataset:
    """Train/val/test splits of MLTF images plus the shape metadata."""

    train: list[MltfImage]
    val: list[MltfImage]
    test: list[MltfImage]
    window: int
    d: int
    n_links: int
    n_grids: int
    seed: int

    def splits(self) -> tuple[list[MltfImage], list[MltfImage], list[MltfImage]]:
        return self.train, self.val, self.test

    def all_images(self) -> list[MltfImage]:
        return self.train + self.val + self.test


def save_dataset(ds: Dataset, directory: str | Path) -> None:
    """Write manifest.txt plus records.bin; records are float32 LE tensors
    in (time, subcarrier, link) order followed by N label bytes each."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = (
        f"format_version={DATASET_FORMAT_VERSION}\n"
        f"T={ds.window}\n"
        f"d={ds.d}\n"
        f"M={ds.n_links}\n"
        f"N={ds.n_grids}\n"
        f"n_train={len(ds.train)}\n"
        f"n_val={len(ds.val)}\n"
        f"n_test={len(ds.test)}\n"
        f"seed={ds.seed}\n"
    )
    (directory / MANIFEST_NAME).write_text(manifest, encoding="utf-8")
    with open(directory / RECORDS_NAME, "wb") as fh:
        for im in ds.all_images():
            fh.write(np.ascontiguousarray(im.tensor, dtype="<f4").tobytes())
            fh.write(bytes(im.label.bits))


def load_dataset(directory: str | Path) -> Dataset:
    directory = Path(directory)
    fields: dict[str, int] = {}
    for line in (directory / MANIFEST_NAME).read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition("=")
        fields[key] = int(value)
    if fields.get("format_version") != DATASET_FORMAT_VERSION:
        raise ValueError(f"unsupported dataset format version {fields.get('format_version')}")
    t, d, m, n = fields["T"], fields["d"], fields["M"], fields["N"]
    counts = (fields["n_train"], fields["n_val"], fields["n_test"])
    record_floats = t * d * m
    record_size = record_floats * 4 + n
    splits: list[list[MltfImage]] = []
    with open(directory / RECORDS_NAME, "rb") as fh:
        for count in counts:
            images = []
            for _ in range(count):
                rec = fh.read(record_size)
                if len(rec) != record_size:
                    raise ValueError("record file truncated")
                tensor = np.frombuffer(rec[: record_floats * 4], dtype="<f4").reshape(t, d, m)
                label = LocationVector(tuple(rec[record_floats * 4 :]))
                images.append(MltfImage(tensor.copy(), label))
            splits.append(images)
        if fh.read(1):
            raise ValueError("trailing bytes after last record")
    return Dataset(
        train=splits[0],
        val=splits[1],
        test=splits[2],
        window=t,
        d=d,
        n_links=m,
        n_grids=n,
        seed=fields["seed"],
    )
