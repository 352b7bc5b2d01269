"""Deterministic synthetic CSI amplitude generator.

Per link the amplitude (dB) splits into a static frequency-selective baseline,
a target-dependent effect, and optional Gaussian measurement noise. Only the
effect carries location information: a target near the line of sight costs
diffraction fading, a target off the line adds scattering gain, and both terms
are shaped across subcarriers by a per-(link, grid) spectral profile so that
different cells leave distinguishable signatures. Differencing a measurement
against the target-free ambient reference cancels the baseline exactly.

All randomness comes from counter-based streams keyed on (seed, purpose, ...)
so generation is reproducible and trivially parallel over links and locations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .geometry import Scenario, grid_center, point_to_segment_distance

# stream tags, so distinct purposes never share a substream
_TAG_BASELINE = 0
_TAG_PROFILE = 1
_TAG_NOISE = 2


@dataclass(frozen=True)
class ChannelParams:
    """Knobs of the synthetic channel.

    ``d = n_subcarriers_per_pair * n_antenna_pairs`` is the width of every
    per-packet amplitude record. Amplitude terms are in dB; ``scatter_decay``
    is per meter of excess path length.
    """

    n_subcarriers_per_pair: int = 10
    n_antenna_pairs: int = 3
    baseline_taps: int = 4
    diffraction_amp: float = 12.0
    diffraction_width: float = 0.9
    scatter_amp: float = 4.0
    scatter_decay: float = 0.8
    noise_std: float = 0.5
    seed: int = 0
    profile_spread: float = 0.25

    def __post_init__(self):
        if self.n_subcarriers_per_pair < 1 or self.n_antenna_pairs < 1:
            raise ValueError("subcarrier and antenna-pair counts must be >= 1")
        if self.baseline_taps < 1:
            raise ValueError("baseline_taps must be >= 1")
        if self.diffraction_width <= 0 or self.scatter_decay <= 0:
            raise ValueError("diffraction_width and scatter_decay must be > 0")
        if self.diffraction_amp < 0 or self.scatter_amp < 0 or self.noise_std < 0:
            raise ValueError("amplitudes and noise_std must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    @property
    def d(self) -> int:
        return self.n_subcarriers_per_pair * self.n_antenna_pairs


@dataclass(frozen=True)
class CsiBatch:
    """Per-link amplitude records: T packets with a target present, and a
    matching target-free ambient reference."""

    link: int
    amplitudes: np.ndarray  # (T, d) dB
    ambient: np.ndarray  # (T, d) dB

    def __post_init__(self):
        if self.amplitudes.shape != self.ambient.shape:
            raise ValueError("amplitudes and ambient must share shape")
        if not (np.isfinite(self.amplitudes).all() and np.isfinite(self.ambient).all()):
            raise ValueError("CSI amplitudes must be finite")


def _stream(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(key))


def baseline_amplitude(params: ChannelParams, s: Scenario, link: int) -> np.ndarray:
    """Static frequency-selective amplitude curve of a link, in dB.

    Tap 0 is the direct path (unit gain, zero delay); the remaining taps get
    pseudorandom delays and complex gains with geometrically decaying
    magnitude, keyed by (seed, link). Magnitudes sum below 1, so the response
    never cancels and the dB conversion is always finite.
    """
    if not 0 <= link < s.n_links:
        raise IndexError(f"link {link} outside [0, {s.n_links})")
    d = params.d
    k = np.arange(d)
    h = np.ones(d, dtype=complex)
    rng = _stream(params.seed, _TAG_BASELINE, link)
    for j in range(1, params.baseline_taps):
        mag = rng.uniform(0.1, 0.45) * 0.5 ** (j - 1) * 0.5
        phase = rng.uniform(0.0, 2.0 * math.pi)
        delay = rng.uniform(0.5, 6.0)  # cycles across the band
        h += mag * np.exp(1j * (phase - 2.0 * math.pi * delay * k / d))
    return 20.0 * np.log10(np.abs(h))


def _spectral_profile(params: ChannelParams, link: int, grid: int) -> np.ndarray:
    """Fixed unit-mean subcarrier profile for one (link, grid) pair."""
    rng = _stream(params.seed, _TAG_PROFILE, link, grid)
    raw = np.exp(params.profile_spread * rng.standard_normal(params.d))
    return raw / raw.mean()


def diffraction_fading(params: ChannelParams, r: float) -> float:
    """Mean amplitude loss (dB) for a target at distance r from the LOS path."""
    return params.diffraction_amp * math.exp(-(r * r) / (2.0 * params.diffraction_width**2))


def scattering_gain(params: ChannelParams, excess: float) -> float:
    """Mean amplitude gain (dB) for a scatter path with the given excess length."""
    return params.scatter_amp * math.exp(-params.scatter_decay * excess)


def target_effect(
    params: ChannelParams, s: Scenario, link: int, targets: Iterable[int]
) -> np.ndarray:
    """Net amplitude change (dB per subcarrier) induced by the given targets.

    Per target: subtract diffraction fading, add scattering gain, both scaled
    by that target cell's spectral profile. Contributions sum over targets.
    """
    ap, dp = s.link_segment(link)
    effect = np.zeros(params.d)
    for grid in targets:
        c = grid_center(s, grid)
        r = point_to_segment_distance(c, ap, dp)
        excess = (
            math.dist(ap, c) + math.dist(c, dp) - math.dist(ap, dp)
        )
        net = -diffraction_fading(params, r) + scattering_gain(params, excess)
        effect += net * _spectral_profile(params, link, grid)
    return effect


def simulate_batch(
    params: ChannelParams,
    s: Scenario,
    link: int,
    targets: Iterable[int],
    n_packets: int,
    packet_seed: int,
) -> CsiBatch:
    """Generate T packets of amplitude plus the ambient reference for one link."""
    if n_packets < 1:
        raise ValueError("n_packets must be >= 1")
    base = baseline_amplitude(params, s, link)
    effect = target_effect(params, s, link, targets)
    shape = (n_packets, params.d)
    if params.noise_std > 0:
        rng = _stream(packet_seed, _TAG_NOISE, link)
        noise_amb = rng.normal(0.0, params.noise_std, size=shape)
        noise_tgt = rng.normal(0.0, params.noise_std, size=shape)
    else:
        noise_amb = np.zeros(shape)
        noise_tgt = np.zeros(shape)
    return CsiBatch(
        link=link,
        amplitudes=base + effect + noise_tgt,
        ambient=base + noise_amb,
    )
