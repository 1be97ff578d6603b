"""Topology and per-round Rayleigh fading draws."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ehfl.rng import substream


@dataclass(frozen=True)
class Topology:
    distances: np.ndarray
    path_loss_exp: float

    @property
    def gains(self) -> np.ndarray:
        """Large-scale gains ``beta_m = d_m ** -p``."""
        return self.distances ** (-self.path_loss_exp)

    def mean_gain(self, devices=None) -> float:
        g = self.gains
        return float(g.mean() if devices is None else g[list(devices)].mean())


def build_topology(num_devices: int, d_range, path_loss_exp: float, rng: np.random.Generator) -> Topology:
    d_lo, d_hi = d_range
    if not 0 < d_lo <= d_hi:
        raise ValueError(f"distance range must satisfy 0 < d_lo <= d_hi, got {d_range}")
    return Topology(rng.uniform(d_lo, d_hi, size=num_devices), float(path_loss_exp))


def complex_normal(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    """i.i.d. CN(0, variance) entries."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass
class ChannelRealization:
    """``h[i, k, n]`` for the ``i``-th participant and noise ``z[k, n]``."""

    devices: list
    h: np.ndarray
    z: np.ndarray

    @property
    def antennas(self) -> int:
        return self.h.shape[1]

    @property
    def symbols(self) -> int:
        return self.h.shape[2]


def draw_channel(
    gains: Sequence[float],
    devices: Sequence[int],
    antennas: int,
    symbols: int,
    sigma_h2: float,
    sigma_z2: float,
    seed: int,
    t: int,
) -> ChannelRealization:
    """Fresh fading for round ``t``; each device has its own substream."""
    devices = list(devices)
    if not devices:
        raise ValueError("channel draw needs at least one participant")
    gains = np.asarray(gains, dtype=np.float64)
    h = np.empty((len(devices), antennas, symbols), dtype=np.complex128)
    for i, m in enumerate(devices):
        rng = substream(seed, "channel", t, m)
        h[i] = np.sqrt(gains[m]) * complex_normal(rng, (antennas, symbols), sigma_h2)
    if sigma_z2 > 0:
        z = complex_normal(substream(seed, "noise", t), (antennas, symbols), sigma_z2)
    else:
        z = np.zeros((antennas, symbols), dtype=np.complex128)
    return ChannelRealization(devices, h, z)


def draw_channel_batch(
    rng: np.random.Generator,
    gains: Sequence[float],
    antennas: int,
    symbols: int,
    sigma_h2: float,
    sigma_z2: float,
) -> ChannelRealization:
    """Single-generator draw for Monte-Carlo studies outside the trainer."""
    gains = np.asarray(gains, dtype=np.float64)
    h = np.sqrt(gains)[:, None, None] * complex_normal(rng, (len(gains), antennas, symbols), sigma_h2)
    if sigma_z2 > 0:
        z = complex_normal(rng, (antennas, symbols), sigma_z2)
    else:
        z = np.zeros((antennas, symbols), dtype=np.complex128)
    return ChannelRealization(list(range(len(gains))), h, z)


def resolve_beta_bar(mode: str, topology_gains, devices) -> float:
    """``mean_participants`` | ``mean_all`` | ``fixed:<value>``."""
    gains = np.asarray(topology_gains, dtype=np.float64)
    if mode == "mean_participants":
        return float(gains[list(devices)].mean())
    if mode == "mean_all":
        return float(gains.mean())
    if mode.startswith("fixed:"):
        value = float(mode.split(":", 1)[1])
        if value <= 0:
            raise ValueError(f"fixed beta_bar must be positive, got {value}")
        return value
    raise ValueError(f"unknown beta_bar mode {mode!r}")
