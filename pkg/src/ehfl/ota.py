"""Over-the-air aggregation chain and the error-free baseline.

Participants scale their model differences by ``C_m = p_m * c_m``, pack
them into complex symbols and transmit simultaneously.  The server sees
the superposition at each of its ``K`` antennas, combines with the
conjugate of the summed channel and rescales by ``C(t) sigma_h^2 beta_bar``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ehfl.channel import ChannelRealization
from ehfl.model import pack, unpack


class RoundSkipped(Exception):
    """No participant (or zero total weight): the global model stays put."""


@dataclass
class ScaledDifference:
    values: np.ndarray
    weight: float


@dataclass
class CombinedSignal:
    y: np.ndarray
    signal: np.ndarray
    interference: np.ndarray
    noise: np.ndarray

    def powers(self) -> dict:
        return {
            "sig_power": float(np.mean(np.abs(self.signal) ** 2)),
            "int_power": float(np.mean(np.abs(self.interference) ** 2)),
            "noise_power": float(np.mean(np.abs(self.noise) ** 2)),
        }


def scale_differences(delta, p: float, cooldown: float) -> ScaledDifference:
    if cooldown <= 0:
        raise ValueError(f"cooldown multiplier must be positive, got {cooldown}")
    if p <= 0:
        raise ValueError(f"data ratio must be positive, got {p}")
    weight = p * cooldown
    return ScaledDifference(weight * np.asarray(delta, dtype=np.float64), weight)


def total_weight(scaled: Sequence[ScaledDifference]) -> float:
    return float(sum(s.weight for s in scaled))


def aggregate_error_free(scaled: Sequence[ScaledDifference]) -> np.ndarray:
    """``(1 / C(t)) * sum_m C_m Delta_m``."""
    if not scaled:
        raise RoundSkipped("no participants")
    c = total_weight(scaled)
    if c <= 0:
        raise RoundSkipped("total weight is zero")
    out = np.zeros_like(scaled[0].values)
    for s in scaled:
        out += s.values
    return out / c


def transmit_and_combine(symbols: np.ndarray, channel: ChannelRealization) -> CombinedSignal:
    """Superpose ``symbols[i]`` (participant ``i``) over ``channel`` and combine.

    The signal/interference/noise split is computed term by term, not by
    subtraction, so their sum reproducing ``y`` is a real check.
    """
    x = np.asarray(symbols, dtype=np.complex128)
    h, z = channel.h, channel.z
    if x.ndim != 2 or x.shape[0] != h.shape[0] or x.shape[1] != h.shape[2]:
        raise ValueError(
            f"symbols of shape {x.shape} do not match channel of shape {h.shape}"
        )
    if z.shape != h.shape[1:]:
        raise ValueError(f"noise shape {z.shape} does not match channel {h.shape}")
    k = h.shape[1]

    # per-antenna superposition
    y_ant = np.einsum("mkn,mn->kn", h, x) + z
    h_sum = h.sum(axis=0)
    y = np.mean(np.conj(h_sum) * y_ant, axis=0)

    gain = np.mean(np.abs(h) ** 2, axis=1)  # (m, n)
    signal = np.sum(gain * x, axis=0)
    others = np.conj(h_sum)[None, :, :] - np.conj(h)  # sum over m != m'
    interference = np.sum(others * h, axis=1) / k
    interference = np.sum(interference * x, axis=0)
    noise = np.sum(np.conj(h_sum) * z, axis=0) / k
    return CombinedSignal(y, signal, interference, noise)


def recover(y, total: float, sigma_h2: float, beta_bar: float) -> np.ndarray:
    """Real vector estimate of the aggregated difference."""
    if total <= 0:
        raise RoundSkipped("total weight is zero")
    if beta_bar <= 0 or sigma_h2 <= 0:
        raise ValueError("beta_bar and sigma_h2 must be positive")
    if isinstance(y, CombinedSignal):
        y = y.y
    return unpack(np.asarray(y)) / (total * sigma_h2 * beta_bar)


def aggregate_ota(
    scaled: Sequence[ScaledDifference],
    channel: ChannelRealization,
    sigma_h2: float,
    beta_bar: float,
):
    """Full chain; returns ``(estimate, combined_signal)``."""
    if not scaled:
        raise RoundSkipped("no participants")
    c = total_weight(scaled)
    symbols = np.stack([pack(s.values) for s in scaled])
    combined = transmit_and_combine(symbols, channel)
    return recover(combined.y, c, sigma_h2, beta_bar), combined


def noise_variance(
    sigma_z2: float,
    total: float,
    antennas: int,
    sigma_h2: float,
    beta_bar: float,
    gains: Sequence[float],
) -> float:
    """Per-entry variance of the recovered noise-only output."""
    return sigma_z2 * float(np.sum(gains)) / (2.0 * total ** 2 * antennas * sigma_h2 * beta_bar ** 2)


def transmit_energy(scaled: Sequence[ScaledDifference]) -> float:
    return float(sum(np.sum(s.values ** 2) for s in scaled))
