"""Energy arrival processes and cooldown bookkeeping.

Each device harvests either one unit of energy or nothing per round.  A
unit pays for the local SGD steps and the upload of the same round, so a
device participates exactly in the rounds where energy arrives.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from ehfl.rng import substream


@dataclass(frozen=True)
class EnergyProfile:
    """``kind`` is ``"bernoulli"`` (rate ``alpha``) or ``"uniform"`` (period ``period``)."""

    kind: str
    alpha: float = 1.0
    period: int = 1
    phase: int = 0

    def __post_init__(self):
        if self.kind == "bernoulli":
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError(f"bernoulli rate must lie in [0, 1], got {self.alpha}")
        elif self.kind == "uniform":
            if int(self.period) != self.period or self.period < 1:
                raise ValueError(f"uniform period must be a positive integer, got {self.period}")
            if not 0 <= self.phase < self.period:
                raise ValueError(f"phase must lie in [0, {self.period}), got {self.phase}")
        else:
            raise ValueError(f"unknown energy profile kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "EnergyProfile":
        """Parse ``bernoulli:0.1`` or ``uniform:20`` (optionally ``uniform:20@3`` for a phase)."""
        kind, sep, arg = text.strip().partition(":")
        if not sep:
            raise ValueError(f"energy profile must look like 'kind:value', got {text!r}")
        kind = kind.strip().lower()
        if kind == "bernoulli":
            return cls("bernoulli", alpha=_parse_rate(arg))
        if kind == "uniform":
            period, _, phase = arg.partition("@")
            return cls("uniform", period=int(period), phase=int(phase) if phase else 0)
        raise ValueError(f"unknown energy profile kind {kind!r}")

    def __str__(self) -> str:
        if self.kind == "bernoulli":
            return f"bernoulli:{self.alpha!r}"
        return f"uniform:{self.period}@{self.phase}"

    @property
    def rate(self) -> float:
        """Long-run arrival probability per round."""
        return self.alpha if self.kind == "bernoulli" else 1.0 / self.period


def _parse_rate(arg: str) -> float:
    arg = arg.strip()
    if "/" in arg:
        num, den = arg.split("/", 1)
        return float(num) / float(den)
    return float(arg)


@dataclass(frozen=True)
class EnergyState:
    """Last arrival ``lambda_m`` (``None`` before the first) and the current cooldown ``c_m``."""

    last_arrival: Optional[int] = None
    cooldown: int = 1
    last_t: Optional[int] = None
    start: int = 0


def sample_arrival(profile: EnergyProfile, t: int, rng: Optional[np.random.Generator] = None) -> int:
    """Draw ``E_m(t)``; the uniform profile consumes no randomness."""
    if t < 0:
        raise ValueError(f"iteration index must be non-negative, got {t}")
    if profile.kind == "uniform":
        return int((t - profile.phase) % profile.period == 0)
    if profile.alpha >= 1.0:
        return 1
    if profile.alpha <= 0.0:
        return 0
    return int(rng.random() < profile.alpha)


def update_cooldown(state: EnergyState, t: int, arrived: int) -> EnergyState:
    """Advance the bookkeeping to round ``t``.

    ``cooldown`` becomes ``t - lambda_m`` with ``lambda_m`` the previous
    arrival; before any arrival a virtual one at ``start - 1`` is assumed.
    When ``arrived`` the arrival is recorded after the cooldown is taken.
    """
    if state.last_t is not None and t <= state.last_t:
        raise ValueError(f"rounds must strictly increase: got {t} after {state.last_t}")
    if state.last_arrival is None:
        cooldown = t - state.start + 1
    else:
        cooldown = t - state.last_arrival
    return replace(
        state,
        cooldown=cooldown,
        last_t=t,
        last_arrival=t if arrived else state.last_arrival,
    )


def assign_phases(profiles: Sequence[EnergyProfile], seed: int) -> list:
    """Give each uniform profile a phase drawn uniformly from ``[0, T_m)``."""
    out = []
    for m, prof in enumerate(profiles):
        if prof.kind == "uniform":
            phase = int(substream(seed, "phase", m).integers(prof.period))
            prof = replace(prof, phase=phase)
        out.append(prof)
    return out


def participants(profiles, states, t: int, seed: int, force_all: bool = False):
    """Return ``(S_t, new_states)``.

    ``S_t`` lists the devices with ``E_m(t) = 1`` in ascending order; the
    cooldown in each returned state is the value for round ``t``.
    """
    selected = []
    new_states = []
    for m, (prof, st) in enumerate(zip(profiles, states)):
        if force_all:
            e = 1
        else:
            rng = substream(seed, "energy", m, t) if prof.kind == "bernoulli" else None
            e = sample_arrival(prof, t, rng)
        new_states.append(update_cooldown(st, t, e))
        if e:
            selected.append(m)
    return selected, new_states


def group_profiles(groups: Sequence[str], num_devices: int) -> list:
    """Split ``num_devices`` into equal consecutive groups, one profile string each."""
    if not groups:
        raise ValueError("need at least one energy profile group")
    if num_devices % len(groups):
        raise ValueError(f"{num_devices} devices cannot be split into {len(groups)} equal groups")
    size = num_devices // len(groups)
    return [EnergyProfile.parse(g) for g in groups for _ in range(size)]
