"""Global training rounds.

One round: energy arrivals decide the participant set, every participant
runs ``tau`` local steps from the broadcast model, the differences are
weighted by ``p_m(t) c_m(t)`` and aggregated either error-free or over
the air, and the server applies the aggregate.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from ehfl import model as mc
from ehfl.channel import Topology, build_topology, draw_channel, resolve_beta_bar
from ehfl.energy import EnergyState, assign_phases, group_profiles, participants
from ehfl.ota import RoundSkipped, aggregate_error_free, aggregate_ota, scale_differences
from ehfl.rng import substream

log = logging.getLogger(__name__)

SCENARIOS = (
    "conventional_fl",
    "ota_full_energy",
    "eh_error_free",
    "eh_error_free_unweighted",
    "eh_ota",
)
TASKS = ("quadratic", "logistic", "small-dense-net")
OPTIMIZERS = ("sgd", "adam")

DEFAULT_GROUPS = ("bernoulli:1", "bernoulli:1/5", "bernoulli:1/10", "bernoulli:1/20")


@dataclass
class ScenarioConfig:
    scenario: str = "eh_ota"
    tau: int = 1
    rounds: int = 1000
    eta: float = 0.05
    eta_decay: float = 0.0
    batch: int = 128
    optimizer: str = "sgd"
    seed: int = 0
    num_devices: int = 40
    antennas: Optional[int] = None  # None: 5 * num_devices
    d_min: float = 0.5
    d_max: float = 2.0
    path_loss_exp: float = 4.0
    sigma_h2: float = 1.0
    sigma_z2: float = 1.0
    energy_groups: tuple = DEFAULT_GROUPS
    beta_bar: str = "mean_participants"
    task: str = "quadratic"
    dim: int = 20
    samples_per_device: int = 200
    sample_spread: float = 1.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        self.energy_groups = tuple(self.energy_groups)
        self.validate()

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario: unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.task not in TASKS:
            raise ValueError(f"task: unknown task {self.task!r}; expected one of {TASKS}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer: unknown optimizer {self.optimizer!r}")
        for name in ("tau", "num_devices", "batch", "samples_per_device"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name}: must be >= 1, got {getattr(self, name)}")
        if self.rounds < 0:
            raise ValueError(f"rounds: must be >= 0, got {self.rounds}")
        if self.seed < 0:
            raise ValueError(f"seed: must be >= 0, got {self.seed}")
        if self.eta < 0 or self.eta_decay < 0:
            raise ValueError("eta/eta_decay: must be non-negative")
        if self.antennas is not None and self.antennas < 1:
            raise ValueError(f"antennas: must be >= 1, got {self.antennas}")
        if not 0 < self.d_min <= self.d_max:
            raise ValueError(f"d_min/d_max: need 0 < d_min <= d_max, got {self.d_min}, {self.d_max}")
        if self.sigma_h2 <= 0 or self.sigma_z2 < 0:
            raise ValueError("sigma_h2 must be > 0 and sigma_z2 >= 0")
        if self.dim < 2 or self.dim % 2:
            raise ValueError(f"dim: must be even and >= 2, got {self.dim}")
        if self.num_devices % len(self.energy_groups):
            raise ValueError(
                f"energy_groups: {self.num_devices} devices cannot be split into "
                f"{len(self.energy_groups)} equal groups"
            )
        group_profiles(self.energy_groups, self.num_devices)
        resolve_beta_bar(self.beta_bar, [1.0], [0])

    @property
    def num_antennas(self) -> int:
        return 5 * self.num_devices if self.antennas is None else self.antennas

    @property
    def uses_energy(self) -> bool:
        return self.scenario.startswith("eh_")

    @property
    def over_the_air(self) -> bool:
        return self.scenario in ("ota_full_energy", "eh_ota")

    @property
    def weighted(self) -> bool:
        return self.scenario != "eh_error_free_unweighted"

    def learning_rate(self, t: int) -> float:
        return max(self.eta - self.eta_decay * t, 0.0)


@dataclass
class RoundRecord:
    t: int
    participants: int
    C_t: float
    loss: float
    accuracy: float
    sig_power: float
    int_power: float
    noise_power: float
    skipped: bool
    wall_time: float = field(default=0.0, compare=False)

    CSV_COLUMNS = (
        "t", "participants", "C_t", "loss", "accuracy",
        "sig_power", "int_power", "noise_power", "skipped",
    )

    def as_row(self) -> tuple:
        return tuple(getattr(self, c) for c in self.CSV_COLUMNS)


def build_task(cfg: ScenarioConfig) -> mc.LossTask:
    rng = substream(cfg.seed, "task")
    if cfg.task == "quadratic":
        return mc.make_quadratic_task(
            cfg.num_devices, cfg.dim, cfg.samples_per_device, cfg.sample_spread, rng
        )
    if cfg.task == "logistic":
        return mc.make_logistic_task(cfg.num_devices, cfg.dim, cfg.samples_per_device, rng=rng)
    return mc.make_dense_task(cfg.num_devices, cfg.samples_per_device, rng=rng)


def local_update(task, m, theta, tau, eta, cfg: ScenarioConfig, t: int, seed: int) -> np.ndarray:
    """``tau`` local steps from ``theta``; returns the final minus the initial weights."""
    local = np.array(theta, dtype=np.float64)
    rng = substream(seed, "batch", m, t)
    if cfg.optimizer == "adam":
        first = np.zeros_like(local)
        second = np.zeros_like(local)
    for i in range(tau):
        batch = mc.sample_batch(task, m, cfg.batch, rng)
        g = mc.stochastic_gradient(task, m, local, batch)
        if cfg.optimizer == "sgd":
            local -= eta * g
        else:
            b1, b2 = cfg.adam_beta1, cfg.adam_beta2
            first = b1 * first + (1 - b1) * g
            second = b2 * second + (1 - b2) * g * g
            m_hat = first / (1 - b1 ** (i + 1))
            v_hat = second / (1 - b2 ** (i + 1))
            local -= eta * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    return local - theta


class Simulation:
    """Mutable run state: global model, device energy states, topology."""

    def __init__(self, cfg: ScenarioConfig, task: Optional[mc.LossTask] = None,
                 topology: Optional[Topology] = None, profiles=None):
        self.cfg = cfg
        self.task = build_task(cfg) if task is None else task
        if self.task.num_devices != cfg.num_devices:
            raise ValueError("task device count does not match config")
        self.topology = topology or build_topology(
            cfg.num_devices, (cfg.d_min, cfg.d_max), cfg.path_loss_exp, substream(cfg.seed, "topology")
        )
        if profiles is None:
            profiles = assign_phases(group_profiles(cfg.energy_groups, cfg.num_devices), cfg.seed)
        self.profiles = list(profiles)
        self.states = [EnergyState() for _ in range(cfg.num_devices)]
        self.theta = self.task.initial_parameters(substream(cfg.seed, "init"))
        self.records: list[RoundRecord] = []

    def run_round(self, t: int) -> RoundRecord:
        cfg = self.cfg
        start = time.perf_counter()
        eta = cfg.learning_rate(t)
        selected, self.states = participants(
            self.profiles, self.states, t, cfg.seed, force_all=not cfg.uses_energy
        )

        powers = {"sig_power": float("nan"), "int_power": float("nan"), "noise_power": float("nan")}
        total = 0.0
        skipped = not selected
        if selected:
            sizes = self.task.sizes
            denom = float(sizes[selected].sum())
            scaled = []
            for m in selected:
                delta = local_update(self.task, m, self.theta, cfg.tau, eta, cfg, t, cfg.seed)
                cooldown = self.states[m].cooldown if cfg.weighted else 1
                scaled.append(scale_differences(delta, sizes[m] / denom, cooldown))
            total = sum(s.weight for s in scaled)
            try:
                if cfg.over_the_air:
                    gains = self.topology.gains
                    channel = draw_channel(
                        gains, selected, cfg.num_antennas, self.task.dim // 2,
                        cfg.sigma_h2, cfg.sigma_z2, cfg.seed, t,
                    )
                    beta_bar = resolve_beta_bar(cfg.beta_bar, gains, selected)
                    update, combined = aggregate_ota(scaled, channel, cfg.sigma_h2, beta_bar)
                    powers = combined.powers()
                else:
                    update = aggregate_error_free(scaled)
                self.theta = self.theta + update
            except RoundSkipped:
                skipped = True
        if skipped:
            log.debug("round %d skipped (no participants)", t)

        acc = self.task.accuracy(self.theta)
        rec = RoundRecord(
            t=t,
            participants=len(selected),
            C_t=float(total),
            loss=mc.global_loss(self.task, self.theta),
            accuracy=float("nan") if acc is None else acc,
            skipped=skipped,
            wall_time=time.perf_counter() - start,
            **powers,
        )
        self.records.append(rec)
        return rec

    def run(self, rounds: Optional[int] = None) -> list:
        n = self.cfg.rounds if rounds is None else rounds
        t0 = len(self.records)
        for t in range(t0, t0 + n):
            self.run_round(t)
        return self.records


def run_experiment(cfg: ScenarioConfig, task: Optional[mc.LossTask] = None) -> list:
    """Run ``cfg.rounds`` rounds and return the list of :class:`RoundRecord`."""
    return Simulation(cfg, task=task).run()


def with_scenario(cfg: ScenarioConfig, scenario: str) -> ScenarioConfig:
    return replace(cfg, scenario=scenario)


def config_dict(cfg: ScenarioConfig) -> dict:
    d = asdict(cfg)
    d["energy_groups"] = list(cfg.energy_groups)
    return d
