"""Numerical evaluation of the convergence-bound recursion.

The bound on ``E||theta_PS(t) - theta*||^2`` follows

    B(t) = X(t-1) * B(t-1) + Y(t-1),    B(0) = ||theta_PS(0) - theta*||^2

and the loss bound is ``(L / 2) * B(t)``.  ``X`` is the per-round
contraction and ``Y`` collects the fading, interference, noise, local
drift, gradient variance and dataset-bias contributions.

Participant sums are evaluated either in expectation over independent
Bernoulli arrivals or on a sampled participant set.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ehfl.rng import substream

SCENARIOS = ("conventional", "eh_error_free", "eh_ota")


@dataclass
class BoundParams:
    M: int = 40
    K: int = 40
    N: int = 153749
    tau: int = 1
    alpha: object = 1.0  # scalar or per-device sequence
    p: Optional[float] = None  # equal data ratio; None -> 1/M
    betas: Optional[Sequence[float]] = None  # None -> all ones
    beta_bar: Optional[float] = None  # None -> mean of betas
    sigma_h2: float = 1.0
    sigma_z2: float = 5.0
    G2: float = 1.0
    L: float = 10.0
    mu: float = 1.0
    Gamma: float = 0.0
    eta0: float = 1e-2
    eta_decay: float = 1e-6
    B0: float = 1e3
    T: int = 400
    variant: str = "theorem1"
    scenario: str = "eh_ota"
    mode: str = "expectation"
    seed: int = 0

    def __post_init__(self):
        if self.Gamma < 0:
            raise ValueError(f"Gamma must be non-negative, got {self.Gamma}")
        if self.variant not in ("theorem1", "lemma4"):
            raise ValueError(f"unknown A variant {self.variant!r}")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown bound scenario {self.scenario!r}")
        if self.mode not in ("expectation", "sampled"):
            raise ValueError(f"unknown participant mode {self.mode!r}")
        if self.M < 1 or self.K < 1 or self.N < 1 or self.tau < 1:
            raise ValueError("M, K, N and tau must be positive")
        if self.T < 0:
            raise ValueError("T must be non-negative")
        if self.sigma_h2 <= 0:
            raise ValueError("sigma_h2 must be positive")
        a = self.alphas
        if np.any(a < 0) or np.any(a > 1):
            raise ValueError("arrival rates must lie in [0, 1]")

    @property
    def alphas(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.alpha, dtype=np.float64), (self.M,)).copy()

    @property
    def gains(self) -> np.ndarray:
        if self.betas is None:
            return np.ones(self.M)
        b = np.asarray(self.betas, dtype=np.float64)
        if b.shape != (self.M,):
            raise ValueError(f"need {self.M} betas, got {b.shape}")
        return b

    @property
    def mean_gain(self) -> float:
        return float(self.gains.mean()) if self.beta_bar is None else float(self.beta_bar)

    @property
    def ratio(self) -> float:
        return 1.0 / self.M if self.p is None else float(self.p)

    @property
    def expected_participants(self) -> float:
        """``M * alpha`` (the sum of the per-device rates)."""
        return float(self.alphas.sum())

    def eta(self, t: int) -> float:
        return self.eta0 - self.eta_decay * t


def X_factor(params: BoundParams, a: int) -> float:
    eta = params.eta(a)
    hi = min(1.0, 1.0 / (params.tau * params.mu))
    if not 0.0 <= eta <= hi:
        raise ValueError(f"learning rate {eta} at iteration {a} outside [0, {hi}]")
    return 1.0 - params.mu * eta * (params.tau - eta * (params.tau - 1))


def _A_fraction(params: BoundParams, variant: str) -> float:
    n_alpha = params.expected_participants
    if n_alpha <= 0:
        raise ValueError("A is undefined without participation (M * alpha = 0)")
    K = params.K
    if variant == "theorem1":
        return (n_alpha + 1) * (K + 1) / (n_alpha * K)
    if variant == "lemma4":
        return (2 + (n_alpha - 1) * (K - 1)) / (n_alpha * K)
    raise ValueError(f"unknown A variant {variant!r}")


def A_coeff(params: BoundParams, m1: int, m2: int, variant: Optional[str] = None) -> float:
    frac = _A_fraction(params, params.variant if variant is None else variant)
    g = params.gains
    b1, b2 = g[m1] / params.mean_gain, g[m2] / params.mean_gain
    return float(1.0 - b1 - b2 + frac * b1 * b2)


def A_matrix(params: BoundParams, variant: Optional[str] = None) -> np.ndarray:
    """All ``A(m1, m2)`` at once."""
    frac = _A_fraction(params, params.variant if variant is None else variant)
    b = params.gains / params.mean_gain
    return 1.0 - b[:, None] - b[None, :] + frac * np.outer(b, b)


def _pair_sums(params: BoundParams, matrix: np.ndarray, members=None):
    """``(sum over all pairs in S, sum over ordered pairs m != m')``."""
    if members is not None:
        sub = matrix[np.ix_(members, members)]
        return float(sub.sum()), float(sub.sum() - np.trace(sub))
    a = params.alphas
    diag = float(a @ np.diag(matrix))
    off = float(a @ matrix @ a - (a * a) @ np.diag(matrix))
    return diag + off, off


def Y_terms(params: BoundParams, a: int, members=None) -> dict:
    """The six summands of ``Y(a)``, keyed by name.

    ``members`` is a sampled participant list; ``None`` takes the
    expectation over independent arrivals with the configured rates.
    """
    eta = params.eta(a)
    tau, G2 = params.tau, params.G2
    bbar = params.mean_gain
    b = params.gains
    ota = params.scenario == "eh_ota"

    if ota:
        a_all, _ = _pair_sums(params, A_matrix(params), members)
        _, bb_off = _pair_sums(params, np.outer(b, b), members)
        if members is None:
            beta_sum = float(params.alphas @ b)
        else:
            beta_sum = float(b[list(members)].sum())
        fading = tau ** 2 * G2 * eta ** 2 * a_all
        interference = tau ** 2 * G2 * eta ** 2 / (params.K * bbar ** 2) * bb_off
        noise = (params.sigma_z2 * params.N / (params.ratio ** 2 * params.K * params.sigma_h2)
                 * beta_sum / bbar ** 2)
    else:
        fading = interference = noise = 0.0

    drift = (1 + params.mu * (1 - eta)) * eta ** 2 * G2 * tau * (tau - 1) * (2 * tau - 1) / 6
    variance = eta ** 2 * (tau ** 2 + tau - 1) * G2
    bias = 2 * eta * (tau - 1) * params.Gamma
    return {
        "fading": fading,
        "interference": interference,
        "noise": noise,
        "drift": drift,
        "variance": variance,
        "bias": bias,
    }


def Y_term(params: BoundParams, a: int, members=None) -> float:
    return float(sum(Y_terms(params, a, members).values()))


@dataclass
class BoundTrace:
    X: np.ndarray
    Y: np.ndarray
    dist: np.ndarray
    loss: np.ndarray
    scenario: str = ""
    participants: list = field(default_factory=list)

    def rows(self):
        """``(t, X, Y, bound_dist, bound_loss)``; X/Y are the factors applied to reach ``t+1``."""
        for t in range(len(self.dist)):
            x = self.X[t] if t < len(self.X) else float("nan")
            y = self.Y[t] if t < len(self.Y) else float("nan")
            yield t, x, y, self.dist[t], self.loss[t]


def _scenario_params(params: BoundParams) -> BoundParams:
    if params.scenario == "conventional":
        return replace(params, alpha=1.0)
    return params


def bound_trace(params: BoundParams) -> BoundTrace:
    params = _scenario_params(params)
    T = params.T
    X = np.empty(T)
    Y = np.empty(T)
    dist = np.empty(T + 1)
    dist[0] = params.B0
    sampled = []
    rng = substream(params.seed, "bound") if params.mode == "sampled" else None
    for a in range(T):
        members = None
        if rng is not None:
            members = list(np.flatnonzero(rng.random(params.M) < params.alphas))
            sampled.append(members)
        X[a] = X_factor(params, a)
        Y[a] = Y_term(params, a, members)
        dist[a + 1] = X[a] * dist[a] + Y[a]
    return BoundTrace(X, Y, dist, params.L / 2 * dist, params.scenario, sampled)


def product_form(X: Sequence[float], Y: Sequence[float], B0: float, t: int) -> float:
    """``prod_{a<t} X(a) B0 + sum_{b<t} Y(b) prod_{b<a<t} X(a)``."""
    X = np.asarray(X, dtype=np.float64)[:t]
    Y = np.asarray(Y, dtype=np.float64)[:t]
    total = float(np.prod(X)) * B0
    for b in range(t):
        total += Y[b] * float(np.prod(X[b + 1:]))
    return total


def corollary_closed_form(params: BoundParams, T) -> np.ndarray:
    """Closed-form loss bound for ``tau = 1``, unit gains, constant ``eta = eta0``, ``K >> M``."""
    T = np.asarray(T, dtype=np.float64)
    eta = params.eta0
    contraction = (1 - params.mu * eta) ** T
    const = 2 * eta ** 2 * params.G2 + params.sigma_z2 * params.N / (
        params.ratio ** 2 * params.K * params.sigma_h2
    )
    return (params.L / 2 * contraction * params.B0
            + params.L / (2 * params.mu * eta) * const * (1 - contraction))


def asymptotic_floor(params: BoundParams) -> float:
    """Large-``T`` limit of :func:`corollary_closed_form`."""
    eta = params.eta0
    if params.eta_decay != 0:
        raise ValueError("the asymptotic floor needs a constant learning rate")
    return params.L / (2 * params.mu * eta) * (
        2 * eta ** 2 * params.G2
        + params.sigma_z2 * params.N / (params.ratio ** 2 * params.K * params.sigma_h2)
    )


def figure3_params(**overrides) -> BoundParams:
    """Defaults of the published bound figure: M=40, 2N=307498, K=M, B(0)=1e3."""
    base = dict(M=40, K=40, N=307498 // 2, tau=1, L=10.0, mu=1.0, G2=1.0,
                eta0=1e-2, eta_decay=1e-6, sigma_z2=5.0, sigma_h2=1.0, B0=1e3, T=400)
    base.update(overrides)
    return BoundParams(**base)


def figure3_alphas(M: int = 40) -> np.ndarray:
    groups = np.array([1.0, 1 / 5, 1 / 10, 1 / 20])
    return np.repeat(groups, M // len(groups))


def scenario_traces(params: BoundParams, eh_alpha=None) -> dict:
    """Bound traces for conventional, error-free EH and OTA EH from one parameter set."""
    eh_alpha = figure3_alphas(params.M) if eh_alpha is None else eh_alpha
    out = {}
    for sc in SCENARIOS:
        alpha = 1.0 if sc == "conventional" else eh_alpha
        out[sc] = bound_trace(replace(params, scenario=sc, alpha=alpha))
    return out
