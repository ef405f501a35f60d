"""Stagewise step-size / epoch / local-step schedules.

Stages chain geometrically decaying step sizes with growing stage lengths.
Practical schedules expose the tuning knobs directly.  Theory schedules
derive every stage from the problem constants: with smoothness constants
ell and L, PL modulus mu and dual concavity mu2 = 2 p (1 - p), the contraction
rate is c = (mu / (L + 2 ell)) / (5 + mu / (L + 2 ell)); step sizes decay as
eta_s = eta0 exp(-(s-1) c), the per-stage iteration budget grows as
T_s = 212 / (eta0 min(ell, mu2)) * exp((s-1) c), the communication interval
shrinks as I_s ~ 1 / (K sqrt(M eta_s)), and the epoch count is whatever makes
E_s * K * I_s cover T_s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class StageConfig:
    """Knobs for a single stage: step size, epochs, local steps, prox weight."""

    eta: float
    epochs: int
    local_steps: int
    gamma: float = 0.0
    batch_size: int = 1

    def __post_init__(self) -> None:
        if self.eta < 0 or self.epochs < 1 or self.local_steps < 1:
            raise ValueError("eta must be >= 0, epochs and local_steps >= 1")
        if self.gamma < 0 or self.batch_size < 1:
            raise ValueError("gamma must be >= 0 and batch_size >= 1")


@dataclass(frozen=True)
class PracticalSchedule:
    """Geometric stage schedule: eta decays, epoch budget grows.

    Stage s (1-based) runs with eta0 * decay^(s-1) for ceil(e0 * growth^(s-1))
    epochs; local steps and the prox weight stay fixed.
    """

    eta0: float
    n_stages: int = 1
    decay: float = 0.5
    e0: int = 1
    growth: float = 1.0
    local_steps: int = 1
    gamma: float = 0.0
    batch_size: int = 1

    def __post_init__(self) -> None:
        if self.eta0 <= 0 or self.n_stages < 1 or self.e0 < 1:
            raise ValueError("eta0 must be > 0, n_stages and e0 >= 1")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError(f"decay must be in (0, 1], got {self.decay}")
        if self.growth < 1.0:
            raise ValueError(f"growth must be >= 1, got {self.growth}")

    def stage(self, s: int) -> StageConfig:
        return StageConfig(
            eta=self.eta0 * self.decay ** (s - 1),
            epochs=math.ceil(self.e0 * self.growth ** (s - 1)),
            local_steps=self.local_steps,
            gamma=self.gamma,
            batch_size=self.batch_size,
        )

    def stages(self) -> list[StageConfig]:
        return [self.stage(s) for s in range(1, self.n_stages + 1)]


@dataclass(frozen=True)
class TheorySchedule:
    """Minimax stage schedule derived from the problem constants.

    gamma is pinned at 2 ell so each stage's subproblem is strongly convex.
    ``local_steps_scale`` is the hidden constant of I_s ~ 1/(K sqrt(M eta_s)).
    """

    eta0: float
    ell: float
    mu: float
    smooth_l: float
    clients_per_round: int
    n_groups: int
    p: float
    n_stages: int = 1
    local_steps_scale: float = 1.0
    batch_size: int = 1

    def __post_init__(self) -> None:
        if min(self.eta0, self.ell, self.mu, self.smooth_l) <= 0:
            raise ValueError("eta0, ell, mu and smooth_l must be > 0")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must be in (0, 1), got {self.p}")
        if self.clients_per_round < 1 or self.n_groups < 1 or self.n_stages < 1:
            raise ValueError("clients_per_round, n_groups and n_stages must be >= 1")

    @property
    def mu2(self) -> float:
        return 2.0 * self.p * (1.0 - self.p)

    @property
    def l_hat(self) -> float:
        return self.smooth_l + 2.0 * self.ell

    @property
    def rate(self) -> float:
        ratio = self.mu / self.l_hat
        return ratio / (5.0 + ratio)

    @property
    def gamma(self) -> float:
        return 2.0 * self.ell

    def eta(self, s: int) -> float:
        return self.eta0 * math.exp(-(s - 1) * self.rate)

    def iteration_budget(self, s: int) -> float:
        return 212.0 / (self.eta0 * min(self.ell, self.mu2)) * math.exp((s - 1) * self.rate)

    def local_steps(self, s: int) -> int:
        eta = self.eta(s)
        return max(1, round(self.local_steps_scale
                            / (self.n_groups * math.sqrt(self.clients_per_round * eta))))

    def stage(self, s: int) -> StageConfig:
        steps = self.local_steps(s)
        epochs = math.ceil(self.iteration_budget(s) / (self.n_groups * steps))
        return StageConfig(
            eta=self.eta(s),
            epochs=epochs,
            local_steps=steps,
            gamma=self.gamma,
            batch_size=self.batch_size,
        )

    def stages(self) -> list[StageConfig]:
        return [self.stage(s) for s in range(1, self.n_stages + 1)]


@dataclass(frozen=True)
class TheoryPLSchedule:
    """Pairwise stage schedule under the PL condition.

    Only the communication interval I_s ~ 1/sqrt(K eta_s) is pinned by the
    analysis; the stage decay reuses the minimax structure with normalized
    smoothness, c = mu / (5 + mu) and T_s = 212 / (eta0 mu) * exp((s-1) c).
    """

    eta0: float
    mu: float
    n_groups: int
    n_stages: int = 1
    local_steps_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.eta0 <= 0 or self.mu <= 0:
            raise ValueError("eta0 and mu must be > 0")
        if self.n_groups < 1 or self.n_stages < 1:
            raise ValueError("n_groups and n_stages must be >= 1")

    @property
    def rate(self) -> float:
        return self.mu / (5.0 + self.mu)

    def eta(self, s: int) -> float:
        return self.eta0 * math.exp(-(s - 1) * self.rate)

    def local_steps(self, s: int) -> int:
        return max(1, round(self.local_steps_scale / math.sqrt(self.n_groups * self.eta(s))))

    def stage(self, s: int) -> StageConfig:
        steps = self.local_steps(s)
        budget = 212.0 / (self.eta0 * self.mu) * math.exp((s - 1) * self.rate)
        return StageConfig(
            eta=self.eta(s),
            epochs=math.ceil(budget / (self.n_groups * steps)),
            local_steps=steps,
            gamma=0.0,
        )

    def stages(self) -> list[StageConfig]:
        return [self.stage(s) for s in range(1, self.n_stages + 1)]
