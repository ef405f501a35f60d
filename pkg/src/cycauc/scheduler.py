"""Client participation planning: cyclic group order and per-round sampling.

In cyclic mode each epoch visits every group exactly once, in a fixed order
that never changes across epochs; a round samples ``clients_per_round``
clients without replacement from the active group.  Random-sampling mode
keeps the identical round structure but draws each round's clients from the
whole population, which realizes the random-participation baselines with the
same training engines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .data import FederationLayout
from .rng import RngStream

CYCLIC = "cyclic"
RANDOM_SAMPLING = "random-sampling"


@dataclass(frozen=True)
class ParticipationPlan:
    mode: str
    layout: FederationLayout
    group_order: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.mode not in (CYCLIC, RANDOM_SAMPLING):
            raise ValueError(f"unknown participation mode {self.mode!r}")
        order = self.group_order or tuple(range(self.layout.n_groups))
        if sorted(order) != list(range(self.layout.n_groups)):
            raise ValueError(f"group_order must be a permutation of 0..{self.layout.n_groups - 1}")
        object.__setattr__(self, "group_order", order)


@dataclass(frozen=True)
class RoundTicket:
    """One round's participants: epoch, target group slot, sampled client ids."""

    epoch: int
    group: int
    clients: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(set(self.clients)) != len(self.clients):
            raise ValueError("ticket contains duplicate clients")


def plan_epoch(plan: ParticipationPlan, epoch: int, rng: RngStream) -> list[RoundTicket]:
    """Tickets for one epoch: one round per group slot, clients freshly sampled.

    The sample is redrawn on every visit; in cyclic mode it is drawn without
    replacement from the slot's group, in random-sampling mode from all
    clients.
    """
    layout = plan.layout
    tickets = []
    for slot, group in enumerate(plan.group_order):
        if plan.mode == CYCLIC:
            candidates = layout.group_members(group)
        else:
            candidates = list(range(layout.n_clients))
        if layout.clients_per_round > len(candidates):
            raise ValueError(
                f"cannot sample {layout.clients_per_round} clients from {len(candidates)}"
            )
        gen = rng.child("plan", epoch, slot).generator()
        picked = gen.choice(len(candidates), size=layout.clients_per_round, replace=False)
        clients = tuple(sorted(candidates[i] for i in picked))
        tickets.append(RoundTicket(epoch=epoch, group=group, clients=clients))
    return tickets


def rounds_total(epochs: int, n_groups: int) -> int:
    """Communication rounds in a stage: epochs x groups."""
    if epochs < 1 or n_groups < 1:
        raise ValueError("epochs and n_groups must be >= 1")
    return epochs * n_groups
