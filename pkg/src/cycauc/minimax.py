"""Stagewise federated minimax trainer for the squared-surrogate objective.

One stage runs E epochs of the cyclic schedule; each round broadcasts the
current (v, alpha) to the sampled clients of the active group, every client
performs I local primal-descent / dual-ascent steps on its own data, and the
round's output is the plain average of the client results.  Rounds chain
(round k starts from round k-1's average) and epochs hand off seamlessly.
The stage returns both the across-rounds average and the last iterate.  The
outer loop re-anchors a proximal pull at each stage's initialization and
walks the step-size schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ClientDataset
from .losses import MinimaxGrad, MinimaxState, ProxTerm, add_prox_grad, minimax_stoch_grad
from .metrics import RoundRecorder
from .models import ScoringModel
from .parallel import ClientMapper, serial_map
from .rng import RngStream
from .scheduler import ParticipationPlan, RoundTicket, plan_epoch
from .stages import StageConfig


@dataclass(frozen=True)
class StageOutput:
    """Average over all (epoch, group) round outputs, plus the last iterate."""

    average: MinimaxState
    last: MinimaxState
    rounds: int
    local_steps: int


def local_update_minimax(
    state: MinimaxState,
    client: ClientDataset,
    cfg: StageConfig,
    prox: ProxTerm,
    p: float,
    rng: RngStream,
) -> MinimaxState:
    """One client's I local steps from the received snapshot.

    Each step samples uniformly from the client's combined pool (so the
    class indicators fire at the client's own rates), adds the proximal
    pull to the primal gradient, then descends v and ascends alpha.
    """
    pool = client.all_examples()
    if not pool:
        raise ValueError(f"client {client.client_id} has no data")
    gen = rng.generator()
    model, a, b, alpha = state.model, state.a, state.b, state.alpha
    for _ in range(cfg.local_steps):
        idx = gen.integers(len(pool), size=cfg.batch_size)
        g_w = np.zeros_like(model.params)
        g_a = g_b = g_alpha = 0.0
        for i in idx:
            g = minimax_stoch_grad(model, a, b, alpha, pool[i], p)
            g_w += g.g_w
            g_a += g.g_a
            g_b += g.g_b
            g_alpha += g.g_alpha
        g = MinimaxGrad(g_w / cfg.batch_size, g_a / cfg.batch_size,
                        g_b / cfg.batch_size, g_alpha / cfg.batch_size)
        g = add_prox_grad(g, model, a, b, prox)
        model = model.with_params(model.params - cfg.eta * g.g_w)
        a -= cfg.eta * g.g_a
        b -= cfg.eta * g.g_b
        alpha += cfg.eta * g.g_alpha
    return MinimaxState(model, a, b, alpha)


def run_group_round(
    state: MinimaxState,
    ticket: RoundTicket,
    clients: list[ClientDataset],
    cfg: StageConfig,
    prox: ProxTerm,
    p: float,
    rng: RngStream,
    mapper: ClientMapper = serial_map,
) -> MinimaxState:
    """Broadcast, local updates in parallel, then average in ascending id order.

    A selected client with no data takes no local steps and contributes its
    received snapshot to the average, so severe non-IID partitions with empty
    clients still run.
    """

    def work(cid: int) -> MinimaxState:
        if clients[cid].n_examples == 0:
            return state
        return local_update_minimax(state, clients[cid], cfg, prox, p, rng.child("client", cid))

    results = mapper(work, ticket.clients)
    ordered = [results[cid] for cid in sorted(ticket.clients)]
    params = ordered[0].model.params.copy()
    a = ordered[0].a
    b = ordered[0].b
    alpha = ordered[0].alpha
    for res in ordered[1:]:
        params += res.model.params
        a += res.a
        b += res.b
        alpha += res.alpha
    m = len(ordered)
    return MinimaxState(state.model.with_params(params / m), a / m, b / m, alpha / m)


def run_stage_osfm(
    init: MinimaxState,
    plan: ParticipationPlan,
    cfg: StageConfig,
    p: float,
    rng: RngStream,
    stage: int = 1,
    recorder: RoundRecorder | None = None,
    mapper: ClientMapper = serial_map,
    clients: list[ClientDataset] | None = None,
    final_stage: bool = True,
) -> StageOutput:
    """One stage: E epochs x K chained group rounds with a fixed prox anchor."""
    if clients is None:
        raise ValueError("clients are required")
    prox = ProxTerm(cfg.gamma, init.model.params.copy(), init.a, init.b)
    state = init
    sum_params = np.zeros_like(init.model.params)
    sum_a = sum_b = sum_alpha = 0.0
    rounds = 0
    for epoch in range(1, cfg.epochs + 1):
        tickets = plan_epoch(plan, epoch, rng.child("stage", stage))
        for ticket in tickets:
            round_rng = rng.child("stage", stage, "epoch", epoch, "group", ticket.group)
            state = run_group_round(state, ticket, clients, cfg, prox, p, round_rng, mapper)
            rounds += 1
            sum_params += state.model.params
            sum_a += state.a
            sum_b += state.b
            sum_alpha += state.alpha
            if recorder is not None:
                is_last = final_stage and epoch == cfg.epochs and ticket is tickets[-1]
                recorder.on_round(
                    stage, epoch, ticket.group, cfg.eta, cfg.local_steps,
                    state.model, state, final=is_last,
                    client_steps=cfg.local_steps * len(ticket.clients),
                )
    average = MinimaxState(
        init.model.with_params(sum_params / rounds),
        sum_a / rounds, sum_b / rounds, sum_alpha / rounds,
    )
    return StageOutput(
        average=average,
        last=state,
        rounds=rounds,
        local_steps=rounds * plan.layout.clients_per_round * cfg.local_steps,
    )


def run_cycp_minimax(
    init_model: ScoringModel,
    stage_configs: list[StageConfig],
    plan: ParticipationPlan,
    p: float,
    clients: list[ClientDataset],
    rng: RngStream,
    recorder: RoundRecorder | None = None,
    mapper: ClientMapper = serial_map,
    handoff: str = "average",
) -> MinimaxState:
    """Full stagewise run; each stage restarts the prox anchor at its input.

    ``handoff`` picks which stage output seeds the next stage: the
    across-rounds "average" or the "last" iterate.
    """
    if not stage_configs:
        raise ValueError("need at least one stage")
    if handoff not in ("average", "last"):
        raise ValueError(f"handoff must be 'average' or 'last', got {handoff!r}")
    state = MinimaxState(init_model)
    for s, cfg in enumerate(stage_configs, start=1):
        out = run_stage_osfm(
            state, plan, cfg, p, rng, stage=s, recorder=recorder, mapper=mapper,
            clients=clients, final_stage=(s == len(stage_configs)),
        )
        state = out.average if handoff == "average" else out.last
    return state
