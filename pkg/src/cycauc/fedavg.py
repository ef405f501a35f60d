"""Cyclic-participation FedAvg baseline: local SGD on the logistic loss.

Same scheduling, snapshot and averaging contracts as the minimax trainer,
but with a plain decomposable classification objective, no auxiliaries, no
prox term and no stages.
"""

from __future__ import annotations

import numpy as np

from .data import ClientDataset, Example, feature_matrix
from .metrics import RoundRecorder
from .models import ScoringModel
from .parallel import ClientMapper, serial_map
from .rng import RngStream
from .scheduler import ParticipationPlan, RoundTicket, plan_epoch


def logistic_loss_grad(model: ScoringModel, z: Example) -> np.ndarray:
    """Gradient of log(1 + exp(-y h)) wrt the parameters: -y sigma(-y h) grad h."""
    h, grad_h = model.score_grad(z.features)
    yh = z.label * h
    return -z.label * np.exp(-np.logaddexp(0.0, yh)) * grad_h


def logistic_objective(model: ScoringModel, datasets: list[ClientDataset]) -> float:
    """Mean logistic loss over every example in the federation."""
    examples = [e for ds in datasets for e in ds.all_examples()]
    if not examples:
        raise ValueError("empty federation")
    h = model.score_batch(feature_matrix(examples))
    y = np.array([e.label for e in examples], dtype=np.float64)
    return float(np.logaddexp(0.0, -y * h).mean())


def fedavg_local_update(
    model: ScoringModel,
    client: ClientDataset,
    local_steps: int,
    eta: float,
    rng: RngStream,
) -> ScoringModel:
    """I steps of single-sample SGD over the client's combined pool."""
    pool = client.all_examples()
    if not pool:
        raise ValueError(f"client {client.client_id} has no data")
    gen = rng.generator()
    for _ in range(local_steps):
        z = pool[gen.integers(len(pool))]
        model = model.with_params(model.params - eta * logistic_loss_grad(model, z))
    return model


def run_cycp_fedavg(
    init_model: ScoringModel,
    plan: ParticipationPlan,
    epochs: int,
    local_steps: int,
    eta: float,
    clients: list[ClientDataset],
    rng: RngStream,
    recorder: RoundRecorder | None = None,
    mapper: ClientMapper = serial_map,
) -> ScoringModel:
    """E epochs of chained group rounds with plain model averaging."""
    model = init_model
    for epoch in range(1, epochs + 1):
        tickets = plan_epoch(plan, epoch, rng.child("stage", 1))
        for ticket in tickets:
            model = _fedavg_round(
                model, ticket, clients, local_steps, eta,
                rng.child("stage", 1, "epoch", epoch, "group", ticket.group), mapper,
            )
            if recorder is not None:
                is_last = epoch == epochs and ticket is tickets[-1]
                recorder.on_round(
                    1, epoch, ticket.group, eta, local_steps, model, None,
                    final=is_last, client_steps=local_steps * len(ticket.clients),
                )
    return model


def _fedavg_round(
    model: ScoringModel,
    ticket: RoundTicket,
    clients: list[ClientDataset],
    local_steps: int,
    eta: float,
    rng: RngStream,
    mapper: ClientMapper,
) -> ScoringModel:
    def work(cid: int) -> ScoringModel:
        if clients[cid].n_examples == 0:
            return model
        return fedavg_local_update(model, clients[cid], local_steps, eta, rng.child("client", cid))

    results = mapper(work, ticket.clients)
    ordered = [results[cid] for cid in sorted(ticket.clients)]
    params = ordered[0].params.copy()
    for res in ordered[1:]:
        params += res.params
    return model.with_params(params / len(ordered))
