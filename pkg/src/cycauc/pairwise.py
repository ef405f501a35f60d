"""Stagewise federated trainer for general pairwise surrogates.

The pairwise gradient couples every client's positives with every other
client's negatives, so each local step splits it into an active part
(computed on fresh local data) and a passive part (a prediction score
produced by some client during the previous epoch).  The server keeps a
two-sided score pool: ``current`` holds last epoch's scores and feeds this
epoch's passive draws, ``next`` accumulates the scores produced now.  Each
round the server draws one without-replacement reference set per class per
client; the client shuffles them into consumption buffers and pops one
passive score per local step and per gradient term.  Every consumed score
is therefore exactly one epoch stale, and after any full epoch the per-class
pool holds local_steps x clients_per_round x n_groups records.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import ClientDataset
from .losses import PairwiseLoss
from .metrics import RoundRecorder
from .models import ScoringModel
from .parallel import ClientMapper, serial_map
from .rng import RngStream
from .scheduler import ParticipationPlan, RoundTicket, plan_epoch
from .stages import StageConfig


class BufferUnderflow(RuntimeError):
    """A consumption buffer ran out of passive scores."""


@dataclass(frozen=True)
class ScoreRecord:
    """One shared prediction score, tagged at production time."""

    value: float
    epoch: int
    client_id: int
    positive: bool
    uid: int = -1


class GlobalScorePool:
    """Server-side score store with one-epoch hand-off.

    ``current`` feeds passive draws during the running epoch; ``next``
    collects the scores produced now and becomes ``current`` when the epoch
    finishes.  Records receive a unique id when they enter the pool.
    """

    def __init__(self) -> None:
        self.current_pos: list[ScoreRecord] = []
        self.current_neg: list[ScoreRecord] = []
        self.next_pos: list[ScoreRecord] = []
        self.next_neg: list[ScoreRecord] = []
        self.current_epoch = -1
        self._uid = 0

    def _stamp(self, records: list[ScoreRecord]) -> list[ScoreRecord]:
        stamped = []
        for rec in records:
            stamped.append(replace(rec, uid=self._uid))
            self._uid += 1
        return stamped

    def seed_current(self, records: list[ScoreRecord], epoch: int) -> None:
        """Install the bootstrap scores as the first consumable pool."""
        self.current_pos = self._stamp([r for r in records if r.positive])
        self.current_neg = self._stamp([r for r in records if not r.positive])
        self.current_epoch = epoch

    def extend_next(self, records: list[ScoreRecord]) -> None:
        self.next_pos.extend(self._stamp([r for r in records if r.positive]))
        self.next_neg.extend(self._stamp([r for r in records if not r.positive]))

    def start_epoch(self) -> None:
        self.next_pos = []
        self.next_neg = []

    def finish_epoch(self, epoch: int) -> None:
        self.current_pos = self.next_pos
        self.current_neg = self.next_neg
        self.next_pos = []
        self.next_neg = []
        self.current_epoch = epoch


@dataclass
class PoolAudit:
    """Optional instrumentation: consumption tags, pool sizes, group visits."""

    collect_grads: bool = False
    consumptions: list[tuple[int, int, int, int]] = field(default_factory=list)
    pool_sizes: list[tuple[int, int, int, int]] = field(default_factory=list)
    visits: list[tuple[int, int]] = field(default_factory=list)
    step_grads: list[np.ndarray] = field(default_factory=list)


class ScoreBuffer:
    """A shuffled copy of one reference set, consumed strictly in order."""

    def __init__(self, records: list[ScoreRecord], gen: np.random.Generator) -> None:
        order = gen.permutation(len(records))
        self._queue = [records[i] for i in order]
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._queue) - self._cursor

    def pop(self) -> ScoreRecord:
        if self._cursor >= len(self._queue):
            raise BufferUnderflow("passive score buffer exhausted")
        rec = self._queue[self._cursor]
        self._cursor += 1
        return rec


def draw_passive_sets(
    pool: GlobalScorePool, n: int, rng: RngStream, strict: bool = True
) -> tuple[list[ScoreRecord], list[ScoreRecord]]:
    """Sample n records per class from the current pool, without replacement.

    Sampling does not consume: records stay in the pool and may serve several
    clients.  With ``strict`` (the default) a pool smaller than n is an
    error; otherwise the draw is clamped to the available records.
    """
    gen = rng.generator()
    out = []
    for side in (pool.current_pos, pool.current_neg):
        take = n
        if len(side) < n:
            if strict:
                raise ValueError(f"pool holds {len(side)} records, need {n}")
            take = len(side)
        idx = gen.choice(len(side), size=take, replace=False) if take else []
        out.append([side[i] for i in idx])
    return out[0], out[1]


@dataclass
class LocalPairwiseResult:
    model: ScoringModel
    produced_pos: list[ScoreRecord]
    produced_neg: list[ScoreRecord]
    consumed: list[ScoreRecord]
    step_grads: list[np.ndarray]


def local_update_pairwise(
    model: ScoringModel,
    client: ClientDataset,
    passive_pos: list[ScoreRecord],
    passive_neg: list[ScoreRecord],
    cfg: StageConfig,
    loss: PairwiseLoss,
    epoch: int,
    rng: RngStream,
    collect_grads: bool = False,
) -> LocalPairwiseResult:
    """One client's I local steps of the active-passive estimator.

    Per step, with psi' the partial derivatives of the surrogate:
    the positive term pairs a fresh local positive score with a popped
    passive negative score, the negative term pairs a popped passive
    positive score with a fresh local negative score, and the model steps
    against their sum.  Fresh scores are recorded unconditionally (they are
    next epoch's passive supply); a term is skipped when the client lacks
    that class locally or its buffer has run dry.
    """
    gen = rng.generator()
    buf_pos = ScoreBuffer(passive_pos, gen)
    buf_neg = ScoreBuffer(passive_neg, gen)
    produced_pos: list[ScoreRecord] = []
    produced_neg: list[ScoreRecord] = []
    consumed: list[ScoreRecord] = []
    step_grads: list[np.ndarray] = []

    for _ in range(cfg.local_steps):
        z_pos = client.pos[gen.integers(len(client.pos))] if client.pos else None
        z_neg = client.neg[gen.integers(len(client.neg))] if client.neg else None
        grad = np.zeros_like(model.params)
        if z_pos is not None:
            h_pos, g_pos = model.score_grad(z_pos.features)
            produced_pos.append(ScoreRecord(h_pos, epoch, client.client_id, True))
            if len(buf_neg):
                ref = buf_neg.pop()
                consumed.append(ref)
                grad += float(loss.dphi(np.float64(h_pos - ref.value))) * g_pos
        if z_neg is not None:
            h_neg, g_neg = model.score_grad(z_neg.features)
            produced_neg.append(ScoreRecord(h_neg, epoch, client.client_id, False))
            if len(buf_pos):
                ref = buf_pos.pop()
                consumed.append(ref)
                grad += -float(loss.dphi(np.float64(ref.value - h_neg))) * g_neg
        if collect_grads:
            step_grads.append(grad.copy())
        model = model.with_params(model.params - cfg.eta * grad)
    return LocalPairwiseResult(model, produced_pos, produced_neg, consumed, step_grads)


def run_round_pairwise(
    model: ScoringModel,
    ticket: RoundTicket,
    clients: list[ClientDataset],
    pool: GlobalScorePool,
    cfg: StageConfig,
    loss: PairwiseLoss,
    rng: RngStream,
    mapper: ClientMapper = serial_map,
    audit: PoolAudit | None = None,
    stage: int = 1,
) -> ScoringModel:
    """One group round: draw reference sets, run clients, average, bank scores.

    Reference sets are drawn server-side before any client runs, clamped per
    class to what the pool can supply, so execution order cannot influence
    the draw.  The model average and the score appends both reduce in
    ascending client id.
    """
    epoch = ticket.epoch
    refs: dict[int, tuple[list[ScoreRecord], list[ScoreRecord]]] = {}
    for cid in sorted(ticket.clients):
        refs[cid] = draw_passive_sets(
            pool, cfg.local_steps, rng.child("draw", cid), strict=False
        )

    def work(cid: int) -> LocalPairwiseResult:
        r_pos, r_neg = refs[cid]
        return local_update_pairwise(
            model, clients[cid], r_pos, r_neg, cfg, loss, epoch,
            rng.child("client", cid),
            collect_grads=audit is not None and audit.collect_grads,
        )

    results = mapper(work, ticket.clients)
    ordered = [results[cid] for cid in sorted(ticket.clients)]
    params = ordered[0].model.params.copy()
    for res in ordered[1:]:
        params += res.model.params
    for res in ordered:
        pool.extend_next(res.produced_pos + res.produced_neg)
        if audit is not None:
            audit.consumptions.extend(
                (stage, epoch, rec.epoch, rec.uid) for rec in res.consumed
            )
            audit.step_grads.extend(res.step_grads)
    return model.with_params(params / len(ordered))


def bootstrap_scores(
    model: ScoringModel,
    clients: list[ClientDataset],
    plan: ParticipationPlan,
    cfg: StageConfig,
    rng: RngStream,
) -> GlobalScorePool:
    """One score-only pass over the epoch schedule with the incoming model.

    No parameters move; each selected client contributes I prediction scores
    per class it owns, tagged as epoch 0, forming the pool that epoch 1
    consumes.
    """
    if not any(c.pos for c in clients) or not any(c.neg for c in clients):
        raise ValueError("federation lacks one class entirely")
    pool = GlobalScorePool()
    records: list[ScoreRecord] = []
    for ticket in plan_epoch(plan, 0, rng):
        for cid in sorted(ticket.clients):
            client = clients[cid]
            gen = rng.child("epoch", 0, "group", ticket.group, "client", cid).generator()
            for _ in range(cfg.local_steps):
                if client.pos:
                    z = client.pos[gen.integers(len(client.pos))]
                    records.append(ScoreRecord(model.score(z.features), 0, cid, True))
                if client.neg:
                    z = client.neg[gen.integers(len(client.neg))]
                    records.append(ScoreRecord(model.score(z.features), 0, cid, False))
    pool.seed_current(records, epoch=0)
    return pool


@dataclass(frozen=True)
class OsfpOutput:
    average: ScoringModel
    last: ScoringModel
    rounds: int
    local_steps: int


def run_osfp(
    init_model: ScoringModel,
    plan: ParticipationPlan,
    cfg: StageConfig,
    loss: PairwiseLoss,
    clients: list[ClientDataset],
    rng: RngStream,
    stage: int = 1,
    recorder: RoundRecorder | None = None,
    mapper: ClientMapper = serial_map,
    audit: PoolAudit | None = None,
    final_stage: bool = True,
) -> OsfpOutput:
    """One stage: bootstrap the score pool, then E epochs of K chained rounds."""
    stage_rng = rng.child("stage", stage)
    pool = bootstrap_scores(init_model, clients, plan, cfg, stage_rng)
    model = init_model
    sum_params = np.zeros_like(init_model.params)
    rounds = 0
    for epoch in range(1, cfg.epochs + 1):
        pool.start_epoch()
        tickets = plan_epoch(plan, epoch, stage_rng)
        for ticket in tickets:
            round_rng = stage_rng.child("epoch", epoch, "group", ticket.group)
            model = run_round_pairwise(
                model, ticket, clients, pool, cfg, loss, round_rng,
                mapper=mapper, audit=audit, stage=stage,
            )
            rounds += 1
            sum_params += model.params
            if audit is not None:
                audit.visits.append((stage, ticket.group))
            if recorder is not None:
                is_last = final_stage and epoch == cfg.epochs and ticket is tickets[-1]
                recorder.on_round(
                    stage, epoch, ticket.group, cfg.eta, cfg.local_steps,
                    model, None, final=is_last,
                    client_steps=cfg.local_steps * len(ticket.clients),
                )
        pool.finish_epoch(epoch)
        if audit is not None:
            audit.pool_sizes.append(
                (stage, epoch, len(pool.current_pos), len(pool.current_neg))
            )
    return OsfpOutput(
        average=init_model.with_params(sum_params / rounds),
        last=model,
        rounds=rounds,
        local_steps=rounds * plan.layout.clients_per_round * cfg.local_steps,
    )


def run_cycp_pairwise(
    init_model: ScoringModel,
    stage_configs: list[StageConfig],
    plan: ParticipationPlan,
    loss: PairwiseLoss,
    clients: list[ClientDataset],
    rng: RngStream,
    recorder: RoundRecorder | None = None,
    mapper: ClientMapper = serial_map,
    handoff: str = "average",
    audit: PoolAudit | None = None,
) -> ScoringModel:
    """Full stagewise run; the score pool is re-bootstrapped at each stage."""
    if not stage_configs:
        raise ValueError("need at least one stage")
    if handoff not in ("average", "last"):
        raise ValueError(f"handoff must be 'average' or 'last', got {handoff!r}")
    model = init_model
    for s, cfg in enumerate(stage_configs, start=1):
        out = run_osfp(
            model, plan, cfg, loss, clients, rng, stage=s, recorder=recorder,
            mapper=mapper, audit=audit, final_stage=(s == len(stage_configs)),
        )
        model = out.average if handoff == "average" else out.last
    return model
