"""Exact AUC evaluation and per-round experiment records."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Callable, IO

import numpy as np

from .data import Example, feature_matrix
from .models import ScoringModel


class NumericError(RuntimeError):
    """Raised when training produces non-finite parameters or metrics."""


def auc(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Mann-Whitney AUC: (wins + 0.5 ties) / (n_pos * n_neg), by sorting.

    Ties receive half credit, so auc(pos, neg) + auc(neg, pos) == 1 and the
    value matches the brute-force pairwise count exactly.
    """
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both score lists must be non-empty")
    combined = np.concatenate([pos, neg])
    order = np.argsort(combined, kind="stable")
    ranks = np.empty(combined.size, dtype=np.float64)
    sorted_scores = combined[order]
    # Midranks: equal scores share the average of their 1-based positions.
    i = 0
    while i < sorted_scores.size:
        j = i
        while j + 1 < sorted_scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    u = ranks[: pos.size].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def evaluate(model: ScoringModel, eval_pos: list[Example], eval_neg: list[Example]) -> float:
    """AUC of the model's scores over a labeled evaluation split."""
    if not eval_pos or not eval_neg:
        raise ValueError("evaluation split must contain both classes")
    return auc(model.score_batch(feature_matrix(eval_pos)),
               model.score_batch(feature_matrix(eval_neg)))


@dataclass
class RoundRecord:
    """Metrics snapshot after one communication round.

    ``wall_ms`` is kept in memory only; the persisted log line excludes it so
    reruns with the same seed produce byte-identical logs.
    """

    round_index: int
    stage: int
    epoch: int
    group: int
    eta: float
    local_steps: int
    objective: float
    auc: float
    wall_ms: float = 0.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "round": self.round_index,
                "stage": self.stage,
                "epoch": self.epoch,
                "group": self.group,
                "eta": self.eta,
                "local_steps": self.local_steps,
                "objective": self.objective,
                "auc": self.auc,
            }
        )


class RoundRecorder:
    """Collects one record per evaluated communication round.

    The engines call ``on_round`` after every group round; records are
    emitted every ``cadence`` rounds (and always on a round the caller marks
    final).  ``objective_fn(model, state)`` supplies the train objective for
    the algorithm in force; ``state`` carries engine extras such as the
    minimax auxiliaries.  If ``sink`` is given, each record is appended as
    one JSON line and flushed immediately.
    """

    def __init__(
        self,
        eval_pos: list[Example],
        eval_neg: list[Example],
        objective_fn: Callable[[ScoringModel, object], float] | None = None,
        cadence: int = 1,
        sink: IO[str] | None = None,
    ) -> None:
        if cadence < 1:
            raise ValueError(f"cadence must be >= 1, got {cadence}")
        self._eval_pos = eval_pos
        self._eval_neg = eval_neg
        self._objective_fn = objective_fn
        self.cadence = cadence
        self.sink = sink
        self.rows: list[RoundRecord] = []
        self.round_index = 0
        self.total_local_steps = 0
        self._start = time.perf_counter()

    def on_round(
        self,
        stage: int,
        epoch: int,
        group: int,
        eta: float,
        local_steps: int,
        model: ScoringModel,
        state: object = None,
        final: bool = False,
        client_steps: int | None = None,
    ) -> None:
        self.round_index += 1
        self.total_local_steps += client_steps if client_steps is not None else local_steps
        if self.round_index % self.cadence != 0 and not final:
            return
        if not np.all(np.isfinite(model.params)):
            raise NumericError(f"non-finite parameters at round {self.round_index}")
        objective = float("nan")
        if self._objective_fn is not None:
            objective = float(self._objective_fn(model, state))
            if not np.isfinite(objective):
                raise NumericError(f"non-finite objective at round {self.round_index}")
        record = RoundRecord(
            round_index=self.round_index,
            stage=stage,
            epoch=epoch,
            group=group,
            eta=eta,
            local_steps=local_steps,
            objective=objective,
            auc=evaluate(model, self._eval_pos, self._eval_neg),
            wall_ms=(time.perf_counter() - self._start) * 1e3,
        )
        self.rows.append(record)
        if self.sink is not None:
            self.sink.write(record.to_json() + "\n")
            self.sink.flush()

    def best(self) -> RoundRecord | None:
        return max(self.rows, key=lambda r: r.auc) if self.rows else None
