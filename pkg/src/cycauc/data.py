"""Data model for the federation: labeled examples, per-client class pools,
client-to-group layout, non-IID Dirichlet partitioning, label corruption,
synthetic binary tasks, and CSV ingestion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream


class DataError(ValueError):
    """Raised for malformed or degenerate input data."""


@dataclass(frozen=True, eq=False)
class Example:
    """One labeled sample: a real feature vector and a label in {+1, -1}."""

    features: np.ndarray
    label: int

    def __post_init__(self) -> None:
        if self.label not in (1, -1):
            raise DataError(f"label must be +1 or -1, got {self.label}")
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))


@dataclass
class ClientDataset:
    """A client's data split into its positive and negative pools."""

    client_id: int
    pos: list[Example] = field(default_factory=list)
    neg: list[Example] = field(default_factory=list)

    def __post_init__(self) -> None:
        if any(e.label != 1 for e in self.pos):
            raise DataError(f"client {self.client_id}: non-positive example in pos pool")
        if any(e.label != -1 for e in self.neg):
            raise DataError(f"client {self.client_id}: non-negative example in neg pool")

    @property
    def n_examples(self) -> int:
        return len(self.pos) + len(self.neg)

    def all_examples(self) -> list[Example]:
        return self.pos + self.neg


@dataclass(frozen=True)
class FederationLayout:
    """Client-to-group assignment for cyclic participation.

    ``assignment[i]`` is the group index of client ``i``.  The default is
    contiguous blocks of ``n_clients / n_groups`` clients per group.  Every
    group must hold at least ``clients_per_round`` clients so that a round's
    without-replacement sample is always feasible.
    """

    n_clients: int
    n_groups: int
    clients_per_round: int
    assignment: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.n_clients < 1 or self.n_groups < 1 or self.clients_per_round < 1:
            raise ValueError("n_clients, n_groups and clients_per_round must be >= 1")
        if not self.assignment:
            # Contiguous blocks; remainders spill into the trailing groups.
            base = self.n_clients // self.n_groups
            sizes = [base + (1 if g < self.n_clients % self.n_groups else 0)
                     for g in range(self.n_groups)]
            generated: list[int] = []
            for g, size in enumerate(sizes):
                generated.extend([g] * size)
            object.__setattr__(self, "assignment", tuple(generated))
        if len(self.assignment) != self.n_clients:
            raise ValueError("assignment length must equal n_clients")
        members = self.group_sizes()
        for g, size in enumerate(members):
            if size == 0:
                raise ValueError(f"group {g} is empty")
            if size < self.clients_per_round:
                raise ValueError(
                    f"group {g} has {size} clients < clients_per_round={self.clients_per_round}"
                )

    def group_sizes(self) -> list[int]:
        sizes = [0] * self.n_groups
        for g in self.assignment:
            if not 0 <= g < self.n_groups:
                raise ValueError(f"group index {g} out of range")
            sizes[g] += 1
        return sizes

    def group_members(self, group: int) -> list[int]:
        return [i for i, g in enumerate(self.assignment) if g == group]


@dataclass(frozen=True)
class DatasetStats:
    """Global class statistics; ``p`` is the empirical positive prior."""

    p: float

    def __post_init__(self) -> None:
        if not 0.0 < self.p < 1.0:
            raise DataError(f"positive prior must be in (0, 1), got {self.p}")


def dirichlet_partition(
    examples: list[Example], n_clients: int, dir: float, rng: RngStream
) -> list[ClientDataset]:
    """Partition examples across clients with class-conditional Dirichlet skew.

    For each class, one proportion vector is drawn from Dirichlet(dir, ..., dir)
    over the ``n_clients`` clients, per-client counts follow a multinomial with
    those proportions, and shuffled examples are dealt out by count.  Smaller
    ``dir`` yields more heterogeneous partitions; clients may end up with empty
    pools.  Every input example lands on exactly one client.

    Args:
        examples: pool to distribute; must be non-empty.
        n_clients: number of clients (>= 1).
        dir: Dirichlet concentration parameter (> 0).
        rng: stream governing proportions, counts and shuffles.

    Returns:
        One ClientDataset per client id in [0, n_clients).
    """
    if not examples:
        raise DataError("cannot partition an empty example list")
    if n_clients < 1:
        raise DataError(f"n_clients must be >= 1, got {n_clients}")
    if not dir > 0:
        raise DataError(f"Dirichlet concentration must be > 0, got {dir}")

    clients = [ClientDataset(client_id=i) for i in range(n_clients)]
    for label, pool_name in ((1, "pos"), (-1, "neg")):
        members = [e for e in examples if e.label == label]
        if not members:
            continue
        gen = rng.child("partition", pool_name).generator()
        proportions = gen.dirichlet([dir] * n_clients)
        counts = gen.multinomial(len(members), proportions)
        order = gen.permutation(len(members))
        cursor = 0
        for i, count in enumerate(counts):
            chunk = [members[j] for j in order[cursor:cursor + count]]
            getattr(clients[i], pool_name).extend(chunk)
            cursor += count
    return clients


def flip_labels(
    datasets: list[ClientDataset], ratio: float, rng: RngStream
) -> list[ClientDataset]:
    """Relabel a fixed fraction of positives as negatives, in place of a copy.

    Exactly ``round(ratio * n_pos)`` positive examples, chosen uniformly over
    the whole federation, are relabeled -1 and moved to their own client's
    negative pool.  Negatives are untouched and the total example count is
    conserved.
    """
    if not 0.0 <= ratio <= 1.0:
        raise DataError(f"flip ratio must be in [0, 1], got {ratio}")
    slots = [(ci, pi) for ci, ds in enumerate(datasets) for pi in range(len(ds.pos))]
    n_flip = int(round(ratio * len(slots)))
    if n_flip == 0:
        return [ClientDataset(ds.client_id, list(ds.pos), list(ds.neg)) for ds in datasets]

    gen = rng.child("flip").generator()
    chosen_idx = gen.choice(len(slots), size=n_flip, replace=False)
    chosen: set[tuple[int, int]] = {slots[i] for i in chosen_idx}

    flipped: list[ClientDataset] = []
    for ci, ds in enumerate(datasets):
        keep = [e for pi, e in enumerate(ds.pos) if (ci, pi) not in chosen]
        moved = [Example(e.features, -1)
                 for pi, e in enumerate(ds.pos) if (ci, pi) in chosen]
        flipped.append(ClientDataset(ds.client_id, keep, list(ds.neg) + moved))
    return flipped


def make_synthetic(
    n: int,
    d: int,
    pos_fraction: float,
    margin: float,
    rng: RngStream,
    *,
    direction: np.ndarray | None = None,
) -> list[Example]:
    """Two unit-covariance Gaussian clouds separated by ``margin``.

    The class means sit at +/- margin/2 along a random unit direction, so the
    oracle linear scorer is the mean-difference direction and the Bayes AUC
    grows with ``margin`` (0.5 exactly at margin=0).  ``round(n * pos_fraction)``
    examples are positive.  Pass ``direction`` to put several splits of one
    task on a shared separating axis.
    """
    if n < 2:
        raise DataError(f"need n >= 2, got {n}")
    if not 0.0 < pos_fraction < 1.0:
        raise DataError(f"pos_fraction must be in (0, 1), got {pos_fraction}")
    if margin < 0:
        raise DataError(f"margin must be >= 0, got {margin}")
    n_pos = int(round(n * pos_fraction))
    if n_pos == 0 or n_pos == n:
        raise DataError(f"degenerate split: {n_pos} positives out of {n}")

    gen = rng.child("synthetic").generator()
    if direction is None:
        direction = gen.standard_normal(d)
        direction = direction / np.linalg.norm(direction)
    else:
        direction = np.asarray(direction, dtype=np.float64)
        if direction.shape != (d,):
            raise DataError(f"direction must have shape ({d},), got {direction.shape}")
    shift = (margin / 2.0) * direction
    pos_x = gen.standard_normal((n_pos, d)) + shift
    neg_x = gen.standard_normal((n - n_pos, d)) - shift
    examples = [Example(x, 1) for x in pos_x] + [Example(x, -1) for x in neg_x]
    order = gen.permutation(n)
    return [examples[i] for i in order]


def load_csv(path: str, skip_header: bool = False) -> list[Example]:
    """Read examples from a label-first CSV file.

    Each row is ``label,x1,x2,...`` with label 1 mapping to +1 and label 0 or
    -1 mapping to -1.  Malformed rows, inconsistent dimensions and unknown
    label values are reported with their line number.
    """
    examples: list[Example] = []
    dim: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if skip_header and lineno == 1:
                continue
            line = raw.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) < 2:
                raise DataError(f"{path}:{lineno}: expected label plus features")
            try:
                values = [float(f) for f in fields]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: malformed row: {exc}") from None
            raw_label = values[0]
            if raw_label == 1:
                label = 1
            elif raw_label in (0, -1):
                label = -1
            else:
                raise DataError(f"{path}:{lineno}: unknown label value {fields[0]}")
            features = np.array(values[1:], dtype=np.float64)
            if dim is None:
                dim = features.size
            elif features.size != dim:
                raise DataError(
                    f"{path}:{lineno}: row has {features.size} features, expected {dim}"
                )
            examples.append(Example(features, label))
    if not examples:
        raise DataError(f"{path}: no examples found")
    return examples


def class_prior(datasets: list[ClientDataset]) -> DatasetStats:
    """Empirical positive prior n+ / (n+ + n-) over the whole federation."""
    n_pos = sum(len(ds.pos) for ds in datasets)
    n_neg = sum(len(ds.neg) for ds in datasets)
    if n_pos == 0 or n_neg == 0:
        raise DataError(
            f"federation must contain both classes (n_pos={n_pos}, n_neg={n_neg})"
        )
    return DatasetStats(p=n_pos / (n_pos + n_neg))


def feature_matrix(examples: list[Example]) -> np.ndarray:
    """Stack example features into an (n, d) float64 matrix."""
    if not examples:
        raise DataError("cannot stack an empty example list")
    return np.stack([e.features for e in examples])
