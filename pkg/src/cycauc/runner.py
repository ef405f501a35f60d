"""End-to-end experiment orchestration.

``run_experiment`` resolves a config into data, layout, schedule and engine,
streams one JSON line per evaluated communication round, and leaves three
artifacts in the output directory: ``rounds.jsonl`` (append-only, flushed per
round), ``final_model.json`` (exact-round-trip checkpoint), ``summary.json``
(final/best AUC and counters) and, written last as the completion marker,
``manifest.json`` (the resolved config + seed + code version).  ``sweep``
expands a parameter grid into one run per point with derived seeds and skips
any point whose manifest already exists.
"""

from __future__ import annotations

import itertools
import json
import os
import time
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .config import (
    MINIMAX_ALGOS,
    PAIRWISE_ALGOS,
    ConfigError,
    RunConfig,
    load_raw_config,
    validate_config,
)
from .data import (
    ClientDataset,
    DataError,
    Example,
    class_prior,
    dirichlet_partition,
    FederationLayout,
    flip_labels,
    load_csv,
    make_synthetic,
)
from .fedavg import logistic_objective, run_cycp_fedavg
from .losses import make_pairwise_loss, minimax_objective, pairwise_objective
from .metrics import NumericError, RoundRecorder, evaluate
from .minimax import run_cycp_minimax
from .models import init_mlp, linear_model, save_checkpoint
from .pairwise import run_cycp_pairwise
from .parallel import serial_map, thread_map
from .rng import RngStream
from .scheduler import CYCLIC, RANDOM_SAMPLING, ParticipationPlan
from .stages import PracticalSchedule, TheoryPLSchedule, TheorySchedule

OUT_ROOT_ENV = "CYCAUC_OUT_ROOT"


def default_out_dir(config: RunConfig) -> Path:
    root = Path(os.environ.get(OUT_ROOT_ENV, "runs"))
    return root / f"{config.algorithm}-seed{config.seed}"


def _build_splits(config: RunConfig, rng: RngStream) -> tuple[list[Example], list[Example], list[Example]]:
    data = config.data
    if data["source"] == "csv":
        train = load_csv(data["train_csv"], skip_header=data["skip_header"])
        val = load_csv(data["val_csv"], skip_header=data["skip_header"]) if data["val_csv"] else []
        test = load_csv(data["test_csv"], skip_header=data["skip_header"])
        return train, val, test
    gen = rng.child("direction").generator()
    direction = gen.standard_normal(data["dim"])
    direction /= np.linalg.norm(direction)
    splits = []
    for name, n in (("train", data["n_train"]), ("val", data["n_val"]), ("test", data["n_test"])):
        if n == 0:
            splits.append([])
            continue
        splits.append(
            make_synthetic(n, data["dim"], data["pos_fraction"], data["margin"],
                           rng.child(name), direction=direction)
        )
    return splits[0], splits[1], splits[2]


def _build_clients(config: RunConfig, train: list[Example], rng: RngStream) -> list[ClientDataset]:
    clients = dirichlet_partition(train, config.layout["n_clients"], config.data["dir"], rng)
    if config.data["flip_ratio"] > 0:
        clients = flip_labels(clients, config.data["flip_ratio"], rng)
    return clients


def _build_model(config: RunConfig, dim: int, rng: RngStream):
    if config.model["kind"] == "linear":
        return linear_model(dim)
    return init_mlp(dim, config.model["hidden_dim"], rng)


def _stage_configs(config: RunConfig, p: float | None):
    sched = config.schedule
    kind = sched["kind"]
    if kind == "practical":
        gamma = sched["gamma"] if config.algorithm in MINIMAX_ALGOS else 0.0
        return PracticalSchedule(
            eta0=sched["eta0"], n_stages=sched["n_stages"], decay=sched["decay"],
            e0=sched["e0"], growth=sched["growth"], local_steps=config.local_steps,
            gamma=gamma, batch_size=sched["batch_size"],
        ).stages()
    if kind == "theory":
        if p is None:
            raise ConfigError("schedule.kind: theory mode needs the class prior")
        return TheorySchedule(
            eta0=sched["eta0"], ell=sched["ell"], mu=sched["mu"], smooth_l=sched["smooth_l"],
            clients_per_round=config.layout["clients_per_round"],
            n_groups=config.layout["n_groups"], p=p, n_stages=sched["n_stages"],
            local_steps_scale=sched["local_steps_scale"], batch_size=sched["batch_size"],
        ).stages()
    return TheoryPLSchedule(
        eta0=sched["eta0"], mu=sched["mu"], n_groups=config.layout["n_groups"],
        n_stages=sched["n_stages"], local_steps_scale=sched["local_steps_scale"],
    ).stages()


def run_experiment(config: RunConfig, out_dir: str | Path | None = None) -> dict[str, Any]:
    """Execute one configured run and persist its artifacts.

    Returns the summary dict.  Raises ConfigError, DataError or NumericError
    for the corresponding failure classes.
    """
    out = Path(out_dir or config.out_dir or default_out_dir(config))
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()

    rng = RngStream(config.seed)
    train, val, test = _build_splits(config, rng.child("data"))
    if not train or not test:
        raise DataError("train and test splits must be non-empty")
    clients = _build_clients(config, train, rng.child("data"))
    stats = class_prior(clients)

    train_pos = [e for c in clients for e in c.pos]
    train_neg = [e for c in clients for e in c.neg]
    eval_split = val if val else test
    eval_pos = [e for e in eval_split if e.label == 1]
    eval_neg = [e for e in eval_split if e.label == -1]
    if not eval_pos or not eval_neg:
        raise DataError("evaluation split must contain both classes")

    layout = FederationLayout(
        n_clients=config.layout["n_clients"],
        n_groups=config.layout["n_groups"],
        clients_per_round=config.layout["clients_per_round"],
    )
    mode = CYCLIC if config.algorithm.startswith("cycp") else RANDOM_SAMPLING
    plan = ParticipationPlan(mode=mode, layout=layout)

    dim = train[0].features.size
    model = _build_model(config, dim, rng.child("model"))
    mapper = thread_map if config.parallel else serial_map
    algo = config.algorithm

    loss = make_pairwise_loss(
        config.loss["name"],
        lam=config.loss["lam"], m=config.loss["m"], tau=config.loss["tau"],
        s=config.loss["s"], q=config.loss["q"],
    )

    if algo in MINIMAX_ALGOS:
        objective_fn = lambda m, st: minimax_objective(
            m, clients, st.a, st.b, st.alpha, stats.p
        )
    elif algo in PAIRWISE_ALGOS:
        objective_fn = lambda m, _: pairwise_objective(m, train_pos, train_neg, loss)
    else:
        objective_fn = lambda m, _: logistic_objective(m, clients)

    stages = _stage_configs(config, stats.p)
    final_state = None
    with open(out / "rounds.jsonl", "w", encoding="utf-8") as sink:
        recorder = RoundRecorder(
            eval_pos, eval_neg, objective_fn=objective_fn,
            cadence=config.eval_cadence, sink=sink,
        )
        train_rng = rng.child("train")
        if algo in MINIMAX_ALGOS:
            final_state = run_cycp_minimax(
                model, stages, plan, stats.p, clients, train_rng,
                recorder=recorder, mapper=mapper, handoff=config.handoff,
            )
            final_model = final_state.model
        elif algo in PAIRWISE_ALGOS:
            final_model = run_cycp_pairwise(
                model, stages, plan, loss, clients, train_rng,
                recorder=recorder, mapper=mapper, handoff=config.handoff,
            )
        else:
            epochs = sum(cfg.epochs for cfg in stages)
            final_model = run_cycp_fedavg(
                model, plan, epochs, config.local_steps, stages[0].eta,
                clients, train_rng, recorder=recorder, mapper=mapper,
            )

    if not np.all(np.isfinite(final_model.params)):
        raise NumericError("final model parameters are not finite")

    save_checkpoint(final_model, str(out / "final_model.json"))

    test_pos = [e for e in test if e.label == 1]
    test_neg = [e for e in test if e.label == -1]
    best = recorder.best()
    summary: dict[str, Any] = {
        "algorithm": algo,
        "seed": config.seed,
        "final_test_auc": evaluate(final_model, test_pos, test_neg),
        "final_eval_auc": recorder.rows[-1].auc if recorder.rows else None,
        "best_eval_auc": best.auc if best else None,
        "best_round": best.round_index if best else None,
        "total_rounds": recorder.round_index,
        "total_local_steps": recorder.total_local_steps,
        "train_positive_prior": stats.p,
        "wall_seconds": time.perf_counter() - started,
    }
    if final_state is not None:
        summary["final_minimax_state"] = {
            "a": final_state.a, "b": final_state.b, "alpha": final_state.alpha,
        }
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    manifest = {
        "version": __version__,
        "seed": config.seed,
        "algorithm": algo,
        "config": config.to_manifest_dict(),
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def sweep(
    base: RunConfig,
    grid: dict[str, list[Any]],
    out_root: str | Path,
) -> list[dict[str, Any]]:
    """One run per Cartesian grid point, with derived seeds and resume support.

    Grid keys are dotted config paths.  Completed runs (manifest present) are
    skipped.  A ``sweep_index.json`` maps every grid point to its directory.
    """
    if not grid:
        raise ConfigError("sweep grid must not be empty")
    for key, values in grid.items():
        if not values:
            raise ConfigError(f"sweep grid dimension {key!r} is empty")
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)

    keys = list(grid.keys())
    index = []
    results = []
    for i, combo in enumerate(itertools.product(*(grid[k] for k in keys))):
        point = dict(zip(keys, combo))
        run_dir = out_root / f"run_{i:04d}"
        entry = {"index": i, "point": point, "dir": str(run_dir)}
        index.append(entry)
        if (run_dir / "manifest.json").exists():
            entry["status"] = "skipped"
            continue
        raw = load_raw_config(None, overrides=None)
        raw = _overlay(raw, base.to_manifest_dict())
        for dotted, value in point.items():
            _set_dotted(raw, dotted, value)
        raw["seed"] = base.seed + i
        cfg = validate_config(raw)
        results.append(run_experiment(cfg, run_dir))
        entry["status"] = "done"
    with open(out_root / "sweep_index.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2)
        fh.write("\n")
    return results


def _overlay(raw: dict, manifest: dict) -> dict:
    for key, value in manifest.items():
        if isinstance(value, dict) and isinstance(raw.get(key), dict):
            _overlay(raw[key], value)
        elif key in raw:
            raw[key] = value
    return raw


def _set_dotted(raw: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = raw
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"{dotted}: no such configuration section {part!r}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"{dotted}: unknown configuration field")
    node[parts[-1]] = value
