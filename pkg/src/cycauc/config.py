"""Experiment configuration: defaults, file loading, dotted-path overrides
and cross-field validation with field-level error messages.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Any

ALGORITHMS = ("cycp-minimax", "cycp-pairwise", "cycp-fedavg", "rs-minimax", "rs-pairwise")
MINIMAX_ALGOS = ("cycp-minimax", "rs-minimax")
PAIRWISE_ALGOS = ("cycp-pairwise", "rs-pairwise")

LOSS_HYPER_KEYS = ("lam", "m", "tau", "s", "q")


class ConfigError(ValueError):
    """Configuration problem, annotated with the offending field path."""


DEFAULT_CONFIG: dict[str, Any] = {
    "algorithm": "cycp-minimax",
    "seed": 0,
    "eval_cadence": 1,
    "local_steps": 8,
    "handoff": "average",
    "parallel": False,
    "data": {
        "source": "synthetic",
        "n_train": 2000,
        "n_val": 0,
        "n_test": 1000,
        "dim": 10,
        "pos_fraction": 0.01,
        "margin": 6.0,
        "train_csv": None,
        "val_csv": None,
        "test_csv": None,
        "skip_header": False,
        "dir": 100.0,
        "flip_ratio": 0.0,
    },
    "layout": {
        "n_clients": 20,
        "n_groups": 4,
        "clients_per_round": 2,
    },
    "schedule": {
        "kind": "practical",
        "eta0": 0.1,
        "n_stages": 1,
        "decay": 0.5,
        "e0": 100,
        "growth": 1.0,
        "gamma": 0.0,
        "batch_size": 1,
        # theory-mode constants
        "ell": 1.0,
        "mu": 1.0,
        "smooth_l": 1.0,
        "local_steps_scale": 1.0,
    },
    "loss": {
        "name": "sigmoid",
        "lam": 1.0,
        "m": 1.0,
        "tau": 1.0,
        "s": 1.0,
        "q": 2.0,
    },
    "model": {
        "kind": "linear",
        "hidden_dim": 16,
    },
    "out_dir": None,
}


def _deep_merge(base: dict, extra: dict, path: str = "") -> dict:
    merged = copy.deepcopy(base)
    for key, value in extra.items():
        here = f"{path}.{key}" if path else key
        if key not in merged:
            raise ConfigError(f"{here}: unknown configuration field")
        if isinstance(merged[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here}: expected a section, got {type(value).__name__}")
            merged[key] = _deep_merge(merged[key], value, here)
        else:
            merged[key] = value
    return merged


def _coerce(text: str) -> Any:
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("null", "none"):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def apply_override(raw: dict, dotted: str, value: str) -> None:
    """Set ``raw[a][b]... = value`` for a dotted path ``a.b...``, coercing types."""
    parts = dotted.split(".")
    node = raw
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"{dotted}: no such configuration section {part!r}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"{dotted}: unknown configuration field")
    node[parts[-1]] = _coerce(value)


def load_raw_config(path: str | None = None, overrides: list[str] | None = None) -> dict:
    """Defaults, then optional JSON file, then ``key.path=value`` overrides."""
    raw = copy.deepcopy(DEFAULT_CONFIG)
    explicit: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                explicit = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(explicit, dict):
            raise ConfigError(f"{path}: top-level config must be an object")
        raw = _deep_merge(raw, explicit)
    raw["_explicit"] = explicit
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key.path=value")
        dotted, value = item.split("=", 1)
        apply_override(raw, dotted, value)
        _note_explicit(raw["_explicit"], dotted.split("."), _coerce(value))
    return raw


def _note_explicit(explicit: dict, parts: list[str], value: Any) -> None:
    node = explicit
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


@dataclass(frozen=True)
class RunConfig:
    """Validated, resolved experiment configuration."""

    algorithm: str
    seed: int
    eval_cadence: int
    local_steps: int
    handoff: str
    parallel: bool
    data: dict[str, Any]
    layout: dict[str, Any]
    schedule: dict[str, Any]
    loss: dict[str, Any]
    model: dict[str, Any]
    out_dir: str | None
    explicit: dict[str, Any] = field(default_factory=dict, compare=False)

    def to_manifest_dict(self) -> dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "eval_cadence": self.eval_cadence,
            "local_steps": self.local_steps,
            "handoff": self.handoff,
            "parallel": self.parallel,
            "data": dict(self.data),
            "layout": dict(self.layout),
            "schedule": dict(self.schedule),
            "loss": dict(self.loss),
            "model": dict(self.model),
        }


def validate_config(raw: dict) -> RunConfig:
    """Validate the merged raw dict and freeze it into a RunConfig."""
    explicit = raw.get("_explicit", {})
    raw = {k: v for k, v in raw.items() if k != "_explicit"}

    algo = raw["algorithm"]
    if algo not in ALGORITHMS:
        raise ConfigError(f"algorithm: unknown algorithm {algo!r}; choose from {ALGORITHMS}")
    if not isinstance(raw["seed"], int) or raw["seed"] < 0:
        raise ConfigError(f"seed: must be a non-negative integer, got {raw['seed']!r}")
    if raw["eval_cadence"] < 1:
        raise ConfigError(f"eval_cadence: must be >= 1, got {raw['eval_cadence']}")
    if raw["local_steps"] < 1:
        raise ConfigError(f"local_steps: must be >= 1, got {raw['local_steps']}")
    if raw["handoff"] not in ("average", "last"):
        raise ConfigError(f"handoff: must be 'average' or 'last', got {raw['handoff']!r}")

    data = raw["data"]
    if data["source"] not in ("synthetic", "csv"):
        raise ConfigError(f"data.source: must be 'synthetic' or 'csv', got {data['source']!r}")
    if data["source"] == "synthetic":
        if data["n_train"] < 2:
            raise ConfigError(f"data.n_train: need at least 2 examples, got {data['n_train']}")
        if not 0.0 < data["pos_fraction"] < 1.0:
            raise ConfigError(f"data.pos_fraction: must be in (0, 1), got {data['pos_fraction']}")
        if data["margin"] < 0:
            raise ConfigError(f"data.margin: must be >= 0, got {data['margin']}")
    else:
        if not data.get("train_csv"):
            raise ConfigError("data.train_csv: required when data.source is 'csv'")
        if not data.get("test_csv"):
            raise ConfigError("data.test_csv: required when data.source is 'csv'")
    if not data["dir"] > 0:
        raise ConfigError(f"data.dir: Dirichlet concentration must be > 0, got {data['dir']}")
    if not 0.0 <= data["flip_ratio"] <= 1.0:
        raise ConfigError(f"data.flip_ratio: must be in [0, 1], got {data['flip_ratio']}")

    layout = raw["layout"]
    for key in ("n_clients", "n_groups", "clients_per_round"):
        if layout[key] < 1:
            raise ConfigError(f"layout.{key}: must be >= 1, got {layout[key]}")
    if layout["n_groups"] > layout["n_clients"]:
        raise ConfigError("layout.n_groups: cannot exceed layout.n_clients")
    smallest_group = layout["n_clients"] // layout["n_groups"]
    if layout["clients_per_round"] > smallest_group:
        raise ConfigError(
            f"layout.clients_per_round: {layout['clients_per_round']} exceeds the "
            f"smallest group size {smallest_group}"
        )

    schedule = raw["schedule"]
    if schedule["kind"] not in ("practical", "theory", "theory-pl"):
        raise ConfigError(
            f"schedule.kind: must be practical, theory or theory-pl, got {schedule['kind']!r}"
        )
    if schedule["eta0"] <= 0:
        raise ConfigError(f"schedule.eta0: must be > 0, got {schedule['eta0']}")
    if schedule["n_stages"] < 1:
        raise ConfigError(f"schedule.n_stages: must be >= 1, got {schedule['n_stages']}")
    if schedule["kind"] == "theory" and algo not in MINIMAX_ALGOS:
        raise ConfigError("schedule.kind: 'theory' applies to the minimax algorithms only")
    if schedule["kind"] == "theory-pl" and algo not in PAIRWISE_ALGOS:
        raise ConfigError("schedule.kind: 'theory-pl' applies to the pairwise algorithms only")

    explicit_schedule = explicit.get("schedule", {}) if isinstance(explicit, dict) else {}
    if "gamma" in explicit_schedule and algo not in MINIMAX_ALGOS:
        raise ConfigError("schedule.gamma: the prox weight applies to minimax algorithms only")
    explicit_loss = explicit.get("loss", {}) if isinstance(explicit, dict) else {}
    if explicit_loss and algo not in PAIRWISE_ALGOS:
        raise ConfigError("loss: pairwise losses apply to the pairwise algorithms only")

    loss = raw["loss"]
    if loss["name"] not in ("square", "squared-hinge", "logistic", "sigmoid",
                            "barrier-hinge", "q-norm-hinge"):
        raise ConfigError(f"loss.name: unknown loss {loss['name']!r}")

    model = raw["model"]
    if model["kind"] not in ("linear", "mlp"):
        raise ConfigError(f"model.kind: must be 'linear' or 'mlp', got {model['kind']!r}")
    if model["kind"] == "mlp" and model["hidden_dim"] < 1:
        raise ConfigError(f"model.hidden_dim: must be >= 1, got {model['hidden_dim']}")

    return RunConfig(
        algorithm=algo,
        seed=raw["seed"],
        eval_cadence=raw["eval_cadence"],
        local_steps=raw["local_steps"],
        handoff=raw["handoff"],
        parallel=bool(raw["parallel"]),
        data=data,
        layout=layout,
        schedule=schedule,
        loss=loss,
        model=model,
        out_dir=raw.get("out_dir"),
        explicit=explicit,
    )


def load_config(
    path: str | None = None,
    overrides: list[str] | None = None,
    algorithm: str | None = None,
    seed: int | None = None,
    out_dir: str | None = None,
) -> RunConfig:
    raw = load_raw_config(path, overrides)
    if algorithm is not None:
        raw["algorithm"] = algorithm
    if seed is not None:
        raw["seed"] = seed
    if out_dir is not None:
        raw["out_dir"] = out_dir
    return validate_config(raw)
