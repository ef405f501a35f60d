"""Scalar scoring models with hand-written parameter gradients.

Two variants are provided: a linear scorer ``w . x + c`` and a one-hidden-
layer tanh network ``out . tanh(W1 x + b1) + c``.  Both expose their
parameters as a single flat float64 vector with a fixed ordering, so the
training engines can treat every model as (score, gradient, flat update).
Gradients are closed form; ``finite_diff_grad`` provides the independent
numerical check.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .rng import RngStream


class ModelError(ValueError):
    """Raised for dimension mismatches or malformed checkpoints."""


@dataclass(frozen=True)
class LinearModel:
    """Linear scorer h(x) = w . x + c, parameters flattened as [w, c]."""

    params: np.ndarray
    input_dim: int

    def __post_init__(self) -> None:
        flat = np.asarray(self.params, dtype=np.float64)
        if flat.shape != (self.input_dim + 1,):
            raise ModelError(
                f"linear model over {self.input_dim} features needs "
                f"{self.input_dim + 1} parameters, got {flat.shape}"
            )
        object.__setattr__(self, "params", flat)

    @property
    def n_params(self) -> int:
        return self.input_dim + 1

    @property
    def weights(self) -> np.ndarray:
        return self.params[: self.input_dim]

    @property
    def bias(self) -> float:
        return float(self.params[self.input_dim])

    def score(self, x: np.ndarray) -> float:
        x = _check_input(x, self.input_dim)
        return float(self.weights @ x + self.bias)

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ModelError(f"expected (n, {self.input_dim}) batch, got {X.shape}")
        return X @ self.weights + self.bias

    def score_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        x = _check_input(x, self.input_dim)
        g = np.empty(self.n_params)
        g[: self.input_dim] = x
        g[self.input_dim] = 1.0
        return float(self.weights @ x + self.bias), g

    def with_params(self, params: np.ndarray) -> LinearModel:
        return type(self)(params, self.input_dim)


@dataclass(frozen=True)
class MlpModel:
    """One-hidden-layer tanh scorer h(x) = out . tanh(W1 x + b1) + c.

    Parameter layout in the flat vector: W1 row-major (hidden x input),
    then b1, then out, then the output bias c.
    """

    params: np.ndarray
    input_dim: int
    hidden_dim: int

    def __post_init__(self) -> None:
        flat = np.asarray(self.params, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise ModelError(
                f"mlp({self.input_dim}, {self.hidden_dim}) needs {self.n_params} "
                f"parameters, got {flat.shape}"
            )
        object.__setattr__(self, "params", flat)

    @property
    def n_params(self) -> int:
        return self.hidden_dim * self.input_dim + 2 * self.hidden_dim + 1

    def _unpack(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        d, h = self.input_dim, self.hidden_dim
        w1 = self.params[: h * d].reshape(h, d)
        b1 = self.params[h * d : h * d + h]
        out = self.params[h * d + h : h * d + 2 * h]
        c = float(self.params[-1])
        return w1, b1, out, c

    def score(self, x: np.ndarray) -> float:
        x = _check_input(x, self.input_dim)
        w1, b1, out, c = self._unpack()
        return float(out @ np.tanh(w1 @ x + b1) + c)

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ModelError(f"expected (n, {self.input_dim}) batch, got {X.shape}")
        w1, b1, out, c = self._unpack()
        return np.tanh(X @ w1.T + b1) @ out + c

    def score_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        x = _check_input(x, self.input_dim)
        w1, b1, out, c = self._unpack()
        z = np.tanh(w1 @ x + b1)
        h_val = float(out @ z + c)
        # dh/dpre = out * (1 - z^2), then chain into W1 and b1.
        dpre = out * (1.0 - z * z)
        d, h = self.input_dim, self.hidden_dim
        g = np.empty(self.n_params)
        g[: h * d] = np.outer(dpre, x).ravel()
        g[h * d : h * d + h] = dpre
        g[h * d + h : h * d + 2 * h] = z
        g[-1] = 1.0
        return h_val, g

    def with_params(self, params: np.ndarray) -> MlpModel:
        return type(self)(params, self.input_dim, self.hidden_dim)


ScoringModel = LinearModel | MlpModel


def _check_input(x: np.ndarray, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dim,):
        raise ModelError(f"expected feature vector of dim {dim}, got shape {x.shape}")
    return x


def linear_model(input_dim: int, weights: np.ndarray | None = None, bias: float = 0.0) -> LinearModel:
    if weights is None:
        weights = np.zeros(input_dim)
    return LinearModel(np.concatenate([np.asarray(weights, dtype=np.float64), [bias]]), input_dim)


def init_linear(input_dim: int, rng: RngStream | None = None) -> LinearModel:
    """Zero-initialized linear model, or uniform [-1/sqrt(d), 1/sqrt(d)] if seeded."""
    if rng is None:
        return linear_model(input_dim)
    bound = 1.0 / math.sqrt(input_dim)
    flat = rng.child("init-linear").generator().uniform(-bound, bound, input_dim + 1)
    return LinearModel(flat, input_dim)


def init_mlp(input_dim: int, hidden_dim: int = 16, rng: RngStream | None = None) -> MlpModel:
    """Mlp with uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] init per layer."""
    n = hidden_dim * input_dim + 2 * hidden_dim + 1
    if rng is None:
        return MlpModel(np.zeros(n), input_dim, hidden_dim)
    gen = rng.child("init-mlp").generator()
    b_in = 1.0 / math.sqrt(input_dim)
    b_hid = 1.0 / math.sqrt(hidden_dim)
    flat = np.empty(n)
    flat[: hidden_dim * input_dim + hidden_dim] = gen.uniform(
        -b_in, b_in, hidden_dim * input_dim + hidden_dim
    )
    flat[hidden_dim * input_dim + hidden_dim :] = gen.uniform(-b_hid, b_hid, hidden_dim + 1)
    return MlpModel(flat, input_dim, hidden_dim)


def axpy_update(model: ScoringModel, g: np.ndarray, step: float) -> ScoringModel:
    """Return the model moved one gradient step: params' = params - step * g."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != model.params.shape:
        raise ModelError(f"gradient shape {g.shape} != parameter shape {model.params.shape}")
    return model.with_params(model.params - step * g)


def finite_diff_grad(model: ScoringModel, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of the score wrt every parameter."""
    base = model.params
    g = np.empty_like(base)
    for i in range(base.size):
        bump = np.zeros_like(base)
        bump[i] = step
        g[i] = (model.with_params(base + bump).score(x)
                - model.with_params(base - bump).score(x)) / (2.0 * step)
    return g


def save_checkpoint(model: ScoringModel, path: str) -> None:
    """Write a flat-parameter checkpoint that round-trips float64 exactly.

    JSON floats are emitted via repr, which Python parses back bit-for-bit.
    """
    if isinstance(model, LinearModel):
        header: dict = {"variant": "linear", "input_dim": model.input_dim}
    else:
        header = {"variant": "mlp", "input_dim": model.input_dim, "hidden_dim": model.hidden_dim}
    header["params"] = [float(v) for v in model.params]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(header, fh)
        fh.write("\n")


def load_checkpoint(path: str) -> ScoringModel:
    with open(path, "r", encoding="utf-8") as fh:
        header = json.load(fh)
    params = np.array(header["params"], dtype=np.float64)
    variant = header.get("variant")
    if variant == "linear":
        return LinearModel(params, int(header["input_dim"]))
    if variant == "mlp":
        return MlpModel(params, int(header["input_dim"]), int(header["hidden_dim"]))
    raise ModelError(f"{path}: unknown model variant {variant!r}")
