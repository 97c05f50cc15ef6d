"""Reproductions of the two numerical studies and the empirical lower bound.

* :func:`run_tanh_toy` rebuilds the two-layer tanh network whose rotated
  activation defeats the positive-weight shortcut, and returns its five
  reference constants.
* :func:`run_monte_carlo` draws Gaussian weight matrices and reports how far
  theta, the linear norm and vartheta sit below the naive product bound.

Every random draw uses a counter-based Philox stream keyed by
``(seed, trial)``, so trial ``k`` is the same whatever the worker count.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import activations as acts
from .certificates import (
    linear_bound,
    product_bound,
    theta_from_weights,
    theta_recursive,
    vartheta_exhaustive,
)
from .errors import InvalidInputError, ShapeError
from .linalg import spectral_norm
from .network import Network, forward

TOY_W1 = np.array([[1.0, 3.0], [3.0, 3.0]])
TOY_W2 = np.array([[10.0, 2.0], [7.0, 4.0]])
TOY_U = 0.5 * np.array([[math.sqrt(3.0), 1.0], [1.0, -math.sqrt(3.0)]])
TOY_X = np.array([-3.4, 2.0])
TOY_Z = 1e-4 * np.array([1.0, math.sqrt(3.0)])


def stream(seed, index=0):
    """Philox generator for substream ``index`` of ``seed``."""
    seed, index = int(seed), int(index)
    if not (0 <= seed < 2**64 and 0 <= index < 2**64):
        raise InvalidInputError("seed and substream index must be 64-bit unsigned integers")
    return np.random.Generator(np.random.Philox(key=(index << 64) | seed))


def empirical_lipschitz(net, x, trials=1000, radius=1e-4, seed=0):
    """Largest ``||T(x+z) - T(x)|| / ||z||`` over ``z`` uniform on the sphere of ``radius``.

    ``net`` is a :class:`Network` or any callable acting on batches. The
    result is a lower bound on every valid Lipschitz constant.
    """
    if radius <= 0:
        raise InvalidInputError("radius must be positive")
    fn = net if not isinstance(net, Network) else (lambda v: forward(net, v))
    x = np.asarray(x, dtype=np.float64)
    if isinstance(net, Network) and x.shape != (net.input_dim,):
        raise ShapeError(f"point has shape {x.shape}, network expects ({net.input_dim},)")
    z = stream(seed).standard_normal((int(trials), x.size))
    z *= radius / np.linalg.norm(z, axis=1, keepdims=True)
    fx = fn(x[None])
    diff = np.linalg.norm(fn(x[None] + z) - fx, axis=1)
    return float(np.max(diff / np.linalg.norm(z, axis=1)))


# --------------------------------------------------------------------------
# tanh toy


def toy_original(x):
    """The toy network with its non-separable hidden activation ``U tanh(U .)``."""
    x = np.asarray(x, dtype=np.float64)
    h = np.tanh(x @ (TOY_U @ TOY_W1).T) @ TOY_U.T
    return h @ TOY_W2.T


def tanh_toy_network():
    """Equivalent network with the rotation folded into the weights and a separable tanh."""
    return Network.from_weights(
        [TOY_U @ TOY_W1, TOY_W2 @ TOY_U],
        [acts.builtin("tanh"), acts.builtin("identity")],
    )


@dataclass(frozen=True)
class TanhToyReport:
    linear: float
    theta: float
    vartheta: float
    naive: float
    empirical_ratio: float

    def to_dict(self):
        return {"linear": self.linear, "theta": self.theta, "vartheta": self.vartheta,
                "naive": self.naive, "empirical_ratio": self.empirical_ratio}


def run_tanh_toy():
    net = tanh_toy_network()
    linear = spectral_norm(TOY_W2 @ TOY_W1)
    theta = theta_from_weights([TOY_W1, TOY_W2], [0.5])
    naive = spectral_norm(TOY_W1) * spectral_norm(TOY_W2)
    vartheta = vartheta_exhaustive(net).value
    ratio = float(np.linalg.norm(toy_original(TOY_X + TOY_Z) - toy_original(TOY_X))
                  / np.linalg.norm(TOY_Z))
    return TanhToyReport(linear, theta, vartheta, naive, ratio)


# --------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class MonteCarloConfig:
    dims: tuple = (8, 10, 6, 3)
    trials: int = 200
    seed: int = 0
    alpha: tuple | None = None
    vartheta: bool = False
    budget: int | None = None
    workers: int = 1

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 3:
            raise InvalidInputError("Monte Carlo needs at least two layers (three dimensions)")
        if any(d < 1 for d in dims):
            raise InvalidInputError("dimensions must be positive")
        if self.trials < 1:
            raise InvalidInputError("trials must be >= 1")
        alpha = tuple(self.alpha) if self.alpha is not None else (0.5,) * (len(dims) - 2)
        if len(alpha) != len(dims) - 2 or any(not 0.0 <= a <= 1.0 for a in alpha):
            raise InvalidInputError(f"need {len(dims) - 2} hidden alphas in [0, 1]")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class RatioStats:
    mean: float
    min: float
    max: float

    @classmethod
    def of(cls, values):
        v = np.asarray(values, dtype=np.float64)
        return cls(float(np.mean(v)), float(np.min(v)), float(np.max(v)))


@dataclass
class MonteCarloResult:
    config: MonteCarloConfig
    theta_ratio: RatioStats
    linear_ratio: RatioStats
    vartheta_ratio: RatioStats | None
    per_trial: np.ndarray = field(repr=False)

    def to_dict(self):
        out = {
            "dims": list(self.config.dims),
            "trials": self.config.trials,
            "seed": self.config.seed,
            "alpha": list(self.config.alpha),
            "theta_ratio": vars(self.theta_ratio),
            "linear_ratio": vars(self.linear_ratio),
            "vartheta_ratio": vars(self.vartheta_ratio) if self.vartheta_ratio else None,
        }
        return out

    def dump_trials(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "theta_ratio", "linear_ratio", "vartheta_ratio"])
            for k, row in enumerate(self.per_trial):
                w.writerow([k] + ["" if math.isnan(v) else repr(float(v)) for v in row])


def random_network(dims, rng, alphas=None):
    """Standard-normal weights, zero biases, ReLU activations with optional alpha overrides."""
    weights = [rng.standard_normal((dims[i + 1], dims[i])) for i in range(len(dims) - 1)]
    overrides = None if alphas is None else list(alphas) + [0.5]
    return Network.from_weights(weights, alphas=overrides)


def _trial(cfg, k):
    net = random_network(cfg.dims, stream(cfg.seed, k), cfg.alpha)
    prod = product_bound(net)
    row = [theta_recursive(net) / prod, linear_bound(net) / prod, math.nan]
    if cfg.vartheta:
        row[2] = vartheta_exhaustive(net, budget=cfg.budget).value / prod
    return row


def run_monte_carlo(cfg):
    """Ratios of theta, ``||W_m...W_1||`` and (optionally) vartheta to the product bound."""
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(lambda k: _trial(cfg, k), range(cfg.trials)))
    else:
        rows = [_trial(cfg, k) for k in range(cfg.trials)]
    table = np.array(rows, dtype=np.float64)
    return MonteCarloResult(
        cfg,
        RatioStats.of(table[:, 0]),
        RatioStats.of(table[:, 1]),
        RatioStats.of(table[:, 2]) if cfg.vartheta else None,
        table,
    )
