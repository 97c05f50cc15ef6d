"""Averaged activation operators and numerical checks of their constants.

A scalar activation ``rho`` is alpha-averaged when ``rho = (1 - alpha) Id + alpha Q``
for a nonexpansive ``Q``; on the real line this is the same as every
difference quotient ``(rho(x) - rho(y)) / (x - y)`` lying in ``[1 - 2 alpha, 1]``.
The verification routines below test exactly that on sampled pairs.

Vector activations are either separable lifts of scalar ones or one of the
non-separable operators (sort/average mixing, median, capsule squashing).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit

from .errors import InvalidInputError, NotApplicableError, ParseError, ShapeError

QUOTIENT_TOL = 1e-9
PROX_GAP_TOL = 1e-6
GM_MU = 8.0 / (3.0 * math.sqrt(3.0))
_EPS = np.finfo(np.float64).eps
# step sizes used to form difference quotients
PAIR_SCALES = (1e-6, 1e-3, 1.0, 10.0)


@dataclass(frozen=True)
class ScalarActivation:
    """An averaged function on the real line.

    ``potential`` is the convex function whose (possibly relaxed) proximity
    operator reproduces the activation: ``rho = Id + relaxation * (prox - Id)``.
    ``domain`` is the closed hull of the potential's effective domain.
    """

    name: str
    alpha: float
    evaluator: Callable = field(compare=False, repr=False)
    params: tuple = ()
    potential: Optional[Callable] = field(default=None, compare=False, repr=False)
    domain: tuple = (-math.inf, math.inf)
    relaxation: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidInputError(f"{self.name}: alpha must lie in [0, 1], got {self.alpha}")

    def __call__(self, x):
        return self.evaluator(np.asarray(x, dtype=np.float64))

    @property
    def param_dict(self):
        return dict(self.params)

    def spec(self):
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={_fmt(v)}" for k, v in self.params)
        return f"{self.name}({inner})"


@dataclass(frozen=True)
class VectorActivation:
    """An averaged operator on ``R^dimension``.

    ``kind`` is one of ``separable``, ``sort_mix``, ``median``, ``squashing``.
    """

    kind: str
    dimension: int
    alpha: float
    components: tuple = ()
    params: tuple = ()

    @property
    def name(self):
        if self.kind == "separable" and self.uniform:
            return self.components[0].name
        return self.kind

    @property
    def separable(self):
        return self.kind == "separable"

    @property
    def uniform(self):
        return self.separable and all(c == self.components[0] for c in self.components)

    @property
    def param_dict(self):
        return dict(self.params)

    def __call__(self, x):
        return evaluate(self, x)


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, tuple):
        return ":".join(repr(float(t)) for t in v)
    return repr(float(v))


# --------------------------------------------------------------------------
# scalar catalog


def _indicator(lo, hi):
    def phi(u):
        return 0.0 if lo <= u <= hi else math.inf

    return phi


def _elu_potential(beta):
    def phi(u):
        if u >= 0.0:
            return 0.0
        if u > -beta:
            return (u + beta) * math.log((u + beta) / beta) - u - 0.5 * u * u
        if u == -beta:
            return beta - 0.5 * beta * beta
        return math.inf

    return phi


def _tanh_potential(u):
    a = abs(u)
    if a < 1.0:
        return 0.5 * ((1.0 + u) * math.log1p(u) + (1.0 - u) * math.log1p(-u) - u * u)
    if a == 1.0:
        return math.log(2.0) - 0.5
    return math.inf


def _gm_potential(mu):
    def phi(u):
        a = abs(u)
        if a < mu:
            return mu * math.atan(math.sqrt(a / (mu - a))) - math.sqrt(a * (mu - a)) - 0.5 * u * u
        if a == mu:
            return 0.5 * mu * (math.pi - mu)
        return math.inf

    return phi


def _elish(x):
    return (10.0 / 11.0) * np.where(x >= 0.0, x, np.expm1(np.minimum(x, 0.0))) * expit(x)


def _positive(name, key, value, upper=math.inf):
    value = float(value)
    if not (0.0 < value <= upper):
        raise InvalidInputError(f"{name}: {key} must lie in (0, {upper:g}], got {value}")
    return value


def _make(name, params):
    """Build a catalog entry; ``params`` is a dict of already-parsed values."""
    p = dict(params)

    def take(key, default):
        return p.pop(key, default)

    if name == "relu":
        act = ScalarActivation("relu", 0.5, lambda x: np.maximum(x, 0.0),
                               potential=_indicator(0.0, math.inf), domain=(0.0, math.inf))
    elif name == "capped_relu":
        beta = _positive(name, "beta", take("beta", 1.0))
        act = ScalarActivation("capped_relu", 0.5, lambda x: np.clip(x, 0.0, beta), (("beta", beta),),
                               potential=_indicator(0.0, beta), domain=(0.0, beta))
    elif name == "leaky_relu":
        lam = _positive(name, "lam", take("lam", 0.99), 2.0)
        act = ScalarActivation("leaky_relu", lam / 2.0, lambda x: np.where(x >= 0.0, x, (1.0 - lam) * x),
                               (("lam", lam),), potential=_indicator(0.0, math.inf),
                               domain=(0.0, math.inf), relaxation=lam)
    elif name == "abs":
        act = ScalarActivation("abs", 1.0, np.abs, potential=_indicator(0.0, math.inf),
                               domain=(0.0, math.inf), relaxation=2.0)
    elif name == "elu":
        # prox representation needs beta <= 1
        beta = _positive(name, "beta", take("beta", 1.0), 1.0)
        act = ScalarActivation("elu", 0.5,
                               lambda x: np.where(x >= 0.0, x, beta * np.expm1(np.minimum(x, 0.0))),
                               (("beta", beta),), potential=_elu_potential(beta), domain=(-beta, math.inf))
    elif name == "softplus":
        act = ScalarActivation("softplus", 0.5, lambda x: np.logaddexp(0.0, x) - math.log(2.0))
    elif name == "tanh":
        act = ScalarActivation("tanh", 0.5, np.tanh, potential=_tanh_potential, domain=(-1.0, 1.0))
    elif name == "sine":
        act = ScalarActivation("sine", 1.0, np.sin)
    elif name == "mirrored_relu":
        act = ScalarActivation("mirrored_relu", 1.0, lambda x: np.minimum(np.abs(x), 1.0))
    elif name == "swish":
        act = ScalarActivation("swish", 0.546, lambda x: (10.0 / 11.0) * x * expit(x))
    elif name == "elish":
        act = ScalarActivation("elish", 0.536, _elish)
    elif name == "gaussian":
        act = ScalarActivation("gaussian", (1.0 + math.sqrt(2.0 / math.e)) / 2.0, lambda x: np.exp(-x * x))
    elif name == "geman_mcclure":
        mu = _positive(name, "mu", take("mu", GM_MU), GM_MU)
        act = ScalarActivation("geman_mcclure", 0.5, lambda x: mu * np.sign(x) * x * x / (1.0 + x * x),
                               (("mu", mu),) if mu != GM_MU else (), potential=_gm_potential(mu),
                               domain=(-mu, mu))
    elif name == "identity":
        act = ScalarActivation("identity", 0.0, lambda x: np.array(x, dtype=np.float64, copy=True),
                               potential=lambda u: 0.0)
    else:
        raise InvalidInputError(f"unknown activation {name!r}")
    if p:
        raise InvalidInputError(f"{name}: unexpected parameters {sorted(p)}")
    return act


CATALOG = (
    "relu", "capped_relu", "leaky_relu", "abs", "elu", "softplus", "tanh", "sine",
    "mirrored_relu", "swish", "elish", "gaussian", "geman_mcclure", "identity",
)


def builtin(name, **params):
    """Catalog lookup, e.g. ``builtin("elu", beta=0.5)``."""
    return _make(name, params)


# --------------------------------------------------------------------------
# vector operators


def separable(components, dimension=None):
    """Coordinatewise lift; a single component is broadcast to ``dimension``."""
    if isinstance(components, ScalarActivation):
        if dimension is None:
            raise InvalidInputError("dimension is required when lifting one scalar activation")
        components = (components,) * int(dimension)
    components = tuple(components)
    if dimension is not None and len(components) != dimension:
        raise ShapeError(f"{len(components)} components for dimension {dimension}")
    if not components:
        raise InvalidInputError("separable activation needs at least one component")
    return VectorActivation("separable", len(components), max(c.alpha for c in components), components)


def sort_mix(dimension, omega, projection="mean"):
    """``omega * sort(x) + (1 - omega) * proj_C(x)``; C is the diagonal (``mean``) or ``box`` [0,1]^N."""
    omega = float(omega)
    if not 0.0 <= omega <= 1.0:
        raise InvalidInputError(f"sort_mix: omega must lie in [0, 1], got {omega}")
    if projection not in ("mean", "box"):
        raise InvalidInputError(f"sort_mix: unsupported projection set {projection!r}")
    return VectorActivation("sort_mix", int(dimension), (1.0 + omega) / 2.0,
                            params=(("omega", omega), ("set", projection)))


def median(tau, theta=0.0):
    """First ``len(tau)`` entries of ``sort([tau * x, theta])``."""
    tau = tuple(float(t) for t in np.atleast_1d(tau))
    if not tau or any(not -1.0 < t < 1.0 for t in tau):
        raise InvalidInputError("median: every tau must lie in (-1, 1)")
    return VectorActivation("median", len(tau), (1.0 + max(abs(t) for t in tau)) / 2.0,
                            params=(("tau", tau), ("theta", float(theta))))


def squashing(dimension, mu=GM_MU):
    """Capsule squashing ``x -> mu ||x|| x / (1 + ||x||^2)``."""
    mu = _positive("squashing", "mu", mu, GM_MU)
    return VectorActivation("squashing", int(dimension), 0.5, params=(("mu", mu),))


def evaluate(act, x):
    """Apply ``act`` along the last axis of ``x``."""
    if isinstance(act, ScalarActivation):
        return act(x)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != act.dimension:
        raise ShapeError(f"{act.name} expects dimension {act.dimension}, got {x.shape[-1]}")
    kind = act.kind
    prm = act.param_dict
    if kind == "separable":
        if act.uniform:
            return act.components[0](x)
        out = np.empty_like(x)
        for k, comp in enumerate(act.components):
            out[..., k] = comp(x[..., k])
        return out
    if kind == "sort_mix":
        omega = prm["omega"]
        if prm["set"] == "mean":
            proj = np.broadcast_to(x.mean(axis=-1, keepdims=True), x.shape)
        else:
            proj = np.clip(x, 0.0, 1.0)
        return omega * np.sort(x, axis=-1) + (1.0 - omega) * proj
    if kind == "median":
        tau = np.asarray(prm["tau"])
        theta = np.full(x.shape[:-1] + (1,), prm["theta"])
        return np.sort(np.concatenate([tau * x, theta], axis=-1), axis=-1)[..., :-1]
    if kind == "squashing":
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        return prm["mu"] * r / (1.0 + r * r) * x
    raise InvalidInputError(f"unknown activation kind {kind!r}")


# --------------------------------------------------------------------------
# spec strings used by the lipnet format

_CALL = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")


def _parse_params(text):
    out = {}
    if not text or not text.strip():
        return out
    for item in text.split(","):
        key, sep, value = item.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ParseError(f"bad activation parameter {item.strip()!r}")
        out[key] = value
    return out


def _num(name, key, value):
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"{name}: parameter {key} must be a number, got {value!r}") from None


def parse_scalar(text):
    m = _CALL.match(text)
    if not m:
        raise ParseError(f"bad activation {text!r}")
    name, raw = m.group(1), _parse_params(m.group(2))
    if name not in CATALOG:
        raise ParseError(f"unknown activation {name!r}")
    return _make(name, {k: _num(name, k, v) for k, v in raw.items()})


def parse_activation(text, dimension):
    """Parse an activation spec such as ``relu``, ``separable:relu;tanh`` or ``median(tau=0.5:0.5)``."""
    text = text.strip()
    if text.startswith("separable:"):
        parts = [s for s in text[len("separable:"):].split(";")]
        comps = [parse_scalar(s) for s in parts]
        if len(comps) == 1:
            return separable(comps[0], dimension)
        return separable(comps, dimension)
    m = _CALL.match(text)
    if not m:
        raise ParseError(f"bad activation {text!r}")
    name, raw = m.group(1), _parse_params(m.group(2))
    if name in CATALOG:
        return separable(parse_scalar(text), dimension)
    if name == "sort_mix":
        unknown = set(raw) - {"omega", "set"}
        if unknown:
            raise ParseError(f"sort_mix: unexpected parameters {sorted(unknown)}")
        act = sort_mix(dimension, _num(name, "omega", raw.get("omega", "1")), raw.get("set", "mean"))
    elif name == "median":
        unknown = set(raw) - {"tau", "theta"}
        if unknown or "tau" not in raw:
            raise ParseError("median needs tau=<t1:t2:...> and optional theta")
        tau = tuple(_num(name, "tau", t) for t in raw["tau"].split(":"))
        act = median(tau, _num(name, "theta", raw.get("theta", "0")))
    elif name == "squashing":
        unknown = set(raw) - {"mu"}
        if unknown:
            raise ParseError(f"squashing: unexpected parameters {sorted(unknown)}")
        act = squashing(dimension, _num(name, "mu", raw.get("mu", repr(GM_MU))))
    else:
        raise ParseError(f"unknown activation {name!r}")
    if act.dimension != dimension:
        raise ParseError(f"{name} has dimension {act.dimension}, layer has {dimension}")
    return act


def format_activation(act):
    if act.kind == "separable":
        if act.uniform:
            return act.components[0].spec()
        return "separable:" + ";".join(c.spec() for c in act.components)
    inner = ",".join(f"{k}={_fmt(v)}" for k, v in act.params)
    return f"{act.kind}({inner})"


# --------------------------------------------------------------------------
# numerical verification


@dataclass(frozen=True)
class SamplingPlan:
    """Pairs ``(x, y)`` with ``x`` uniform on ``[lo, hi]`` and ``y - x`` cycling through PAIR_SCALES."""

    lo: float = -20.0
    hi: float = 20.0
    pairs: int = 10_000
    seed: int = 0

    def sample(self):
        if self.pairs < 1 or not self.hi > self.lo:
            raise InvalidInputError("degenerate sampling plan: need hi > lo and at least one pair")
        rng = np.random.Generator(np.random.Philox(key=self.seed))
        x = rng.uniform(self.lo, self.hi, self.pairs)
        scales = np.resize(np.asarray(PAIR_SCALES), self.pairs)
        step = scales * rng.uniform(0.5, 1.0, self.pairs) * rng.choice((-1.0, 1.0), self.pairs)
        y = np.clip(x + step, self.lo, self.hi)
        keep = x != y
        return x[keep], y[keep]


def _quotients(act, plan):
    x, y = plan.sample()
    fx, fy = act(x), act(y)
    if not (np.all(np.isfinite(fx)) and np.all(np.isfinite(fy))):
        raise InvalidInputError(f"{act.name} produced non-finite values")
    d = y - x
    q = (fy - fx) / d
    # floating-point error in the numerator, scaled by the step
    slack = 4.0 * _EPS * (np.abs(fx) + np.abs(fy)) / np.abs(d)
    return q, slack


@dataclass(frozen=True)
class AveragednessReport:
    passed: bool
    alpha: float
    worst_quotient_low: float
    worst_quotient_high: float
    pairs: int
    seed: int


def certify_averagedness(act, alpha, plan=SamplingPlan()):
    """Check every sampled difference quotient lies in ``[1 - 2 alpha, 1]`` up to QUOTIENT_TOL."""
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1], got {alpha}")
    q, slack = _quotients(act, plan)
    tol = QUOTIENT_TOL + slack
    ok = bool(np.all(q >= 1.0 - 2.0 * alpha - tol) and np.all(q <= 1.0 + tol))
    return AveragednessReport(ok, alpha, float(q.min()), float(q.max()), int(q.size), plan.seed)


def estimate_averagedness(act, plan=SamplingPlan()):
    """Smallest alpha consistent with the sampled quotients, or ``None`` if not nonexpansive."""
    q, slack = _quotients(act, plan)
    if np.any(q > 1.0 + QUOTIENT_TOL + slack):
        return None
    return max(0.0, (1.0 - float(q.min())) / 2.0)


def check_prox_representable(act, plan=SamplingPlan()):
    """True when the sampled quotients lie in [0, 1] (nonexpansive and increasing)."""
    q, slack = _quotients(act, plan)
    tol = QUOTIENT_TOL + slack
    return bool(np.all(q >= -tol) and np.all(q <= 1.0 + tol))


def prox_of_potential(potential, x, domain=(-math.inf, math.inf), tol=1e-10):
    """Minimiser of ``potential(u) + (x - u)^2 / 2`` by bounded Brent search.

    The potential is trusted to be proper, convex and lower semicontinuous;
    ``domain`` bounds its effective domain and brackets the search. Infinite
    sides are expanded until the minimiser is interior.
    """
    x = float(x)
    lo, hi = float(domain[0]), float(domain[1])

    def f(u):
        v = potential(u)
        if v != v:
            raise InvalidInputError(f"potential returned NaN at {u!r}")
        return v + 0.5 * (x - u) ** 2

    if lo == hi:
        return lo
    width = 1.0
    a = max(lo, min(x, hi) - width)
    b = min(hi, max(x, lo) + width)
    for _ in range(200):
        res = minimize_scalar(f, bounds=(a, b), method="bounded",
                              options={"xatol": tol * 1e-2, "maxiter": 1000})
        cands = [(res.fun, res.x), (f(a), a), (f(b), b)]
        fu, u = min(cands, key=lambda t: t[0])
        left_open = a > lo and u - a <= 2 * tol * (1 + abs(a))
        right_open = b < hi and b - u <= 2 * tol * (1 + abs(b))
        if not (left_open or right_open):
            return float(u)
        width *= 4.0
        if left_open:
            a = max(lo, u - width)
        if right_open:
            b = min(hi, u + width)
    raise InvalidInputError("prox bracket expansion did not terminate")


@dataclass(frozen=True)
class ProxReport:
    passed: bool
    max_abs_gap: float
    points: int


def verify_prox_representation(act, plan=SamplingPlan(-5.0, 5.0, 2001)):
    """Compare ``act`` with ``Id + relaxation (prox_potential - Id)`` on an even grid."""
    if act.potential is None:
        raise NotApplicableError(f"{act.name} has no prox potential")
    if plan.pairs < 2 or not plan.hi > plan.lo:
        raise InvalidInputError("degenerate grid")
    grid = np.linspace(plan.lo, plan.hi, plan.pairs)
    lam = act.relaxation
    gap = 0.0
    for x in grid:
        p = prox_of_potential(act.potential, x, act.domain)
        r = x + lam * (p - x)
        gap = max(gap, abs(float(act(x)) - r))
    return ProxReport(bool(gap <= PROX_GAP_TOL), float(gap), int(grid.size))


@dataclass(frozen=True)
class VectorAveragednessReport:
    passed: bool
    alpha: float
    worst_ratio: float
    trials: int
    seed: int


def certify_vector_averagedness(act, alpha, trials=1000, seed=0):
    """Check ``Q = Id + (R - Id) / alpha`` is nonexpansive on random pairs."""
    alpha = float(alpha)
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1], got {alpha}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    n = act.dimension
    spread = np.resize(np.array([0.1, 1.0, 10.0]), trials)[:, None]
    step = np.resize(np.array([1e-3, 0.1, 1.0, 10.0]), trials)[:, None]
    x = rng.standard_normal((trials, n)) * spread
    y = x + rng.standard_normal((trials, n)) * step
    rx, ry = evaluate(act, x), evaluate(act, y)
    if alpha == 0.0:
        if not np.array_equal(rx, x) or not np.array_equal(ry, y):
            raise InvalidInputError("alpha = 0 only describes the identity")
        return VectorAveragednessReport(True, alpha, 1.0, trials, seed)
    qx = x + (rx - x) / alpha
    qy = y + (ry - y) / alpha
    dq = np.linalg.norm(qx - qy, axis=1)
    dx = np.linalg.norm(x - y, axis=1)
    ratio = dq / dx
    return VectorAveragednessReport(bool(np.all(dq <= dx * (1.0 + QUOTIENT_TOL))), alpha,
                                    float(ratio.max()), trials, seed)
