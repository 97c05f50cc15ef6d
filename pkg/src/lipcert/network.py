"""Layered networks ``T = T_m o ... o T_1`` with ``T_i(x) = R_i(W_i x + b_i)``.

Networks are read from and written to the line-oriented ``lipnet`` text
format::

    lipnet 1
    input_dim 2
    layer
      dims 2 2
      weights
      1, 0
      0, 1
      bias 0, 0
      activation relu
      alpha 0.5          # optional, defaults to the catalog value
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import activations as acts
from .errors import InvalidInputError, LipcertError, ParseError, ShapeError
from .linalg import as_matrix, as_vector

FORMAT_HEADER = "lipnet 1"


@dataclass(frozen=True, eq=False)
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: acts.VectorActivation
    alpha_override: float | None = None

    def __post_init__(self):
        W = as_matrix(self.weight, "weight")
        b = as_vector(self.bias, "bias")
        if b.size != W.shape[0]:
            raise ShapeError(f"bias has length {b.size}, weight has {W.shape[0]} rows")
        if self.activation.dimension != W.shape[0]:
            raise ShapeError(
                f"activation dimension {self.activation.dimension} != weight rows {W.shape[0]}"
            )
        if self.alpha_override is not None and not 0.0 <= self.alpha_override <= 1.0:
            raise InvalidInputError(f"alpha must lie in [0, 1], got {self.alpha_override}")
        if self.alpha_override is not None:
            object.__setattr__(self, "alpha_override", float(self.alpha_override))
        W.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weight", W)
        object.__setattr__(self, "bias", b)

    @property
    def alpha(self):
        return self.activation.alpha if self.alpha_override is None else self.alpha_override

    @property
    def rows(self):
        return self.weight.shape[0]

    @property
    def cols(self):
        return self.weight.shape[1]


@dataclass(frozen=True, eq=False)
class Network:
    layers: tuple
    input_dim: int

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise InvalidInputError("a network needs at least one layer")
        prev = int(self.input_dim)
        for i, layer in enumerate(layers, start=1):
            if layer.cols != prev:
                raise ShapeError(f"layer {i} expects input dimension {layer.cols}, previous has {prev}")
            prev = layer.rows
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "input_dim", int(self.input_dim))

    @classmethod
    def from_weights(cls, weights, activations=None, biases=None, alphas=None):
        """Build a network from weight matrices.

        ``activations`` may be scalar activations (lifted separably), vector
        activations or ``None`` for ReLU. ``alphas`` optionally overrides the
        per-layer averagedness constants.
        """
        weights = [as_matrix(W) for W in weights]
        m = len(weights)
        activations = activations if activations is not None else [acts.builtin("relu")] * m
        biases = biases if biases is not None else [np.zeros(W.shape[0]) for W in weights]
        alphas = alphas if alphas is not None else [None] * m
        layers = []
        for W, act, b, a in zip(weights, activations, biases, alphas):
            if isinstance(act, acts.ScalarActivation):
                act = acts.separable(act, W.shape[0])
            layers.append(Layer(W, b, act, a))
        return cls(tuple(layers), weights[0].shape[1])

    @property
    def m(self):
        return len(self.layers)

    @property
    def dims(self):
        return (self.input_dim,) + tuple(layer.rows for layer in self.layers)

    @property
    def weights(self):
        return [layer.weight for layer in self.layers]

    @property
    def alphas(self):
        return [layer.alpha for layer in self.layers]

    @property
    def hidden_alphas(self):
        """Averagedness constants of layers 1..m-1; the last layer never enters a bound."""
        return [layer.alpha for layer in self.layers[:-1]]

    def hidden_separable(self):
        return all(layer.activation.separable for layer in self.layers[:-1])

    def with_alphas(self, alphas):
        """Copy of the network with per-layer alpha overrides."""
        if len(alphas) != self.m:
            raise ShapeError(f"need {self.m} alphas, got {len(alphas)}")
        layers = tuple(Layer(L.weight, L.bias, L.activation, float(a)) for L, a in zip(self.layers, alphas))
        return Network(layers, self.input_dim)

    def __call__(self, x):
        return forward(self, x)


def forward(net, x):
    """Evaluate the network on ``x`` (shape ``(N0,)`` or a batch ``(B, N0)``)."""
    y = np.asarray(x, dtype=np.float64)
    if y.shape[-1] != net.input_dim:
        raise ShapeError(f"input has dimension {y.shape[-1]}, network expects {net.input_dim}")
    for layer in net.layers:
        y = acts.evaluate(layer.activation, y @ layer.weight.T + layer.bias)
    return y


def structurally_equal(a, b):
    """Same dimensions, weights, biases, activations and alpha overrides."""
    if a.input_dim != b.input_dim or a.m != b.m:
        return False
    for la, lb in zip(a.layers, b.layers):
        if not (np.array_equal(la.weight, lb.weight) and np.array_equal(la.bias, lb.bias)):
            return False
        if la.activation != lb.activation or la.alpha_override != lb.alpha_override:
            return False
    return True


# --------------------------------------------------------------------------
# lipnet format


def _floats(text, lineno, what):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ParseError(f"{what}: expected comma-separated decimals", lineno) from None
    if not all(math.isfinite(v) for v in vals):
        raise ParseError(f"{what}: non-finite value", lineno)
    return vals


def _ints(parts, lineno, what, count):
    if len(parts) != count:
        raise ParseError(f"{what}: expected {count} integer(s)", lineno)
    try:
        vals = [int(p) for p in parts]
    except ValueError:
        raise ParseError(f"{what}: expected integers", lineno) from None
    if any(v < 1 for v in vals):
        raise ParseError(f"{what}: dimensions must be positive", lineno)
    return vals


def parse(document):
    """Parse and validate a lipnet v1 document."""
    lines = []
    for lineno, raw in enumerate(document.splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if text:
            lines.append((lineno, text))
    if not lines:
        raise ParseError("empty document")
    lineno, text = lines[0]
    if text.split() != FORMAT_HEADER.split():
        raise ParseError(f"expected header {FORMAT_HEADER!r}", lineno)
    pos = 1
    if pos >= len(lines) or lines[pos][1].split()[0] != "input_dim":
        raise ParseError("expected input_dim", lines[pos][0] if pos < len(lines) else lineno)
    input_dim = _ints(lines[pos][1].split()[1:], lines[pos][0], "input_dim", 1)[0]
    pos += 1

    layers = []
    prev = input_dim
    while pos < len(lines):
        lineno, text = lines[pos]
        if text != "layer":
            raise ParseError(f"expected 'layer', got {text.split()[0]!r}", lineno)
        layer_line = lineno
        pos += 1
        fields = {}
        while pos < len(lines) and lines[pos][1] != "layer":
            lineno, text = lines[pos]
            key, _, rest = text.partition(" ")
            rest = rest.strip()
            if key in fields:
                raise ParseError(f"duplicate {key!r}", lineno)
            if key == "dims":
                rows, cols = _ints(rest.split(), lineno, "dims", 2)
                if cols != prev:
                    raise ParseError(
                        f"dimension chain mismatch: layer {len(layers) + 1} has {cols} columns, "
                        f"previous dimension is {prev}", lineno)
                fields["dims"] = (rows, cols)
            elif key == "weights":
                if "dims" not in fields:
                    raise ParseError("'dims' must precede 'weights'", lineno)
                rows, cols = fields["dims"]
                block = []
                for _ in range(rows):
                    pos += 1
                    if pos >= len(lines):
                        raise ParseError(f"expected {rows} weight rows", lineno)
                    rl, rt = lines[pos]
                    row = _floats(rt, rl, "weight row")
                    if len(row) != cols:
                        raise ParseError(f"weight row has {len(row)} entries, expected {cols}", rl)
                    block.append(row)
                fields["weights"] = np.array(block, dtype=np.float64)
            elif key == "bias":
                fields["bias"] = (lineno, _floats(rest, lineno, "bias"))
            elif key == "activation":
                fields["activation"] = (lineno, rest)
            elif key == "alpha":
                try:
                    a = float(rest)
                except ValueError:
                    raise ParseError("alpha must be a decimal", lineno) from None
                if not 0.0 <= a <= 1.0:
                    raise ParseError(f"alpha must lie in [0, 1], got {a}", lineno)
                fields["alpha"] = a
            else:
                raise ParseError(f"unknown key {key!r}", lineno)
            pos += 1
        for req in ("dims", "weights", "activation"):
            if req not in fields:
                raise ParseError(f"layer is missing {req!r}", layer_line)
        rows, _ = fields["dims"]
        if "bias" in fields:
            bl, bias = fields["bias"]
            if len(bias) != rows:
                raise ParseError(f"bias has {len(bias)} entries, expected {rows}", bl)
        else:
            bias = [0.0] * rows
        al, spec = fields["activation"]
        try:
            act = acts.parse_activation(spec, rows)
        except LipcertError as exc:
            raise ParseError(str(exc), al) from None
        layers.append(Layer(fields["weights"], np.array(bias), act, fields.get("alpha")))
        prev = rows
    if not layers:
        raise ParseError("network has no layers", lines[-1][0])
    return Network(tuple(layers), input_dim)


def _csv(values):
    return ", ".join(repr(float(v)) for v in values)


def serialize(net):
    """Render ``net`` as a lipnet v1 document; floats use shortest round-trip repr."""
    out = [FORMAT_HEADER, f"input_dim {net.input_dim}"]
    for layer in net.layers:
        out.append("layer")
        out.append(f"  dims {layer.rows} {layer.cols}")
        out.append("  weights")
        out.extend("  " + _csv(row) for row in layer.weight)
        out.append("  bias " + _csv(layer.bias))
        out.append("  activation " + acts.format_activation(layer.activation))
        if layer.alpha_override is not None:
            out.append(f"  alpha {float(layer.alpha_override)!r}")
    return "\n".join(out) + "\n"


def load(path):
    return parse(Path(path).read_text(encoding="utf-8"))


def dump(net, path):
    Path(path).write_text(serialize(net), encoding="utf-8")
