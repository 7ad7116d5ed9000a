"""ReLU feed-forward networks with a single logit output.

A network is a chain of affine layers with ReLU between them and a linear
logit at the end. Each input lands in one linear region, identified by the
on/off states of all hidden neurons (the activation pattern), and within
that region the network is exactly affine. This module represents networks,
evaluates them, composes the exact per-pattern affine map, and serializes
them to a JSON document.

Activation patterns are '0'/'1' strings, layer-major, neuron order within
layer. A pre-activation of exactly 0 maps to bit '0' so that patterns are
deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .docio import canonical_dumps, sha256_hex
from .errors import InputError, NumericError

ACTIVATION = "relu"
LINK = "logit"


def _as_locked_f64(a, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Layer:
    """One affine layer: weights (out x in) and bias (out,)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = _as_locked_f64(self.weights, "weights")
        b = _as_locked_f64(self.bias, "bias")
        if w.ndim != 2:
            raise InputError(f"weights must be 2-D, got shape {w.shape}")
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise InputError(f"bias shape {b.shape} does not match weights {w.shape}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class NetworkSpec:
    """Immutable ReLU MLP with a single linear logit output.

    ``layers[:-1]`` are hidden (ReLU) layers, ``layers[-1]`` is the output
    layer with out_dim 1. Probabilities are obtained from the logit via the
    logistic link; the network itself always works on the logit scale.
    """

    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise InputError("network needs at least one layer")
        for i in range(1, len(layers)):
            if layers[i].in_dim != layers[i - 1].out_dim:
                raise InputError(
                    f"layer {i + 1}: expects input dim {layers[i].in_dim}, "
                    f"but layer {i} outputs {layers[i - 1].out_dim}"
                )
        if layers[-1].out_dim != 1:
            raise InputError(
                f"layer {len(layers)}: output layer must have a single logit, "
                f"got {layers[-1].out_dim}"
            )
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return tuple(layer.out_dim for layer in self.layers[:-1])

    @property
    def total_hidden(self) -> int:
        return sum(self.hidden_widths)


@dataclass(frozen=True)
class AffineMap:
    """Exact affine logit map w.x + b valid on one activation region."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        w = _as_locked_f64(self.w, "w")
        if w.ndim != 1:
            raise InputError(f"w must be 1-D, got shape {w.shape}")
        b = float(self.b)
        if not np.isfinite(b):
            raise InputError("b must be finite")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", b)

    def __call__(self, x) -> float:
        return float(self.w @ np.asarray(x, dtype=np.float64) + self.b)

    def batch(self, X) -> np.ndarray:
        """Logits for a whole matrix of inputs at once."""
        return np.asarray(X, dtype=np.float64) @ self.w + self.b


def _check_input(net: NetworkSpec, X: np.ndarray, rows: bool) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    expected_ndim = 2 if rows else 1
    if X.ndim != expected_ndim or X.shape[-1] != net.input_dim:
        raise InputError(
            f"input shape {X.shape} does not match network input_dim {net.input_dim}"
        )
    if not np.all(np.isfinite(X)):
        raise InputError("input contains non-finite values")
    return X


def forward_batch(net: NetworkSpec, X) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate many inputs: returns (logits (n,), hidden bits (n, total_hidden)).

    Bit is True iff the pre-activation is strictly positive.
    """
    X = _check_input(net, X, rows=True)
    h = X
    bit_blocks = []
    for li, layer in enumerate(net.layers[:-1]):
        pre = h @ layer.weights.T + layer.bias
        if not np.all(np.isfinite(pre)):
            raise NumericError(f"non-finite pre-activation at layer {li + 1}")
        bit_blocks.append(pre > 0.0)
        h = np.maximum(pre, 0.0)
    out = net.layers[-1]
    logits = h @ out.weights.T + out.bias
    if not np.all(np.isfinite(logits)):
        raise NumericError(f"non-finite logit at layer {len(net.layers)}")
    if bit_blocks:
        bits = np.concatenate(bit_blocks, axis=1)
    else:
        bits = np.zeros((X.shape[0], 0), dtype=bool)
    return logits[:, 0], bits


def bits_to_pattern(bits) -> str:
    return "".join("1" if b else "0" for b in bits)


def forward(net: NetworkSpec, x) -> tuple[float, str]:
    """Evaluate one input: returns (logit, activation pattern string)."""
    x = _check_input(net, x, rows=False)
    logits, bits = forward_batch(net, x[None, :])
    return float(logits[0]), bits_to_pattern(bits[0])


def _pattern_bits(net: NetworkSpec, pattern: str) -> np.ndarray:
    if len(pattern) != net.total_hidden or set(pattern) - {"0", "1"}:
        raise InputError(
            f"pattern {pattern!r} does not match network with {net.total_hidden} hidden neurons"
        )
    return np.frombuffer(pattern.encode("ascii"), dtype=np.uint8) == ord("1")


def affine_for_pattern(net: NetworkSpec, pattern: str) -> AffineMap:
    """Compose the exact affine logit map for one activation pattern.

    Each hidden layer's affine map is passed through a 0/1 diagonal mask
    taken from the pattern; for any x whose forward pattern equals
    ``pattern`` the result satisfies logit(x) == w.x + b up to roundoff.
    """
    bits = _pattern_bits(net, pattern)
    A = None  # current map: x -> A x + c
    c = None
    offset = 0
    for layer in net.layers[:-1]:
        if A is None:
            A, c = layer.weights, layer.bias
        else:
            A, c = layer.weights @ A, layer.weights @ c + layer.bias
        mask = bits[offset : offset + layer.out_dim].astype(np.float64)
        offset += layer.out_dim
        A = A * mask[:, None]
        c = c * mask
    out = net.layers[-1]
    if A is None:
        A, c = out.weights, out.bias
    else:
        A, c = out.weights @ A, out.weights @ c + out.bias
    return AffineMap(w=A[0], b=float(c[0]))


def save_network(net: NetworkSpec) -> dict:
    """Network document: round-trips exactly through load_network."""
    return {
        "input_dim": net.input_dim,
        "layers": [
            {"weights": layer.weights.tolist(), "bias": layer.bias.tolist()}
            for layer in net.layers
        ],
        "activation": ACTIVATION,
        "link": LINK,
    }


def load_network(doc: dict) -> NetworkSpec:
    """Parse a network document, naming the offending layer on failure."""
    if not isinstance(doc, dict):
        raise InputError("network document must be a JSON object")
    for key in ("input_dim", "layers", "activation", "link"):
        if key not in doc:
            raise InputError(f"network document missing key {key!r}")
    if doc["activation"] != ACTIVATION:
        raise InputError(f"unsupported activation {doc['activation']!r} (only 'relu')")
    if doc["link"] != LINK:
        raise InputError(f"unsupported link {doc['link']!r} (only 'logit')")
    input_dim = doc["input_dim"]
    if not isinstance(input_dim, int) or input_dim < 1:
        raise InputError(f"input_dim must be a positive integer, got {input_dim!r}")
    raw_layers = doc["layers"]
    if not isinstance(raw_layers, list) or not raw_layers:
        raise InputError("network document needs a non-empty 'layers' list")
    layers = []
    prev_out = input_dim
    for i, raw in enumerate(raw_layers, start=1):
        try:
            layer = Layer(weights=np.array(raw["weights"]), bias=np.array(raw["bias"]))
        except (KeyError, TypeError, ValueError, InputError) as exc:
            raise InputError(f"layer {i}: {exc}") from exc
        if layer.in_dim != prev_out:
            raise InputError(
                f"layer {i}: weights expect input dim {layer.in_dim}, "
                f"but previous width is {prev_out}"
            )
        prev_out = layer.out_dim
        layers.append(layer)
    if layers[-1].out_dim != 1:
        raise InputError(f"layer {len(layers)}: output layer must have width 1")
    return NetworkSpec(layers=tuple(layers))


def fingerprint(net: NetworkSpec) -> str:
    """Content hash of the network document; keys region/merged artifacts to their net."""
    return sha256_hex(canonical_dumps(save_network(net)).encode("utf-8"))


def sigmoid(z):
    """Numerically stable logistic link."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)
