"""Rectifier networks, box input domains and activation patterns."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class NetworkError(ValueError):
    """Raised when a network description is malformed."""


class DimensionMismatchError(NetworkError):
    pass


class NonFiniteError(NetworkError):
    pass


class DomainError(ValueError):
    """Raised when an input point lies outside the network's domain."""


@dataclass(frozen=True)
class InputBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise DimensionMismatchError(
                f"domain lower has length {lower.size}, upper has length {upper.size}")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise NonFiniteError("domain bounds must be finite")
        if np.any(lower > upper):
            raise NetworkError("domain lower bound exceeds upper bound")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    @classmethod
    def unit(cls, dim: int) -> "InputBox":
        return cls(np.zeros(dim), np.ones(dim))


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray
    bias: np.ndarray

    @property
    def width(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class ActivationPattern:
    """Per-layer activity bits; bit ``i`` of layer ``l`` is set iff unit ``i`` is active."""

    layers: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "layers", tuple(tuple(int(bool(b)) for b in layer) for layer in self.layers))

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(len(layer) for layer in self.layers)

    def active(self, layer: int) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.layers[layer]) if b)

    def flat(self) -> tuple[int, ...]:
        return tuple(b for layer in self.layers for b in layer)

    def to_string(self) -> str:
        return ";".join("".join(str(b) for b in layer) for layer in self.layers)

    @classmethod
    def from_string(cls, text: str) -> "ActivationPattern":
        return cls(tuple(tuple(int(c) for c in part) for part in text.strip().split(";")))

    @classmethod
    def from_flat(cls, bits: Sequence[int], widths: Sequence[int]) -> "ActivationPattern":
        bits = list(bits)
        if len(bits) != sum(widths):
            raise DimensionMismatchError("bit count does not match layer widths")
        out, pos = [], 0
        for w in widths:
            out.append(tuple(bits[pos:pos + w]))
            pos += w
        return cls(tuple(out))

    def __str__(self) -> str:
        return self.to_string()


@dataclass(frozen=True)
class NetworkModel:
    """A feedforward ReLU network restricted to a box domain.

    ``layers`` are the rectified layers that partition the input space.
    ``output_layer``, when present, is an affine read-out that is not
    counted.
    """

    layers: tuple[Layer, ...]
    domain: InputBox
    output_layer: Layer | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise NetworkError("network needs at least one ReLU layer")
        prev = self.domain.dim
        if prev < 1:
            raise NetworkError("input dimension must be positive")
        checked = []
        for l, layer in enumerate(list(self.layers) + (
                [self.output_layer] if self.output_layer is not None else [])):
            name = f"layer {l + 1}" if l < len(self.layers) else "output layer"
            checked.append(_check_layer(layer, prev, name))
            prev = checked[-1].width
        if self.output_layer is not None:
            object.__setattr__(self, "output_layer", checked.pop())
        object.__setattr__(self, "layers", tuple(checked))

    @property
    def input_dim(self) -> int:
        return self.domain.dim

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(layer.width for layer in self.layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def n_units(self) -> int:
        return sum(self.widths)

    def with_output_counted(self) -> "NetworkModel":
        """Treat the output layer as one more rectified layer."""
        if self.output_layer is None:
            return self
        return NetworkModel(self.layers + (self.output_layer,), self.domain, None,
                            dict(self.metadata))

    def to_dict(self) -> dict:
        out = {
            "input_dim": self.input_dim,
            "domain": {"lower": self.domain.lower.tolist(), "upper": self.domain.upper.tolist()},
            "layers": [{"weights": L.weights.tolist(), "bias": L.bias.tolist()}
                       for L in self.layers],
        }
        if self.output_layer is not None:
            out["output"] = {"weights": self.output_layer.weights.tolist(),
                             "bias": self.output_layer.bias.tolist()}
        return out


def _check_layer(layer, n_in: int, name: str) -> Layer:
    try:
        W = np.array(layer.weights, dtype=float)
        b = np.array(layer.bias, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise NetworkError(f"{name}: weights/bias are not numeric arrays ({exc})") from None
    if W.ndim != 2:
        if W.ndim == 1 and W.size == 0:
            W = W.reshape(0, n_in)
        else:
            raise DimensionMismatchError(f"{name}: weight matrix must be 2-D")
    if W.shape[0] == 0:
        raise DimensionMismatchError(f"{name}: layer has no units")
    if W.shape[1] != n_in:
        raise DimensionMismatchError(
            f"{name}: weight matrix has {W.shape[1]} columns, expected {n_in}")
    if b.size != W.shape[0]:
        raise DimensionMismatchError(
            f"{name}: bias has length {b.size}, expected {W.shape[0]}")
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
        raise NonFiniteError(f"{name}: non-finite weight or bias")
    W.flags.writeable = False
    b.flags.writeable = False
    return Layer(W, b)


def network_from_dict(data: dict, count_output_layer: bool | None = None) -> NetworkModel:
    """Build a validated network from the JSON document structure."""
    if not isinstance(data, dict):
        raise NetworkError("network document must be a JSON object")
    try:
        n0 = data["input_dim"]
        layers_raw = data["layers"]
    except KeyError as exc:
        raise NetworkError(f"missing field {exc.args[0]!r}") from None
    if not isinstance(n0, int) or isinstance(n0, bool) or n0 < 1:
        raise NetworkError("input_dim must be a positive integer")
    if not isinstance(layers_raw, list) or not layers_raw:
        raise NetworkError("layers must be a non-empty list")
    dom = data.get("domain")
    if dom is None:
        box = InputBox.unit(n0)
    else:
        try:
            box = InputBox(_finite_array(dom["lower"], "domain.lower"),
                           _finite_array(dom["upper"], "domain.upper"))
        except (KeyError, TypeError):
            raise NetworkError("domain must have 'lower' and 'upper' lists") from None
    if box.dim != n0:
        raise DimensionMismatchError(f"domain has dimension {box.dim}, expected {n0}")

    def mk(entry, name):
        if not isinstance(entry, dict) or "weights" not in entry or "bias" not in entry:
            raise NetworkError(f"{name}: needs 'weights' and 'bias'")
        return Layer(_finite_array(entry["weights"], name + ".weights"),
                     _finite_array(entry["bias"], name + ".bias"))

    layers = [mk(e, f"layer {i + 1}") for i, e in enumerate(layers_raw)]
    output = mk(data["output"], "output layer") if data.get("output") is not None else None
    if count_output_layer is None:
        count_output_layer = bool(data.get("count_output_layer", False))
    net = NetworkModel(tuple(layers), box, output)
    return net.with_output_counted() if count_output_layer else net


def _finite_array(values, name):
    try:
        arr = np.array(values, dtype=float)
    except (TypeError, ValueError):
        raise NetworkError(f"{name}: not a numeric (rectangular) array") from None
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name}: contains a non-finite value")
    return arr


def load_network(source, count_output_layer: bool | None = None) -> NetworkModel:
    """Parse a network from JSON bytes/str, a path, or an already decoded dict."""
    if isinstance(source, dict):
        return network_from_dict(source, count_output_layer)
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, str) and source.lstrip().startswith("{"):
        text = source
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        # NaN/Infinity literals are accepted by the decoder and rejected on validation
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"cannot parse network JSON: {exc}") from None
    return network_from_dict(data, count_output_layer)


def dumps_network(net: NetworkModel) -> str:
    # repr of a double round-trips exactly
    return json.dumps(net.to_dict())


def save_network(net: NetworkModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_network(net))
        fh.write("\n")


def forward(net: NetworkModel, x, check_domain: bool = True):
    """Evaluate the network at ``x``.

    Returns ``(outputs, pattern)``. ``outputs`` is the affine read-out if the
    network has one, otherwise the last rectified layer's output. A unit is
    active iff its pre-activation is strictly positive.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != net.input_dim:
        raise DimensionMismatchError(f"input has length {x.size}, expected {net.input_dim}")
    if check_domain and not net.domain.contains(x):
        raise DomainError("input lies outside the network domain")
    h = x
    bits = []
    for layer in net.layers:
        g = layer.weights @ h + layer.bias
        active = g > 0
        bits.append(tuple(active.astype(int)))
        h = np.where(active, g, 0.0)
    out = h if net.output_layer is None else net.output_layer.weights @ h + net.output_layer.bias
    return out, ActivationPattern(tuple(bits))


def forward_batch(net: NetworkModel, X) -> np.ndarray:
    """Activation bits for each row of ``X``; shape ``(n_samples, n_units)``."""
    H = np.asarray(X, dtype=float)
    cols = []
    for layer in net.layers:
        G = H @ layer.weights.T + layer.bias
        act = G > 0
        cols.append(act)
        H = np.where(act, G, 0.0)
    return np.hstack(cols).astype(np.uint8)


def maps(count) -> float:
    """Minimum activation pattern size: log2 of a region count or bound.

    Big integers are handled exactly up to float rounding of the mantissa.
    """
    if isinstance(count, bool):
        raise TypeError("count must be numeric")
    if isinstance(count, (int, np.integer)):
        count = int(count)
        if count < 1:
            raise ValueError("count must be at least 1")
        nbits = count.bit_length()
        if nbits <= 53:
            return math.log2(count)
        shift = nbits - 53
        return shift + math.log2(count >> shift)
    value = float(count)
    if not value >= 1.0:
        raise ValueError("count must be at least 1")
    return math.log2(value)


def generate_random_network(widths: Sequence[int], n0: int, seed: int = 0,
                            scale: float = 1.0, domain: InputBox | None = None) -> NetworkModel:
    """Random network with weights and biases uniform in ``[-scale, scale]``."""
    widths = [int(w) for w in widths]
    if not widths:
        raise NetworkError("widths must be non-empty")
    if any(w < 1 for w in widths) or n0 < 1:
        raise NetworkError("widths and n0 must be positive")
    rng = np.random.default_rng(seed)
    layers, prev = [], n0
    for w in widths:
        W = rng.uniform(-scale, scale, size=(w, prev))
        b = rng.uniform(-scale, scale, size=w)
        layers.append(Layer(W, b))
        prev = w
    box = domain if domain is not None else InputBox.unit(n0)
    return NetworkModel(tuple(layers), box,
                        metadata={"seed": seed, "scale": scale, "widths": widths})
