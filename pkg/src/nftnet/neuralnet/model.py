"""Conv/LSTM autoencoder: specification, parameters, forward and backward passes."""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgument, NumericalFault
from . import layers as L

__all__ = [
    "Direction",
    "ModelSpec",
    "ModelState",
    "LayerInfo",
    "layer_table",
    "count_params",
    "count_flops",
    "init_state",
    "model_forward",
    "model_backward",
    "rmse_loss",
    "spec_hash",
]


class Direction(enum.Enum):
    NFT = "nft"
    INFT = "inft"

    @classmethod
    def parse(cls, value) -> "Direction":
        if isinstance(value, Direction):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidArgument(f"unknown direction {value!r}; expected 'nft' or 'inft'") from None


@dataclass(frozen=True)
class ModelSpec:
    """Layer stack description.

    Attributes
    ----------
    direction : Direction
        NFT uses LeakyReLU after encoder convolutions and Tanh after decoder
        transposed convolutions; iNFT swaps them.
    widths : tuple of int
        Feature counts of the three encoder stages.
    length : int
        Input length; divisible by 8.
    channels : int
        Input and output feature count (real and imaginary rows).
    """

    direction: Direction = Direction.NFT
    widths: tuple = (64, 128, 256)
    length: int = 2048
    channels: int = 2

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction.parse(self.direction))
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) != 3 or min(self.widths) < 1:
            raise InvalidArgument("widths must be three positive integers")
        if self.length < 8 or self.length % 8:
            raise InvalidArgument("length must be a positive multiple of 8")

    @property
    def encoder_activation(self) -> str:
        return "leaky_relu" if self.direction is Direction.NFT else "tanh"

    @property
    def decoder_activation(self) -> str:
        return "tanh" if self.direction is Direction.NFT else "leaky_relu"

    def to_dict(self) -> dict:
        return {
            "direction": self.direction.value,
            "widths": list(self.widths),
            "length": self.length,
            "channels": self.channels,
        }

    @classmethod
    def from_dict(cls, d) -> "ModelSpec":
        return cls(Direction.parse(d["direction"]), tuple(d["widths"]), int(d["length"]), int(d.get("channels", 2)))


def spec_hash(spec: ModelSpec) -> bytes:
    """SHA-256 of the canonical JSON form of ``spec``."""
    return hashlib.sha256(json.dumps(spec.to_dict(), sort_keys=True).encode()).digest()


@dataclass(frozen=True)
class LayerInfo:
    name: str
    kind: str  # conv, convT, lstm
    n_in: int
    n_out: int
    in_length: int
    activation: str | None
    # (param name, shape) in storage order
    params: tuple = ()

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(s)) for _, s in self.params)


def layer_table(spec: ModelSpec) -> list:
    """Layers in execution order, with parameter shapes."""
    f1, f2, f3 = spec.widths
    c = spec.channels
    n = spec.length
    ea, da = spec.encoder_activation, spec.decoder_activation

    def conv(name, fi, fo, length, act):
        return LayerInfo(name, "conv", fi, fo, length, act, (("weight", (fo, fi, 3)), ("bias", (fo,))))

    def convt(name, fi, fo, length, act):
        return LayerInfo(name, "convT", fi, fo, length, act, (("weight", (fi, fo, 3)), ("bias", (fo,))))

    def lstm(name, f, length):
        return LayerInfo(
            name, "lstm", f, f, length, None,
            (("w_ih", (4 * f, f)), ("w_hh", (4 * f, f)), ("b_ih", (4 * f,)), ("b_hh", (4 * f,))),
        )

    return [
        conv("conv1", c, f1, n, ea),
        lstm("lstm1", f1, n // 2),
        conv("conv2", f1, f2, n // 2, ea),
        lstm("lstm2", f2, n // 4),
        conv("conv3", f2, f3, n // 4, ea),
        lstm("lstm3", f3, n // 8),
        convt("convT1", f3, f2, n // 8, da),
        lstm("lstm4", f2, n // 4),
        convt("convT2", f2, f1, n // 4, da),
        lstm("lstm5", f1, n // 2),
        convt("convT3", f1, c, n // 2, None),
    ]


def count_params(spec: ModelSpec | None = None) -> int:
    spec = spec or ModelSpec()
    return sum(layer.n_params for layer in layer_table(spec))


def count_flops(spec: ModelSpec | None = None) -> dict:
    """Closed-form operation counts for one forward pass.

    Convolutions are counted as ``length * 3 * F_in * F_out`` for the encoder
    and doubled for the mirrored decoder. Each LSTM costs
    ``8 F (length + F)``; the two outer pairs are doubled and the bottleneck
    counted once.
    """
    spec = spec or ModelSpec()
    f1, f2, f3 = spec.widths
    n = spec.length
    conv = (n * 3 * spec.channels * f1 + (n // 2) * 3 * f1 * f2 + (n // 4) * 3 * f2 * f3) * 2
    lstm = (8 * f1 * (n // 2 + f1) + 8 * f2 * (n // 4 + f2)) * 2 + 8 * f3 * (n // 8 + f3)
    return {"conv": conv, "lstm": lstm, "total": conv + lstm}


@dataclass
class ModelState:
    """Flat parameter vector with Adam moments.

    Attributes
    ----------
    spec : ModelSpec
    parameters, adam_m, adam_v : ndarray of float32
    step_count : int
    """

    spec: ModelSpec
    parameters: np.ndarray
    adam_m: np.ndarray
    adam_v: np.ndarray
    step_count: int = 0
    offsets: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n = count_params(self.spec)
        for name in ("parameters", "adam_m", "adam_v"):
            if getattr(self, name).shape != (n,):
                raise InvalidArgument(f"{name} must have length {n}")
        if self.step_count < 0:
            raise InvalidArgument("step_count must be non-negative")
        self.offsets = _offsets(self.spec)

    def views(self, flat=None) -> dict:
        """``{layer: {param: array view}}`` into ``flat`` (default: parameters)."""
        flat = self.parameters if flat is None else flat
        return {
            lname: {p: flat[a:b].reshape(shape) for p, (a, b, shape) in entries.items()}
            for lname, entries in self.offsets.items()
        }


def _offsets(spec):
    out = {}
    pos = 0
    for layer in layer_table(spec):
        entries = {}
        for pname, shape in layer.params:
            size = int(np.prod(shape))
            entries[pname] = (pos, pos + size, shape)
            pos += size
        out[layer.name] = entries
    return out


def init_state(spec: ModelSpec, rng: np.random.Generator) -> ModelState:
    """Uniform ``±sqrt(1/fan_in)`` initialisation from ``rng``, layer by layer.

    ``fan_in`` is ``3 * F_in`` for (transposed) convolutions and ``F`` for LSTMs.
    """
    chunks = []
    for layer in layer_table(spec):
        fan_in = 3 * layer.n_in if layer.kind in ("conv", "convT") else layer.n_in
        bound = math.sqrt(1.0 / fan_in)
        for _, shape in layer.params:
            chunks.append(rng.uniform(-bound, bound, size=int(np.prod(shape))))
    params = np.concatenate(chunks).astype(np.float32)
    z = np.zeros_like(params)
    return ModelState(spec, params, z, z.copy(), 0)


def _check_finite(a, layer, what):
    if not np.all(np.isfinite(a)):
        raise NumericalFault(f"non-finite {what} in layer {layer}")


def model_forward(spec: ModelSpec, state: ModelState, x, dtype=np.float32, keep_cache: bool = False):
    """Run the layer stack.

    Parameters
    ----------
    x : ndarray, shape (channels, length) or (batch, channels, length)
    dtype : numpy dtype
        ``float32`` for normal use; ``float64`` runs the shadow-precision pass.
    keep_cache : bool
        Return the tape needed by :func:`model_backward`.

    Raises
    ------
    NumericalFault
        If any layer produces a non-finite value.
    """
    x = np.asarray(x)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != (spec.channels, spec.length):
        raise InvalidArgument(f"expected input shape ({spec.channels}, {spec.length}), got {x.shape[-2:]}")
    _check_finite(x, "input", "input")
    h = L.to_seq(x.astype(dtype, copy=False))
    views = state.views(state.parameters.astype(dtype, copy=False))
    tape = []
    for layer in layer_table(spec):
        p = views[layer.name]
        if layer.kind == "conv":
            h, cache = L.conv_seq_forward(h, p["weight"], p["bias"])
        elif layer.kind == "convT":
            h, cache = L.convt_seq_forward(h, p["weight"], p["bias"])
        else:
            h, cache = L.lstm_seq_forward(h, p["w_ih"], p["w_hh"], p["b_ih"], p["b_hh"])
        pre = h
        if layer.activation is not None:
            h = L.activation(h, layer.activation)
        _check_finite(h, layer.name, "activation")
        if keep_cache:
            tape.append((layer, cache, pre, h))
    out = L.from_seq(h, single)
    return (out, tape) if keep_cache else out


def rmse_loss(y, target):
    """Mean over the batch of per-sample RMSE, and its gradient w.r.t. ``y``."""
    y = np.asarray(y)
    target = np.asarray(target, dtype=y.dtype)
    single = y.ndim == 2
    yb = y[None] if single else y
    tb = target[None] if single else target
    if yb.shape != tb.shape:
        raise InvalidArgument(f"output shape {y.shape} does not match target {target.shape}")
    b_ = yb.shape[0]
    m = yb[0].size
    diff = yb - tb
    per = np.sqrt(np.mean(diff.astype(np.float64) ** 2, axis=(1, 2)))
    scale = np.where(per > 0, 1.0 / (m * np.where(per > 0, per, 1.0) * b_), 0.0).astype(y.dtype)
    grad = diff * scale[:, None, None]
    return float(per.mean()), (grad[0] if single else grad)


def model_backward(spec: ModelSpec, state: ModelState, x, target, dtype=np.float32):
    """Loss and gradient of the batch-mean RMSE.

    Returns
    -------
    grad : ndarray, shape (n_params,)
        Gradient in the layout of ``state.parameters``.
    loss : float
    """
    y, tape = model_forward(spec, state, x, dtype=dtype, keep_cache=True)
    loss, dy = rmse_loss(y, target)
    dy = L.to_seq(dy)
    grad = np.zeros(state.parameters.size, dtype=dtype)
    g = state.views(grad)
    for layer, cache, pre, post in reversed(tape):
        if layer.activation is not None:
            dy = L.activation_backward(dy, pre, post, layer.activation)
        gp = g[layer.name]
        if layer.kind == "conv":
            dy, dw, db = L.conv_seq_backward(dy, cache)
            gp["weight"][...] = dw
            gp["bias"][...] = db
        elif layer.kind == "convT":
            dy, dw, db = L.convt_seq_backward(dy, cache)
            gp["weight"][...] = dw
            gp["bias"][...] = db
        else:
            dy, dwi, dwh, dbi, dbh = L.lstm_seq_backward(dy, cache)
            gp["w_ih"][...] = dwi
            gp["w_hh"][...] = dwh
            gp["b_ih"][...] = dbi
            gp["b_hh"][...] = dbh
        _check_finite(dy, layer.name, "gradient")
    _check_finite(grad, "parameters", "gradient")
    return grad, loss
