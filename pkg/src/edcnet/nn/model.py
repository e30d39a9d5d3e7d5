"""MLP encoder + 1D-conv/interpolation decoder producing (bands, L) EDCs."""

import json
import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import (
    FormatError,
    NumericalError,
    ShapeMismatchError,
    TruncatedFileError,
    VersionError,
)
from . import layers

CKPT_MAGIC = b"EDCCKPT1"
CKPT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    n_features: int = 16
    hidden: tuple = (256, 512)
    channels: tuple = (64, 64, 32)
    n_bands: int = 24
    latent_length: int = 125
    edc_length: int = 1000
    kernel_size: int = 5
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if len(self.channels) != 3:
            raise ValueError(f"decoder has three conv layers; got channel plan {self.channels}")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        lengths = self.lengths
        if min(lengths) < 2 or any(b < a for a, b in zip(lengths, lengths[1:])):
            raise ValueError(f"length schedule {lengths} must be non-decreasing and >= 2")

    @property
    def lengths(self):
        """Sequence length seen by conv layers 0, 1, 2 and the final output."""
        L = self.edc_length
        return (self.latent_length, L // 4, L // 2, L)

    @property
    def latent_size(self):
        return self.channels[0] * self.latent_length

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


PRESETS = {
    "tiny": ModelConfig(hidden=(128,), channels=(32, 32, 16), latent_length=10, edc_length=40),
    "desk": ModelConfig(),
    "paper9m": ModelConfig(hidden=(256, 544), channels=(128, 128, 64), latent_length=125),
}


def preset(name, **overrides):
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides)


def param_shapes(cfg):
    """Ordered ``{name: shape}`` in declaration (and checkpoint) order."""
    shapes = {}
    widths = (cfg.n_features,) + cfg.hidden + (cfg.latent_size,)
    for i, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
        shapes[f"encoder.{i}.weight"] = (fan_out, fan_in)
        shapes[f"encoder.{i}.bias"] = (fan_out,)
    chans = cfg.channels + (cfg.n_bands,)
    for i, (cin, cout) in enumerate(zip(chans, chans[1:])):
        shapes[f"decoder.{i}.kernel"] = (cout, cin, cfg.kernel_size)
        shapes[f"decoder.{i}.bias"] = (cout,)
    return shapes


def init_params(cfg):
    """Glorot-uniform weights, zero biases, from ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith("bias"):
            params[name] = np.zeros(shape, dtype=cfg.dtype)
            continue
        if len(shape) == 2:
            fan_out, fan_in = shape
        else:
            fan_out, fan_in = shape[0] * shape[2], shape[1] * shape[2]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params[name] = rng.uniform(-limit, limit, size=shape).astype(cfg.dtype)
    return params


def count_params(cfg):
    return int(sum(np.prod(s) for s in param_shapes(cfg).values()))


def _check(name, arr):
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite activation after {name}")


@dataclass
class Model:
    config: ModelConfig
    params: dict = field(default=None)

    def __post_init__(self):
        if self.params is None:
            self.params = init_params(self.config)
        shapes = param_shapes(self.config)
        if list(self.params) != list(shapes):
            raise ShapeMismatchError(f"parameter names {list(self.params)} != {list(shapes)}")
        for name, shape in shapes.items():
            if self.params[name].shape != shape:
                raise ShapeMismatchError(f"{name}: shape {self.params[name].shape} != {shape}")
        self._cache = None

    @property
    def n_encoder(self):
        return len(self.config.hidden) + 1

    def count_params(self):
        return count_params(self.config)

    def forward(self, features):
        """Map (16,) or (B, 16) scaled features to (24, L) or (B, 24, L) EDCs in (0, 1)."""
        cfg, p = self.config, self.params
        x = np.asarray(features, dtype=cfg.dtype)
        single = x.ndim == 1
        if single:
            x = x[None]
        if x.shape[-1] != cfg.n_features:
            raise ShapeMismatchError(f"expected {cfg.n_features} features, got {x.shape[-1]}")
        cache = {"enc_in": [], "enc_pre": [], "conv_in": [], "conv_pre": []}
        h = x
        for i in range(self.n_encoder):
            cache["enc_in"].append(h)
            z = layers.dense_forward(h, p[f"encoder.{i}.weight"], p[f"encoder.{i}.bias"])
            _check(f"encoder.{i}", z)
            cache["enc_pre"].append(z)
            h = layers.relu(z) if i < self.n_encoder - 1 else z
        h = h.reshape(x.shape[0], cfg.channels[0], cfg.latent_length)
        lengths = cfg.lengths
        for i in range(3):
            cache["conv_in"].append(h)
            z = layers.conv1d_forward(h, p[f"decoder.{i}.kernel"], p[f"decoder.{i}.bias"])
            _check(f"decoder.{i}", z)
            cache["conv_pre"].append(z)
            if i < 2:
                z = layers.relu(z)
            h = layers.interp_upsample(z, lengths[i + 1])
        y = layers.sigmoid(h)
        _check("output", y)
        cache["y"] = y
        cache["single"] = single
        self._cache = cache
        return y[0] if single else y

    def backward(self, grad_out):
        """Gradients of a scalar loss w.r.t. every parameter, given dLoss/dOutput."""
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        cfg, p, cache = self.config, self.params, self._cache
        g = np.asarray(grad_out, dtype=cfg.dtype)
        if cache["single"]:
            g = g[None]
        grads = {}
        g = layers.sigmoid_backward(cache["y"], g)
        lengths = cfg.lengths
        for i in reversed(range(3)):
            g = layers.interp_backward(g, lengths[i])
            if i < 2:
                g = layers.relu_backward(cache["conv_pre"][i], g)
            g, gK, gb = layers.conv1d_backward(cache["conv_in"][i], p[f"decoder.{i}.kernel"], g)
            grads[f"decoder.{i}.kernel"] = gK
            grads[f"decoder.{i}.bias"] = gb
        g = g.reshape(g.shape[0], -1)
        for i in reversed(range(self.n_encoder)):
            if i < self.n_encoder - 1:
                g = layers.relu_backward(cache["enc_pre"][i], g)
            g, gW, gb = layers.dense_backward(cache["enc_in"][i], p[f"encoder.{i}.weight"], g)
            grads[f"encoder.{i}.weight"] = gW
            grads[f"encoder.{i}.bias"] = gb
        return {name: grads[name] for name in p}


def write_checkpoint(path, header, arrays):
    """Magic, uint64 header length, JSON header, then float32 blobs in ``arrays`` order."""
    header = dict(header)
    header["format_version"] = CKPT_VERSION
    header["arrays"] = [{"name": k, "shape": list(v.shape)} for k, v in arrays.items()]
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v, dtype="<f4").tobytes())


def read_checkpoint(path):
    raw = Path(path).read_bytes()
    if raw[:8] != CKPT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic {raw[:8]!r})")
    if len(raw) < 16:
        raise TruncatedFileError(f"{path}: header length missing")
    (n,) = struct.unpack_from("<Q", raw, 8)
    if len(raw) < 16 + n:
        raise TruncatedFileError(f"{path}: header truncated")
    try:
        header = json.loads(raw[16:16 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt header: {exc}") from exc
    if header.get("format_version") != CKPT_VERSION:
        raise VersionError(f"{path}: checkpoint version {header.get('format_version')!r}")
    arrays = {}
    offset = 16 + n
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        size = 4 * int(np.prod(shape))
        if offset + size > len(raw):
            raise TruncatedFileError(f"{path}: blob {entry['name']} truncated")
        arrays[entry["name"]] = np.frombuffer(raw, dtype="<f4", count=size // 4, offset=offset).reshape(shape).copy()
        offset += size
    if offset != len(raw):
        raise FormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return header, arrays


def save_params(model, path, extra=None, arrays=None):
    header = {"config": model.config.to_dict(), "seed": model.config.seed, "extra": extra or {}}
    blobs = {f"param/{k}": v for k, v in model.params.items()}
    if arrays:
        blobs.update(arrays)
    write_checkpoint(path, header, blobs)


def load_params(path, with_extras=False):
    header, arrays = read_checkpoint(path)
    cfg = ModelConfig.from_dict(header["config"])
    shapes = param_shapes(cfg)
    params = {}
    for name, shape in shapes.items():
        key = f"param/{name}"
        if key not in arrays:
            raise ShapeMismatchError(f"{path}: missing parameter {name}")
        if arrays[key].shape != shape:
            raise ShapeMismatchError(f"{path}: {name} has shape {arrays[key].shape}, config needs {shape}")
        params[name] = arrays[key].astype(cfg.dtype)
    model = Model(cfg, params)
    if with_extras:
        rest = {k: v for k, v in arrays.items() if not k.startswith("param/")}
        return model, header.get("extra", {}), rest
    return model
