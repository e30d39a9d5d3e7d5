"""Random shoebox rooms, their 16-value feature vectors, MinMax scaling and
the on-disk dataset layout."""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import BANDS_HZ, N_BANDS
from .binio import read_array, write_array
from .errors import (
    DomainError,
    FormatError,
    ManifestError,
    RoomGenerationError,
    ShapeMismatchError,
    VersionError,
)

log = logging.getLogger(__name__)

LENGTH_RANGE = (3.0, 6.0)
WIDTH_RANGE = (3.0, 6.0)
HEIGHT_RANGE = (2.5, 4.0)
DISTANCE_RANGE = (1.0, 4.0)
ABSORPTION_RANGE = (0.14, 0.65)
WALL_CLEARANCE = 0.3
MAX_PLACEMENT_ATTEMPTS = 10000

N_FEATURES = 16
N_ABSORPTION_GROUPS = 6
FEATURE_NAMES = (
    "length", "width", "height",
    "source_x", "source_y", "source_z",
    "receiver_x", "receiver_y", "receiver_z",
    "source_receiver_distance",
) + tuple(f"absorption_group_{g}" for g in range(1, N_ABSORPTION_GROUPS + 1))

SCALED_CLAMP = (-0.5, 1.5)
FORMAT_VERSION = 1


@dataclass(frozen=True)
class RoomConfig:
    length_m: float
    width_m: float
    height_m: float
    source_xyz: tuple
    receiver_xyz: tuple
    absorption: tuple
    seed: int = 0

    @property
    def dims(self):
        return np.array([self.length_m, self.width_m, self.height_m])

    @property
    def distance(self):
        return float(np.linalg.norm(np.subtract(self.source_xyz, self.receiver_xyz)))

    def validate(self):
        """Raise :class:`DomainError` unless every dataset invariant holds."""
        for name, value, (lo, hi) in (
            ("length_m", self.length_m, LENGTH_RANGE),
            ("width_m", self.width_m, WIDTH_RANGE),
            ("height_m", self.height_m, HEIGHT_RANGE),
        ):
            if not lo <= value <= hi:
                raise DomainError(f"{name}={value} outside [{lo}, {hi}]")
        if len(self.absorption) != N_BANDS:
            raise DomainError(f"expected {N_BANDS} absorption coefficients, got {len(self.absorption)}")
        a = np.asarray(self.absorption)
        if a.min() < ABSORPTION_RANGE[0] or a.max() > ABSORPTION_RANGE[1]:
            raise DomainError(f"absorption outside {ABSORPTION_RANGE}: [{a.min()}, {a.max()}]")
        dims = self.dims
        for name, p in (("source", self.source_xyz), ("receiver", self.receiver_xyz)):
            p = np.asarray(p)
            if np.any(p < WALL_CLEARANCE) or np.any(p > dims - WALL_CLEARANCE):
                raise DomainError(f"{name} {tuple(p)} closer than {WALL_CLEARANCE} m to a wall")
        d = self.distance
        if not DISTANCE_RANGE[0] <= d <= DISTANCE_RANGE[1]:
            raise DomainError(f"source-receiver distance {d:.3f} m outside {DISTANCE_RANGE}")

    def to_dict(self):
        d = asdict(self)
        d["source_xyz"] = list(self.source_xyz)
        d["receiver_xyz"] = list(self.receiver_xyz)
        d["absorption"] = list(self.absorption)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            length_m=float(d["length_m"]),
            width_m=float(d["width_m"]),
            height_m=float(d["height_m"]),
            source_xyz=tuple(float(v) for v in d["source_xyz"]),
            receiver_xyz=tuple(float(v) for v in d["receiver_xyz"]),
            absorption=tuple(float(v) for v in d["absorption"]),
            seed=int(d.get("seed", 0)),
        )


def _place_pair(rng, dims, distance_range=DISTANCE_RANGE, clearance=WALL_CLEARANCE,
                max_attempts=MAX_PLACEMENT_ATTEMPTS):
    lo = np.full(3, clearance)
    hi = np.asarray(dims) - clearance
    if np.any(hi <= lo):
        raise RoomGenerationError(f"room {tuple(dims)} too small for {clearance} m clearance")
    for _ in range(max_attempts):
        src = rng.uniform(lo, hi)
        rcv = rng.uniform(lo, hi)
        d = np.linalg.norm(src - rcv)
        if distance_range[0] <= d <= distance_range[1]:
            return src, rcv
    raise RoomGenerationError(
        f"no source/receiver pair with distance in {distance_range} after {max_attempts} attempts"
    )


def _smooth_absorption(raw):
    padded = np.concatenate(([raw[0]], raw, [raw[-1]]))
    smooth = (padded[:-2] + padded[1:-1] + padded[2:]) / 3.0
    return np.clip(smooth, *ABSORPTION_RANGE)


def sample_room(rng_seed):
    """Draw one room configuration; a pure function of ``rng_seed``."""
    rng = np.random.default_rng(rng_seed)
    dims = np.array([
        rng.uniform(*LENGTH_RANGE),
        rng.uniform(*WIDTH_RANGE),
        rng.uniform(*HEIGHT_RANGE),
    ])
    absorption = _smooth_absorption(rng.uniform(*ABSORPTION_RANGE, size=N_BANDS))
    src, rcv = _place_pair(rng, dims)
    cfg = RoomConfig(
        length_m=float(dims[0]),
        width_m=float(dims[1]),
        height_m=float(dims[2]),
        source_xyz=tuple(float(v) for v in src),
        receiver_xyz=tuple(float(v) for v in rcv),
        absorption=tuple(float(v) for v in absorption),
        seed=int(rng_seed),
    )
    cfg.validate()
    return cfg


def featurize(cfg):
    """Feature vector in :data:`FEATURE_NAMES` order (unscaled)."""
    a = np.asarray(cfg.absorption, dtype=np.float64)
    groups = a.reshape(N_ABSORPTION_GROUPS, N_BANDS // N_ABSORPTION_GROUPS).mean(axis=1)
    return np.concatenate((
        cfg.dims,
        np.asarray(cfg.source_xyz, dtype=np.float64),
        np.asarray(cfg.receiver_xyz, dtype=np.float64),
        [cfg.distance],
        groups,
    ))


@dataclass
class MinMaxScaler:
    minimum: np.ndarray
    maximum: np.ndarray

    @property
    def span(self):
        return self.maximum - self.minimum

    def transform(self, x, clamp=True):
        """Scale to [0, 1] on the fitted range; constant features map to 0.

        Values falling outside ``SCALED_CLAMP`` after scaling are clamped and
        the count is logged.
        """
        x = np.asarray(x, dtype=np.float64)
        span = self.span
        safe = np.where(span > 0, span, 1.0)
        out = np.where(span > 0, (x - self.minimum) / safe, 0.0)
        if clamp:
            lo, hi = SCALED_CLAMP
            n_out = int(np.count_nonzero((out < lo) | (out > hi)))
            if n_out:
                log.warning("clamped %d scaled feature values to [%g, %g]", n_out, lo, hi)
            out = np.clip(out, lo, hi)
        return out

    def inverse_transform(self, x_scaled):
        return np.asarray(x_scaled, dtype=np.float64) * self.span + self.minimum

    def to_dict(self):
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["min"], dtype=np.float64), np.asarray(d["max"], dtype=np.float64))


def fit_scaler(features):
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need at least 2 feature vectors to fit a scaler, got shape {x.shape}")
    return MinMaxScaler(x.min(axis=0), x.max(axis=0))


def split_indices(count, seed, fractions=(0.8, 0.1, 0.1)):
    """Seeded shuffle, then contiguous train/val/test blocks."""
    perm = np.random.default_rng(seed).permutation(count)
    n_train = int(round(fractions[0] * count))
    n_val = int(round(fractions[1] * count))
    return {
        "train": sorted(int(i) for i in perm[:n_train]),
        "val": sorted(int(i) for i in perm[n_train:n_train + n_val]),
        "test": sorted(int(i) for i in perm[n_train + n_val:]),
    }


@dataclass
class DatasetManifest:
    count: int
    splits: dict
    scaler: MinMaxScaler
    edc_length: int
    sample_rate: int
    signal_length: int
    seed: int
    max_order: int
    bands: tuple = BANDS_HZ
    feature_names: tuple = FEATURE_NAMES
    format_version: int = FORMAT_VERSION
    stamp: dict = field(default_factory=dict)

    @property
    def frame_dt(self):
        return self.signal_length / (self.sample_rate * self.edc_length)

    def validate(self):
        seen = set()
        for name in ("train", "val", "test"):
            idx = self.splits.get(name)
            if idx is None:
                raise ManifestError(f"missing split {name!r}")
            overlap = seen.intersection(idx)
            if overlap or len(set(idx)) != len(idx):
                raise ManifestError(f"split {name!r} overlaps another split at {sorted(overlap)[:5]}")
            seen.update(idx)
        if seen != set(range(self.count)):
            raise ManifestError(f"splits cover {len(seen)} indices, expected exactly 0..{self.count - 1}")
        if len(self.bands) != N_BANDS:
            raise ManifestError(f"expected {N_BANDS} bands, got {len(self.bands)}")
        if self.scaler.minimum.shape != (N_FEATURES,) or self.scaler.maximum.shape != (N_FEATURES,):
            raise ManifestError("scaler must hold 16 minima and maxima")

    def to_dict(self):
        return {
            "format_version": self.format_version,
            "count": self.count,
            "seed": self.seed,
            "edc_length": self.edc_length,
            "sample_rate": self.sample_rate,
            "signal_length": self.signal_length,
            "frame_dt": self.frame_dt,
            "max_order": self.max_order,
            "bands": list(self.bands),
            "feature_names": list(self.feature_names),
            "splits": {k: list(v) for k, v in self.splits.items()},
            "scaler": self.scaler.to_dict(),
            "stamp": self.stamp,
        }

    @classmethod
    def from_dict(cls, d):
        version = d.get("format_version")
        if version != FORMAT_VERSION:
            raise VersionError(f"dataset format version {version!r}, expected {FORMAT_VERSION}")
        try:
            return cls(
                count=int(d["count"]),
                splits={k: [int(i) for i in v] for k, v in d["splits"].items()},
                scaler=MinMaxScaler.from_dict(d["scaler"]),
                edc_length=int(d["edc_length"]),
                sample_rate=int(d["sample_rate"]),
                signal_length=int(d["signal_length"]),
                seed=int(d["seed"]),
                max_order=int(d["max_order"]),
                bands=tuple(float(b) for b in d["bands"]),
                feature_names=tuple(d["feature_names"]),
                format_version=version,
                stamp=dict(d.get("stamp", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed manifest: {exc}") from exc


def write_dataset(manifest, features, edcs, path):
    path = Path(path)
    features = np.asarray(features, dtype=np.float32)
    edcs = np.asarray(edcs, dtype=np.float32)
    if features.shape != (manifest.count, N_FEATURES):
        raise ShapeMismatchError(f"features {features.shape} != ({manifest.count}, {N_FEATURES})")
    if edcs.shape != (manifest.count, N_BANDS, manifest.edc_length):
        raise ShapeMismatchError(
            f"edcs {edcs.shape} != ({manifest.count}, {N_BANDS}, {manifest.edc_length})"
        )
    manifest.validate()
    path.mkdir(parents=True, exist_ok=True)
    (path / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2), encoding="utf-8")
    write_array(path / "features.bin", features)
    write_array(path / "edcs.bin", edcs)


def read_dataset(path):
    """Load ``(manifest, features, edcs)``; features are unscaled float32."""
    path = Path(path)
    try:
        raw = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path / 'manifest.json'}: {exc}") from exc
    manifest = DatasetManifest.from_dict(raw)
    manifest.validate()
    features = read_array(path / "features.bin", (1, manifest.count, N_FEATURES))[0]
    edcs = read_array(path / "edcs.bin", (manifest.count, N_BANDS, manifest.edc_length))
    return manifest, features, edcs


def worst_case_t60():
    """Largest Eyring T60 reachable inside the sampling ranges."""
    L, W, H = LENGTH_RANGE[1], WIDTH_RANGE[1], HEIGHT_RANGE[1]
    volume = L * W * H
    surface = 2.0 * (L * W + L * H + W * H)
    return 0.161 * volume / (-surface * math.log1p(-ABSORPTION_RANGE[0]))
