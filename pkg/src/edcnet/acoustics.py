"""Per-band shoebox image-source simulation."""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import BANDS_HZ, N_BANDS
from . import _kernels
from .errors import DomainError

log = logging.getLogger(__name__)

SPEED_OF_SOUND = 343.0
DEFAULT_FS = 16000
DEFAULT_MAX_ORDER = 30
MIN_DURATION_S = 0.5
LENGTH_FACTOR = 1.5
COINCIDENT_DISTANCE = 1e-6


@dataclass(frozen=True)
class ImageSource:
    indices: tuple
    position: tuple
    # (hits on the wall at 0, hits on the opposite wall) for x, y, z
    wall_hits: tuple
    order: int


@dataclass
class BandRirSet:
    sample_rate: int
    signals: np.ndarray
    max_order: int
    bands: tuple = BANDS_HZ
    skipped_images: int = 0

    @property
    def length(self):
        return self.signals.shape[1]


@lru_cache(maxsize=8)
def _lattice(max_order):
    """All lattice offsets with |nx|+|ny|+|nz| <= max_order, sorted by order."""
    k = np.arange(-max_order, max_order + 1)
    n = np.stack(np.meshgrid(k, k, k, indexing="ij"), axis=-1).reshape(-1, 3)
    order = np.abs(n).sum(axis=1)
    keep = order <= max_order
    n, order = n[keep], order[keep]
    idx = np.lexsort((n[:, 2], n[:, 1], n[:, 0], order))
    n, order = n[idx], order[idx]
    n.flags.writeable = False
    order.flags.writeable = False
    return n, order


def _image_positions(n, dims, source):
    dims = np.asarray(dims, dtype=np.float64)
    source = np.asarray(source, dtype=np.float64)
    return n * dims + np.where(n % 2 == 0, source, dims - source)


def _axis_hits(n):
    m = abs(n)
    near, far = m // 2, m - m // 2
    # the first wall crossed is the one the image lies beyond
    return (near, far) if n > 0 else (far, near)


def enumerate_images(cfg, max_order):
    if max_order < 0:
        raise ValueError(f"max_order must be >= 0, got {max_order}")
    n, order = _lattice(max_order)
    pos = _image_positions(n, cfg.dims, cfg.source_xyz)
    return [
        ImageSource(
            indices=tuple(int(v) for v in ni),
            position=tuple(float(v) for v in p),
            wall_hits=tuple(_axis_hits(int(v)) for v in ni),
            order=int(o),
        )
        for ni, p, o in zip(n, pos, order)
    ]


def eyring_t60(cfg, band):
    alpha = float(cfg.absorption[band])
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"Eyring T60 needs 0 < alpha < 1, band {band} has alpha={alpha}")
    L, W, H = cfg.length_m, cfg.width_m, cfg.height_m
    volume = L * W * H
    surface = 2.0 * (L * W + L * H + W * H)
    return 0.161 * volume / (-surface * math.log1p(-alpha))


def signal_length(cfg, fs=DEFAULT_FS):
    """Samples needed to cover 1.5x the slowest band's Eyring T60 (at least 0.5 s)."""
    t60 = 0.0
    for b in range(N_BANDS):
        alpha = cfg.absorption[b]
        if alpha >= 1.0:
            continue
        t60 = max(t60, eyring_t60(cfg, b))
    return max(math.ceil(LENGTH_FACTOR * t60 * fs), math.ceil(MIN_DURATION_S * fs))


def auto_max_order(cfg, n_samples, fs=DEFAULT_FS, cap=DEFAULT_MAX_ORDER):
    """Smaller of ``cap`` and the first order whose nearest image arrives after the signal ends."""
    n, order = _lattice(cap)
    pos = _image_positions(n, cfg.dims, cfg.source_xyz)
    dist = np.linalg.norm(pos - np.asarray(cfg.receiver_xyz), axis=1)
    horizon = SPEED_OF_SOUND * n_samples / fs
    nearest = np.full(cap + 1, np.inf)
    np.minimum.at(nearest, order, dist)
    beyond = np.nonzero(nearest > horizon)[0]
    return int(beyond[0]) if beyond.size else cap


def simulate_band_rirs(cfg, fs=DEFAULT_FS, max_order=None, length=None):
    """Band-wise image-source impulse responses for one room.

    Each image contributes ``(1/d) * sqrt(1 - alpha_b) ** order`` at delay
    ``d / c``, split linearly over the two neighbouring samples.
    """
    alpha = np.asarray(cfg.absorption, dtype=np.float64)
    if alpha.shape != (N_BANDS,) or np.any(alpha < 0.0) or np.any(alpha > 1.0):
        raise DomainError("absorption must be 24 values in [0, 1]")
    dims = cfg.dims
    for name, p in (("source", cfg.source_xyz), ("receiver", cfg.receiver_xyz)):
        p = np.asarray(p)
        if np.any(p <= 0.0) or np.any(p >= dims):
            raise DomainError(f"{name} {tuple(p)} is not strictly inside the room")
    n_samples = signal_length(cfg, fs) if length is None else int(length)
    if max_order is None:
        max_order = auto_max_order(cfg, n_samples, fs)

    n, order = _lattice(max_order)
    pos = _image_positions(n, dims, cfg.source_xyz)
    dist = np.linalg.norm(pos - np.asarray(cfg.receiver_xyz), axis=1)
    coincident = dist < COINCIDENT_DISTANCE
    skipped = int(np.count_nonzero(coincident))
    if skipped:
        log.warning("skipped %d image(s) coincident with the receiver", skipped)
        dist, order = dist[~coincident], order[~coincident]

    delays = np.ascontiguousarray(dist / SPEED_OF_SOUND * fs)
    amps = np.ascontiguousarray(1.0 / dist)
    beta = np.sqrt(1.0 - alpha)
    power_table = np.ascontiguousarray(np.power(beta[:, None], np.arange(max_order + 1)[None, :]))
    signals = np.zeros((N_BANDS, n_samples))
    _kernels.splat_images(delays, amps, np.ascontiguousarray(order, dtype=np.int64), power_table, signals)
    return BandRirSet(sample_rate=int(fs), signals=signals, max_order=int(max_order),
                      skipped_images=skipped)
