"""Energy decay curves and the room-acoustic parameters derived from them."""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import N_BANDS
from . import _kernels
from .errors import DegenerateFitError, DomainError

DEFAULT_EPSILON = 1e-10
DEFAULT_EDC_LENGTH = 1000
C50_WINDOW_S = 0.050
C50_CLAMP_DB = 50.0
ONSET_FRACTION = 0.01

# (upper dB, lower dB, extrapolation factor to 60 dB)
DECAY_RANGES = {
    "edt": (0.0, -10.0, 6.0),
    "t20": (-5.0, -25.0, 3.0),
    "t30": (-5.0, -35.0, 2.0),
}


def schroeder(signal):
    """Backward-integrated energy of ``signal``, normalised to start at 1.

    Parameters
    ----------
    signal : array_like
        Impulse response samples.

    Returns
    -------
    ndarray
        ``out[n] = sum(signal[n:] ** 2) / sum(signal ** 2)``.
    """
    s = np.asarray(signal, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise DomainError("schroeder needs a nonempty 1-D signal")
    tail = _kernels.tail_energy(np.ascontiguousarray(s))
    if not tail[0] > 0.0:
        raise DomainError("signal has zero energy")
    return tail / tail[0]


def downsample_edc(edc, length):
    edc = np.asarray(edc)
    if length < 2:
        raise ValueError(f"target length must be >= 2, got {length}")
    n = edc.shape[-1]
    if n < length:
        raise ValueError(f"cannot downsample {n} samples to {length}")
    idx = (np.arange(length, dtype=np.int64) * n) // length
    return edc[..., idx]


def to_db(y, epsilon=DEFAULT_EPSILON):
    y = np.asarray(y)
    if np.any(y < 0):
        raise DomainError("energy values must be non-negative")
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    return 10.0 * np.log10(y + epsilon)


def _first_at_or_below(curve, level):
    hits = np.nonzero(curve <= level)[0]
    return int(hits[0]) if hits.size else None


def decay_time(edc_db, frame_dt, hi, lo, scale):
    """Reverberation time from a least-squares line over ``[hi, lo]`` dB.

    The line is fitted between the first samples at or below ``hi`` and
    ``lo``; the result is ``scale`` times the time the fitted line needs to
    fall ``hi - lo`` dB. Returns NaN when the curve never reaches ``lo``.
    """
    if not hi > lo:
        raise ValueError(f"hi ({hi}) must exceed lo ({lo})")
    curve = np.asarray(edc_db, dtype=np.float64)
    i_lo = _first_at_or_below(curve, lo)
    if i_lo is None:
        return math.nan
    i_hi = _first_at_or_below(curve, hi)
    if i_lo - i_hi < 1:
        # range collapsed into one sample; slope undefined
        raise DegenerateFitError(f"decay from {hi} to {lo} dB spans a single sample")
    seg = curve[i_hi:i_lo + 1]
    t = np.arange(i_hi, i_lo + 1, dtype=np.float64) * frame_dt
    tc = t - t.mean()
    slope = float(np.dot(tc, seg - seg.mean()) / np.dot(tc, tc))
    if not slope < 0.0:
        raise DegenerateFitError(f"non-negative decay slope {slope} dB/s")
    return scale * (hi - lo) / -slope


class Clarity(NamedTuple):
    db: float
    clamped: bool


def clarity_c50(signal, fs):
    """Early-to-late energy ratio around 50 ms after the direct-sound onset."""
    s = np.asarray(signal, dtype=np.float64)
    window = int(round(C50_WINDOW_S * fs))
    if s.size <= window:
        raise DomainError(f"signal of {s.size} samples is not longer than 50 ms ({window} samples)")
    mag = np.abs(s)
    peak = mag.max()
    if peak == 0.0:
        raise DomainError("signal is silent")
    onset = int(np.argmax(mag >= ONSET_FRACTION * peak))
    sq = s * s
    early = float(sq[onset:onset + window].sum())
    late = float(sq[onset + window:].sum())
    if late <= 0.0:
        return Clarity(C50_CLAMP_DB, True)
    if early <= 0.0:
        return Clarity(-C50_CLAMP_DB, True)
    value = 10.0 * math.log10(early / late)
    if abs(value) > C50_CLAMP_DB:
        return Clarity(math.copysign(C50_CLAMP_DB, value), True)
    return Clarity(value, False)


@dataclass
class EdcMatrix:
    curves: np.ndarray
    frame_dt: float

    @property
    def length(self):
        return self.curves.shape[-1]


def rirs_to_targets(rirs, length=DEFAULT_EDC_LENGTH):
    curves = np.stack([downsample_edc(schroeder(sig), length) for sig in rirs.signals])
    return EdcMatrix(curves=curves, frame_dt=rirs.length / (rirs.sample_rate * length))


@dataclass
class AcousticParams:
    """Per-band parameters; NaN entries are flagged as out of decay range."""

    edt_s: np.ndarray
    t20_s: np.ndarray
    t30_s: np.ndarray
    c50_db: np.ndarray

    @property
    def flags(self):
        return {
            "edt": np.isnan(self.edt_s),
            "t20": np.isnan(self.t20_s),
            "t30": np.isnan(self.t30_s),
            "c50": np.isnan(self.c50_db),
        }

    def to_dict(self):
        def clean(a):
            return [None if not np.isfinite(v) else float(v) for v in a]

        return {
            "edt_s": clean(self.edt_s),
            "t20_s": clean(self.t20_s),
            "t30_s": clean(self.t30_s),
            "c50_db": clean(self.c50_db),
            "insufficient_range": {k: [bool(v) for v in f] for k, f in self.flags.items()},
        }


def safe_decay_time(edc_db, frame_dt, name):
    hi, lo, scale = DECAY_RANGES[name]
    try:
        return decay_time(edc_db, frame_dt, hi, lo, scale)
    except DegenerateFitError:
        return math.nan


def decay_times(curves, frame_dt, epsilon=DEFAULT_EPSILON):
    """EDT, T20, T30 for every row of a (..., L) stack of linear EDCs."""
    curves = np.asarray(curves, dtype=np.float64)
    db = to_db(np.maximum(curves, 0.0), epsilon)
    flat = db.reshape(-1, db.shape[-1])
    out = {}
    for name in DECAY_RANGES:
        vals = np.array([safe_decay_time(row, frame_dt, name) for row in flat])
        out[name] = vals.reshape(db.shape[:-1])
    return out


def analyze_bands(signals, fs, epsilon=DEFAULT_EPSILON):
    """Acoustic parameters for each row of a (bands, N) signal matrix."""
    signals = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    edcs = np.stack([schroeder(s) for s in signals])
    times = decay_times(edcs, 1.0 / fs, epsilon)
    c50 = np.array([clarity_c50(s, fs).db for s in signals])
    return AcousticParams(times["edt"], times["t20"], times["t30"], c50)


__all__ = [
    "N_BANDS",
    "schroeder",
    "downsample_edc",
    "to_db",
    "decay_time",
    "clarity_c50",
    "rirs_to_targets",
    "decay_times",
    "analyze_bands",
    "EdcMatrix",
    "AcousticParams",
    "Clarity",
]
