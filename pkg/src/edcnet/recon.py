"""Impulse-response synthesis from (predicted) multi-band EDCs.

Each band's EDC is differenced into a magnitude envelope, given a sticky
random polarity, interpolated to the audio rate with per-frame energy
renormalisation, and the bands are summed.
"""

import logging
import wave
from dataclasses import dataclass

import numpy as np

from . import _kernels

log = logging.getLogger(__name__)

INCREASE_TOLERANCE = 1e-9
PEAK = 0.99


@dataclass(frozen=True)
class RssConfig:
    p: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"stickiness p must be in [0, 1], got {self.p}")


def count_increases(edc, tol=INCREASE_TOLERANCE):
    return int(np.count_nonzero(np.diff(np.asarray(edc, dtype=np.float64)) > tol))


def edc_to_envelope(edc, warn=True):
    """``env[n] = sqrt(max(edc[n] - edc[n+1], 0))``; rising steps are clamped and logged."""
    edc = np.asarray(edc, dtype=np.float64)
    drops = edc[:-1] - edc[1:]
    if warn:
        n_up = int(np.count_nonzero(drops < -INCREASE_TOLERANCE))
        if n_up:
            log.warning("EDC rises at %d frame(s); clamped to zero energy", n_up)
    return np.sqrt(np.maximum(drops, 0.0))


def rss_signs(length, cfg=RssConfig()):
    """Random Sign-Sticky polarity: keep the previous sign with probability ``p``."""
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    rng = np.random.default_rng(cfg.seed)
    first = 1.0 if rng.integers(2) else -1.0
    uniforms = rng.random(length - 1)
    return _kernels.sticky_signs(first, uniforms, cfg.p)


def band_seed(seed, band):
    return int(np.random.SeedSequence([seed, band]).generate_state(1, dtype=np.uint64)[0])


def frame_bounds(n_frames, samples_per_frame):
    total = int(round(n_frames * samples_per_frame))
    return (np.arange(n_frames + 1, dtype=np.int64) * total) // n_frames


def reconstruct_bands(edcs, frame_dt, fs, cfg=RssConfig()):
    """Per-band waveforms, shape (bands, round(L * frame_dt * fs)).

    Frame ``n`` of band ``b`` carries exactly ``edc[b, n] - edc[b, n+1]``
    energy, so the downsampled Schroeder curve of each row reproduces the
    input up to its final value.
    """
    edcs = np.atleast_2d(np.asarray(edcs, dtype=np.float64))
    n_bands, L = edcs.shape
    spf = frame_dt * fs
    if spf < 1.0:
        raise ValueError(f"frame_dt * fs = {spf:.3f} < 1 sample per frame")
    bounds = frame_bounds(L, spf)
    out = np.zeros((n_bands, int(bounds[-1])))
    n_up = sum(count_increases(row) for row in edcs)
    if n_up:
        log.warning("EDC rises at %d frame(s) across %d band(s); clamped to zero energy", n_up, n_bands)
    for b in range(n_bands):
        env = np.concatenate((edc_to_envelope(edcs[b], warn=False), [0.0]))
        signs = rss_signs(L, RssConfig(cfg.p, band_seed(cfg.seed, b)))
        values = np.concatenate((signs * env, [0.0]))
        out[b] = _kernels.render_frames(values, env, bounds)
    return out


def reconstruct_rir(edcs, frame_dt, fs, cfg=RssConfig()):
    """Sum of the band waveforms, peak-normalised to 0.99."""
    rir = reconstruct_bands(edcs, frame_dt, fs, cfg).sum(axis=0)
    peak = np.abs(rir).max()
    return rir * (PEAK / peak) if peak > 0 else rir


def write_wav(path, signal, fs):
    """16-bit PCM mono WAV."""
    pcm = np.clip(np.round(np.asarray(signal) * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(fs))
        w.writeframes(pcm.tobytes())


def read_wav(path):
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1 or w.getsampwidth() != 2:
            raise ValueError(f"{path}: only 16-bit PCM mono is supported")
        fs = w.getframerate()
        data = np.frombuffer(w.readframes(w.getnframes()), dtype="<i2")
    return data.astype(np.float64) / 32767.0, fs


__all__ = [
    "RssConfig",
    "edc_to_envelope",
    "rss_signs",
    "reconstruct_bands",
    "reconstruct_rir",
    "write_wav",
    "read_wav",
    "count_increases",
]
