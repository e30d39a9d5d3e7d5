"""Vectorised NumPy versions of the hot loops.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and the same summation order, so both backends agree to rounding.
"""

import numpy as np


def splat_images(delays, amps, orders, power_table, out):
    """Add fractional-delay impulses for all image sources into ``out``.

    Parameters
    ----------
    delays : ndarray, float64, shape (M,)
        Arrival times in samples.
    amps : ndarray, float64, shape (M,)
        Spherical spreading gain ``1/d`` per image.
    orders : ndarray, int64, shape (M,)
        Reflection order per image (index into ``power_table``).
    power_table : ndarray, float64, shape (B, K+1)
        ``beta_b ** k`` for every band and order.
    out : ndarray, float64, shape (B, N)
        Accumulator, modified in place.
    """
    n_bands, n = out.shape
    i0 = np.floor(delays).astype(np.int64)
    frac = delays - i0
    keep = i0 < n
    i0, frac, amps, orders = i0[keep], frac[keep], amps[keep], orders[keep]
    i1 = i0 + 1
    tail_ok = i1 < n
    for b in range(n_bands):
        gain = amps * power_table[b, orders]
        acc = np.bincount(i0, weights=gain * (1.0 - frac), minlength=n)
        acc[: n] += np.bincount(i1[tail_ok], weights=(gain * frac)[tail_ok], minlength=n)[:n]
        out[b] += acc[:n]
    return out


def tail_energy(signal):
    sq = np.asarray(signal, dtype=np.float64) ** 2
    return np.cumsum(sq[::-1])[::-1].copy()


def sticky_signs(first, uniforms, p):
    """Markov sign chain: flip whenever ``uniforms[i] >= p``."""
    flips = (np.asarray(uniforms) >= p).astype(np.int64)
    parity = np.concatenate(([0], np.cumsum(flips)))
    return np.where(parity % 2 == 0, float(first), -float(first))


def render_frames(values, env, bounds):
    """Linearly interpolate frame values to audio rate, renormalising each frame.

    Frame ``n`` spans samples ``bounds[n]:bounds[n+1]`` and ramps from
    ``values[n]`` to ``values[n+1]``; it is then rescaled so its energy is
    exactly ``env[n] ** 2``.
    """
    values = np.asarray(values, dtype=np.float64)
    env = np.asarray(env, dtype=np.float64)
    bounds = np.asarray(bounds, dtype=np.int64)
    n_frames = env.shape[0]
    total = int(bounds[-1])
    widths = np.diff(bounds)
    frame_of = np.repeat(np.arange(n_frames), widths)
    pos = np.arange(total) - bounds[frame_of]
    t = pos / widths[frame_of]
    u = values[frame_of] + t * (values[frame_of + 1] - values[frame_of])
    energy = np.zeros(n_frames)
    np.add.at(energy, frame_of, u * u)
    scale = np.zeros(n_frames)
    nz = energy > 0.0
    scale[nz] = env[nz] / np.sqrt(energy[nz])
    return u * scale[frame_of]
