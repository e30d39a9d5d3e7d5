import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edcnet import BANDS_HZ
from edcnet.acoustics import (
    SPEED_OF_SOUND,
    auto_max_order,
    enumerate_images,
    eyring_t60,
    signal_length,
    simulate_band_rirs,
)
from edcnet.errors import DomainError
from edcnet.roomgen import RoomConfig, sample_room


def room(alpha=0.3, **kw):
    base = dict(length_m=4.0, width_m=5.0, height_m=3.0, source_xyz=(1.0, 1.5, 1.2),
                receiver_xyz=(3.0, 1.5, 1.2), absorption=(alpha,) * 24 if np.isscalar(alpha) else tuple(alpha))
    base.update(kw)
    return RoomConfig(**base)


def test_band_centres():
    assert BANDS_HZ[0] == 100 and BANDS_HZ[10] == 1000 and BANDS_HZ[-1] == 20000 and len(BANDS_HZ) == 24


def test_image_counts():
    assert len(enumerate_images(room(), 0)) == 1
    assert len(enumerate_images(room(), 1)) == 7
    for n in range(6):
        assert len(enumerate_images(room(), n)) == (2 * n + 1) * (2 * n * n + 2 * n + 3) // 3


def test_direct_image_is_source():
    (img,) = enumerate_images(room(), 0)
    assert img.order == 0 and img.position == (1.0, 1.5, 1.2)


def test_first_order_images_mirror_walls():
    cfg = room()
    positions = {img.position for img in enumerate_images(cfg, 1) if img.order == 1}
    want = {(-1.0, 1.5, 1.2), (7.0, 1.5, 1.2), (1.0, -1.5, 1.2), (1.0, 8.5, 1.2), (1.0, 1.5, -1.2), (1.0, 1.5, 4.8)}
    assert {tuple(round(v, 12) for v in p) for p in positions} == want


@given(st.integers(0, 6))
def test_wall_hits_sum_to_order(max_order):
    for img in enumerate_images(room(), max_order):
        assert sum(a + b for a, b in img.wall_hits) == img.order == sum(abs(n) for n in img.indices)
        assert img.order <= max_order


def test_direct_sound_split():
    cfg = room(source_xyz=(1.0, 1.0, 1.0), receiver_xyz=(3.0, 1.0, 1.0))
    rirs = simulate_band_rirs(cfg, fs=16000, max_order=0, length=200)
    delay = 2.0 / SPEED_OF_SOUND * 16000
    frac = delay - 93
    assert 93 < delay < 94
    for band in rirs.signals:
        nz = np.nonzero(band)[0]
        assert nz.tolist() == [93, 94]
        assert band[93] == pytest.approx(0.5 * (1 - frac), rel=1e-12)
        assert band[94] == pytest.approx(0.5 * frac, rel=1e-12)


def test_perfect_absorber_leaves_direct_only():
    cfg = room(alpha=1.0)
    rirs = simulate_band_rirs(cfg, max_order=5, length=2000)
    direct = simulate_band_rirs(cfg, max_order=0, length=2000)
    np.testing.assert_array_equal(rirs.signals, direct.signals)


def test_reflection_amplitude_per_order():
    cfg = room(alpha=0.36)  # amplitude factor 0.8 per hit
    one = simulate_band_rirs(cfg, max_order=1, length=4000).signals[0]
    zero = simulate_band_rirs(cfg, max_order=0, length=4000).signals[0]
    refl = one - zero
    # first-order images: sum of 0.8/d over the six mirrored positions
    r = np.array(cfg.receiver_xyz)
    ds = [np.linalg.norm(np.array(img.position) - r) for img in enumerate_images(cfg, 1) if img.order == 1]
    assert refl.sum() == pytest.approx(sum(0.8 / d for d in ds), rel=1e-12)


def test_higher_absorption_band_has_less_reverberant_energy():
    alpha = np.linspace(0.14, 0.65, 24)
    rirs = simulate_band_rirs(room(alpha=alpha), max_order=12, length=8000)
    direct = simulate_band_rirs(room(alpha=alpha), max_order=0, length=8000)
    e = np.sum((rirs.signals - direct.signals) ** 2, axis=1)
    assert np.all(np.diff(e) < 0)


@given(st.floats(0.0, 0.99), st.floats(0.0, 0.99))
def test_energy_non_increasing_in_absorption(a1, a2):
    lo, hi = sorted((a1, a2))
    e = [np.sum(simulate_band_rirs(room(alpha=a), max_order=6, length=3000).signals[0] ** 2) for a in (lo, hi)]
    assert e[1] <= e[0] * (1 + 1e-12)


def test_eyring_example():
    assert eyring_t60(room(0.3), 0) == pytest.approx(0.161 * 60 / (94 * -math.log(0.7)), rel=1e-12)
    assert eyring_t60(room(0.3), 0) == pytest.approx(0.288, abs=5e-4)


def test_eyring_limits_and_monotonicity():
    assert eyring_t60(room(1 - 1e-12), 0) < 0.01
    assert eyring_t60(room(0.2), 0) > eyring_t60(room(0.4), 0)
    for a in (0.0, 1.0, 1.5):
        with pytest.raises(DomainError):
            eyring_t60(room(a), 0)


@given(st.integers(0, 2**32 - 1))
def test_signal_covers_eyring(seed):
    cfg = sample_room(seed)
    n = signal_length(cfg)
    worst = max(eyring_t60(cfg, b) for b in range(24))
    assert n >= 1.5 * worst * 16000 and n >= 8000


def test_reciprocity():
    cfg = sample_room(7)
    swapped = RoomConfig(cfg.length_m, cfg.width_m, cfg.height_m, cfg.receiver_xyz, cfg.source_xyz,
                         cfg.absorption)
    a = simulate_band_rirs(cfg, max_order=10, length=6000).signals
    b = simulate_band_rirs(swapped, max_order=10, length=6000).signals
    assert np.max(np.abs(a - b)) < 1e-9


def test_deterministic():
    cfg = sample_room(3)
    a = simulate_band_rirs(cfg, max_order=8, length=3000).signals
    b = simulate_band_rirs(cfg, max_order=8, length=3000).signals
    assert a.tobytes() == b.tobytes()


@given(st.integers(0, 2**32 - 1))
def test_direct_sound_simultaneous_in_all_bands(seed):
    cfg = sample_room(seed)
    rirs = simulate_band_rirs(cfg, max_order=3, length=3000)
    first = {int(np.flatnonzero(s)[0]) for s in rirs.signals}
    # two-sample split: the first nonzero sample is floor(d / c * fs)
    assert first == {math.floor(cfg.distance / SPEED_OF_SOUND * 16000)}


def test_coincident_image_skipped(caplog):
    # receiver exactly on the first-order image of the source across x = 0 would be outside;
    # use the source itself as receiver to force a zero-distance direct path
    cfg = room(receiver_xyz=(1.0, 1.5, 1.2))
    with caplog.at_level(logging.WARNING):
        rirs = simulate_band_rirs(cfg, max_order=2, length=1000)
    assert rirs.skipped_images == 1
    assert "coincident" in caplog.text
    assert np.all(np.isfinite(rirs.signals))


def test_rejects_points_outside_room():
    with pytest.raises(DomainError):
        simulate_band_rirs(room(receiver_xyz=(5.0, 1.0, 1.0)), max_order=1, length=100)


def test_auto_max_order_bounded():
    cfg = sample_room(1)
    assert auto_max_order(cfg, 100) < auto_max_order(cfg, 4000) <= 30
    assert simulate_band_rirs(cfg, length=4000).max_order == auto_max_order(cfg, 4000)
