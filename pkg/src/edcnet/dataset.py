"""Dataset generation: sample rooms, simulate, extract targets, split and scale."""

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .acoustics import DEFAULT_FS, LENGTH_FACTOR, auto_max_order, simulate_band_rirs
from .edc import DEFAULT_EDC_LENGTH, rirs_to_targets
from .roomgen import DatasetManifest, featurize, fit_scaler, sample_room, split_indices, worst_case_t60
from .trainer import Batches


def dataset_signal_length(fs=DEFAULT_FS, edc_length=DEFAULT_EDC_LENGTH):
    """Shared signal length: a multiple of ``edc_length`` covering 1.5x the worst-case T60."""
    per_frame = math.ceil(LENGTH_FACTOR * worst_case_t60() * fs / edc_length)
    return per_frame * edc_length


def room_seed(seed, index):
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0])


def _simulate_one(args):
    seed, fs, edc_length, n_samples, max_order = args
    cfg = sample_room(seed)
    order = auto_max_order(cfg, n_samples, fs) if max_order is None else max_order
    rirs = simulate_band_rirs(cfg, fs=fs, max_order=order, length=n_samples)
    targets = rirs_to_targets(rirs, edc_length)
    return featurize(cfg), targets.curves, order


def generate_dataset(count, seed, edc_length=DEFAULT_EDC_LENGTH, fs=DEFAULT_FS, max_order=None,
                     workers=1, stamp=None, progress=None):
    """Build ``(manifest, features, edcs)`` as a pure function of the arguments.

    Features are unscaled float32 (count, 16); EDCs float32 (count, 24, L).
    The scaler stored in the manifest is fit on the training split only.
    """
    if count < 3:
        raise ValueError("need at least 3 rooms for train/val/test splits")
    n_samples = dataset_signal_length(fs, edc_length)
    jobs = [(room_seed(seed, i), fs, edc_length, n_samples, max_order) for i in range(count)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_simulate_one, jobs, chunksize=8))
    else:
        results = []
        for i, job in enumerate(jobs):
            results.append(_simulate_one(job))
            if progress:
                progress(i + 1, count)
    features = np.stack([r[0] for r in results]).astype(np.float32)
    edcs = np.stack([r[1] for r in results]).astype(np.float32)
    splits = split_indices(count, seed)
    if not splits["val"] or not splits["test"]:
        # tiny datasets: keep at least one room in each held-out split
        perm = np.random.default_rng(seed).permutation(count)
        splits = {"train": sorted(map(int, perm[:-2])), "val": [int(perm[-2])], "test": [int(perm[-1])]}
    train_idx = splits["train"] if len(splits["train"]) >= 2 else list(range(count))
    scaler = fit_scaler(features[train_idx].astype(np.float64))
    manifest = DatasetManifest(
        count=count,
        splits=splits,
        scaler=scaler,
        edc_length=edc_length,
        sample_rate=fs,
        signal_length=n_samples,
        seed=seed,
        max_order=max(r[2] for r in results),
        stamp=stamp or {},
    )
    return manifest, features, edcs


def split_data(manifest, features, edcs, name):
    """Scaled features and targets for one split."""
    idx = manifest.splits[name]
    x = manifest.scaler.transform(features[idx].astype(np.float64))
    return Batches(x, np.asarray(edcs[idx], dtype=np.float64))
