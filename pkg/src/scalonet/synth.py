"""Synthetic three-class ECG-like dataset for end-to-end validation.

Each class is a band-limited sinusoid mixture around a class-specific
center frequency (3, 10, or 25 Hz for ARR, NSR, CHF) plus white noise,
sampled at 128 Hz. The classes carry distinct time-frequency
signatures, so a correct pipeline separates them cleanly.
"""
from __future__ import annotations

import os

import numpy as np

from scalonet.dataset import CLASS_NAMES
from scalonet.util import stream_rng

CLASS_FREQS = {"ARR": 3.0, "NSR": 10.0, "CHF": 25.0}
BANDWIDTH_HZ = 1.5
N_COMPONENTS = 5


def synth_record(center_freq, length, fs, noise, rng) -> np.ndarray:
    t = np.arange(length) / fs
    offsets = np.linspace(-BANDWIDTH_HZ, BANDWIDTH_HZ, N_COMPONENTS)
    x = np.zeros(length)
    for off in offsets:
        phase = rng.uniform(0.0, 2.0 * np.pi)
        x += np.sin(2.0 * np.pi * (center_freq + off) * t + phase) / N_COMPONENTS
    x += noise * rng.standard_normal(length)
    return x


def generate_synthetic_dataset(root, per_class=20, length=65536, fs=128.0,
                               noise=0.3, seed=0) -> list:
    """Write per_class raw float64 records per class under root/<CLASS>/.

    Per-record rng streams derive from (seed, record_id); regenerating
    with the same seed reproduces every file byte for byte.
    """
    root = os.fspath(root)
    written = []
    for name in CLASS_NAMES:
        cdir = os.path.join(root, name)
        os.makedirs(cdir, exist_ok=True)
        for i in range(per_class):
            rid = f"syn_{name}_{i:03d}"
            rng = stream_rng(seed, "synth", rid)
            x = synth_record(CLASS_FREQS[name], length, fs, noise, rng)
            path = os.path.join(cdir, f"{rid}.f64")
            x.astype("<f8").tofile(path)
            written.append(path)
    return written
