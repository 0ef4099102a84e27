"""Spike-pattern synthesis for the classification task.

Each pattern is 4 channels x 4 spike times inside a 50 ms window.  The
four signal classes jitter their spike times around class-specific means;
the extraneous class draws times uniformly.  Times are normalized by the
window and quantized to the DAC grid, giving 16 input voltages in [0, 1].
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import CountMismatchError
from .netmodel import LABELS, N_OUTPUT, OUTPUT_LABELS, REJECT_LABEL
from .stats import quantize_half_up, truncated_normal

N_CHANNELS = 4
N_SPIKES = 4

TRAIN_COUNTS = {"S1": 735, "S2": 760, "S3": 724, "S4": 754, "Sr": 3027}
TEST_COUNTS = {"S1": 265, "S2": 240, "S3": 276, "S4": 246, "Sr": 973}


@dataclass
class StimulusProfile:
    """Mean spike times per signal class, plus jitter and encoding settings."""

    means: dict = field(default_factory=dict)  # label -> (4, 4) ms array
    window_ms: float = 50.0
    jitter_fraction: float = 0.3
    jitter_sigmas: float = 3.0
    dac_step: float = 0.0025

    def __post_init__(self):
        for label in OUTPUT_LABELS:
            if label not in self.means:
                raise ValueError(f"profile is missing class {label}")
            arr = np.asarray(self.means[label], dtype=float)
            if arr.shape != (N_CHANNELS, N_SPIKES):
                raise ValueError(f"{label}: expected shape "
                                 f"({N_CHANNELS}, {N_SPIKES}), got {arr.shape}")
            if np.any(arr < 0) or np.any(arr > self.window_ms):
                raise ValueError(f"{label}: mean times must lie in the window")
            self.means[label] = arr

    def to_dict(self) -> dict:
        return {
            "window_ms": self.window_ms,
            "jitter_fraction": self.jitter_fraction,
            "jitter_sigmas": self.jitter_sigmas,
            "dac_step": self.dac_step,
            "means": {k: v.tolist() for k, v in self.means.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StimulusProfile":
        return cls(means={k: np.array(v) for k, v in d["means"].items()},
                   window_ms=d.get("window_ms", 50.0),
                   jitter_fraction=d.get("jitter_fraction", 0.3),
                   jitter_sigmas=d.get("jitter_sigmas", 3.0),
                   dac_step=d.get("dac_step", 0.0025))


def save_profile(profile: StimulusProfile, path) -> None:
    with open(path, "w") as fh:
        json.dump(profile.to_dict(), fh, indent=2)


def load_profile(path) -> StimulusProfile:
    with open(path) as fh:
        return StimulusProfile.from_dict(json.load(fh))


def default_profile() -> StimulusProfile:
    """Packaged recording-site profile used by the bundled experiments."""
    text = resources.files("memxbar").joinpath("data/default_profile.json")
    return StimulusProfile.from_dict(json.loads(text.read_text()))


def synthesize_stimulus_patterns(profile: StimulusProfile, label: str,
                                 count: int, rng: np.random.Generator) -> np.ndarray:
    """Jittered spike trains (count, channels, spikes) for one signal class."""
    mean = profile.means[label]
    sigma = profile.jitter_fraction * mean / profile.jitter_sigmas
    times = truncated_normal(rng, mean, np.maximum(sigma, 1e-12),
                             profile.jitter_sigmas,
                             (count, N_CHANNELS, N_SPIKES))
    times = np.clip(times, 0.0, profile.window_ms)
    return np.sort(times, axis=-1)


def synthesize_extraneous(profile: StimulusProfile, count: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Uniform spike trains with no structure, the rejection class."""
    times = rng.uniform(0.0, profile.window_ms,
                        size=(count, N_CHANNELS, N_SPIKES))
    return np.sort(times, axis=-1)


def normalize_quantize(times: np.ndarray, profile: StimulusProfile) -> np.ndarray:
    """Spike times to DAC codes: divide by the window, snap to the grid."""
    x = np.asarray(times, dtype=float) / profile.window_ms
    return np.clip(quantize_half_up(x, profile.dac_step), 0.0, 1.0)


def encode(times: np.ndarray, profile: StimulusProfile) -> np.ndarray:
    """Flatten (H, channels, spikes) trains into (H, 16) input voltages."""
    times = np.asarray(times, dtype=float)
    h = times.shape[0]
    return normalize_quantize(times.reshape(h, N_CHANNELS * N_SPIKES), profile)


def target_vector(label: str) -> np.ndarray:
    """Desired outputs: +1 on the class line, -1 elsewhere, all -1 for reject."""
    y = -np.ones(N_OUTPUT)
    if label != REJECT_LABEL:
        y[OUTPUT_LABELS.index(label)] = 1.0
    return y


def target_matrix(labels) -> np.ndarray:
    return np.array([target_vector(lb) for lb in labels])


def synthesize_pool(profile: StimulusProfile, rng: np.random.Generator,
                    per_site: int = 1000,
                    extraneous: int = 4000) -> tuple[np.ndarray, list]:
    """The full labelled corpus before splitting."""
    blocks, labels = [], []
    for label in OUTPUT_LABELS:
        times = synthesize_stimulus_patterns(profile, label, per_site, rng)
        blocks.append(encode(times, profile))
        labels.extend([label] * per_site)
    times = synthesize_extraneous(profile, extraneous, rng)
    blocks.append(encode(times, profile))
    labels.extend([REJECT_LABEL] * extraneous)
    return np.vstack(blocks), labels


def make_split(x: np.ndarray, labels, train_counts: dict, test_counts: dict,
               rng: np.random.Generator):
    """Shuffle the pool and partition it into exact per-class counts.

    Every pattern lands in exactly one side, and the per-class pool sizes
    must equal train + test counts.
    """
    x = np.asarray(x, dtype=float)
    labels = list(labels)
    if x.shape[0] != len(labels):
        raise CountMismatchError(f"{x.shape[0]} rows vs {len(labels)} labels")
    unknown = (set(train_counts) | set(test_counts)) - set(LABELS)
    if unknown:
        raise CountMismatchError(f"unknown classes {sorted(unknown)}")
    train_idx, test_idx = [], []
    for label in LABELS:
        pool = [i for i, lb in enumerate(labels) if lb == label]
        n_train = train_counts.get(label, 0)
        n_test = test_counts.get(label, 0)
        if len(pool) != n_train + n_test:
            raise CountMismatchError(
                f"{label}: pool has {len(pool)}, split wants "
                f"{n_train}+{n_test}"
            )
        order = rng.permutation(len(pool))
        train_idx.extend(pool[k] for k in order[:n_train])
        test_idx.extend(pool[k] for k in order[n_train:])
    y_train = [labels[i] for i in train_idx]
    y_test = [labels[i] for i in test_idx]
    return (x[train_idx], y_train), (x[test_idx], y_test)


def default_splits(rng: np.random.Generator, profile: StimulusProfile | None = None):
    """The standard 6000/2000 train/test split of the synthesized corpus."""
    if profile is None:
        profile = default_profile()
    x, labels = synthesize_pool(profile, rng)
    return make_split(x, labels, TRAIN_COUNTS, TEST_COUNTS, rng)


def save_dataset_csv(path, x: np.ndarray, labels) -> None:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != len(labels):
        raise CountMismatchError(f"{x.shape[0]} rows vs {len(labels)} labels")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(x.shape[1])] + ["label"])
        for row, label in zip(x, labels):
            writer.writerow([repr(float(v)) for v in row] + [label])


def load_dataset_csv(path) -> tuple[np.ndarray, list]:
    rows, labels = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = len(header) - 1
        for rec in reader:
            rows.append([float(v) for v in rec[:n]])
            labels.append(rec[n])
    return np.array(rows), labels
