"""
Seeded synthetic stand-in for the power-system corpus.

Two Gaussian class blobs with label noise, PMU-style feature names and
scenario tags, so the whole pipeline runs without the licensed data.
"""
from typing import List

import numpy as np

from ..utils.errors import DataError
from ..utils.seeding import make_rng
from .tables import RawTable

PMU_SIGNALS = ("PA1:VH", "PM1:V", "PA4:IH", "PM4:I", "PA7:VH", "PM7:V", "F", "DF", "PA:Z", "PA:ZH", "S")


def synthetic_feature_names(d: int) -> List[str]:
    """Names shaped like "R1-PA1:VH", cycling relays R1-R4 over a fixed signal list."""
    names = []
    for i in range(d):
        relay = i % 4 + 1
        signal = PMU_SIGNALS[(i // 4) % len(PMU_SIGNALS)]
        block = i // (4 * len(PMU_SIGNALS))
        names.append(f"R{relay}-{signal}" + (f"#{block}" if block else ""))
    return names


def make_synthetic(
    n: int = 2000,
    d: int = 16,
    malicious_fraction: float = 0.71,
    separation: float = 2.0,
    label_noise: float = 0.05,
    non_finite_fraction: float = 0.0,
    seed: int = 0,
) -> RawTable:
    """
    Generate a raw labeled table of two Gaussian blobs.

    Args:
        n: Number of rows
        d: Number of features
        malicious_fraction: Share of rows drawn from the attack blob
        separation: Distance between class means in units of the blob standard deviation
        label_noise: Probability of flipping a row's tag to the other class
        non_finite_fraction: Share of readings replaced by +/-inf sentinels
        seed: Generator seed

    Returns:
        RawTable with tags "NoEvents"/"Natural" (benign) and "Attack" (malicious)
    """
    if n < 2 or d < 1:
        raise DataError(f"synthetic data needs n >= 2 and d >= 1, got n={n}, d={d}")
    if not 0.0 < malicious_fraction < 1.0:
        raise DataError(f"malicious_fraction must be in (0, 1), got {malicious_fraction}")

    rng = make_rng(seed, "synthetic")
    n_malicious = int(round(malicious_fraction * n))
    is_malicious = np.zeros(n, dtype=bool)
    is_malicious[rng.permutation(n)[:n_malicious]] = True

    # raw readings on PMU-like scales
    scales = rng.uniform(0.5, 50.0, size=d)
    offsets = rng.uniform(-100.0, 100.0, size=d)
    direction = rng.normal(size=d)
    direction /= np.linalg.norm(direction)

    latent = rng.normal(size=(n, d))
    latent += np.where(is_malicious, 0.5, -0.5)[:, None] * separation * direction
    rows = latent * scales + offsets

    flipped = rng.random(n) < label_noise
    tag_malicious = is_malicious ^ flipped
    benign_tags = np.where(rng.random(n) < 0.5, "NoEvents", "Natural")
    tags = np.where(tag_malicious, "Attack", benign_tags)

    if non_finite_fraction > 0.0:
        sentinel = rng.random((n, d)) < non_finite_fraction
        signs = np.where(rng.random((n, d)) < 0.5, np.inf, -np.inf)
        rows = np.where(sentinel, signs, rows)

    return RawTable(
        feature_names=tuple(synthetic_feature_names(d)),
        rows=rows,
        raw_labels=tuple(str(t) for t in tags),
        provenance=(("source", f"synthetic:n={n},d={d},seed={seed}"),),
    )
