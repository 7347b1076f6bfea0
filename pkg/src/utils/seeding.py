"""
Deterministic seed derivation.

Every random stream in the lab is derived from the experiment's global seed
plus a textual label, so results never depend on call order or scheduling.
"""
import hashlib
from typing import Union

import numpy as np

SEED_MASK = (1 << 63) - 1


def derive_seed(seed: int, *labels: Union[str, int, float]) -> int:
    """
    Derive a child seed from a parent seed and a label path.

    Args:
        seed: Parent seed
        *labels: Label components, e.g. ("forest", "tree", 7)

    Returns:
        Non-negative 63-bit integer seed
    """
    key = ":".join([str(int(seed))] + [str(label) for label in labels])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & SEED_MASK


def make_rng(seed: int, *labels: Union[str, int, float]) -> np.random.Generator:
    """Build a numpy Generator for the derived seed."""
    if labels:
        seed = derive_seed(seed, *labels)
    return np.random.default_rng(seed)
