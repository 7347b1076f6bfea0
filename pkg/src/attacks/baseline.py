"""
Random same-budget perturbation baseline.
"""
import numpy as np

from ..data.tables import BENIGN
from ..models.base import ClassifierModel
from .config import jsma_budget


def random_perturbation(x: np.ndarray, budget: int, gamma: float, rng: np.random.Generator) -> np.ndarray:
    """Move `budget` distinct random features by +-gamma (random signs), clamped to [0, 1]."""
    x = np.asarray(x, dtype=float)
    return random_perturbation_batch(x[None, :], budget, gamma, rng)[0]


def random_perturbation_batch(
    X: np.ndarray,
    budget: int,
    gamma: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Row-wise random perturbation.

    Each row gets its own `budget` distinct features, chosen uniformly
    without replacement, each moved by gamma in a random direction.
    """
    X = np.array(X, dtype=float)
    n, d = X.shape
    budget = min(budget, d)
    # argsort of uniform keys gives an independent random permutation per row
    features = np.argsort(rng.random((n, d)), axis=1)[:, :budget]
    signs = rng.choice(np.array([-1.0, 1.0]), size=(n, budget))
    rows = np.arange(n)[:, None]
    X[rows, features] = np.clip(X[rows, features] + signs * gamma, 0.0, 1.0)
    return X


def flip_rate(m: ClassifierModel, X: np.ndarray, target: int = BENIGN) -> float:
    """Fraction of rows the model labels `target`."""
    if len(X) == 0:
        return 0.0
    return float(np.mean(m.predict(X) == target))


def random_flip_rate(
    m: ClassifierModel,
    X: np.ndarray,
    theta: float,
    gamma: float,
    rng: np.random.Generator,
    trials: int = 100,
    target: int = BENIGN,
) -> float:
    """
    Mean flip rate of random ceil(theta * d)-feature perturbations over `trials` draws.

    Args:
        m: Model judged
        X: (n, d) rows to perturb (typically malicious rows)
        theta: Fraction of features perturbed
        gamma: Perturbation size
        rng: Random generator
        trials: Number of independent draws averaged
        target: Class counted as a flip

    Returns:
        Mean fraction of rows labeled `target`
    """
    budget = jsma_budget(theta, X.shape[1])
    rates = [flip_rate(m, random_perturbation_batch(X, budget, gamma, rng), target) for _ in range(trials)]
    return float(np.mean(rates))
