"""
Fast gradient sign method against the MLP surrogate.
"""
import numpy as np

from ..models.mlp import MlpSurrogate
from ..utils.errors import AttackError, SchemaMismatchError


def fgsm_batch(m: MlpSurrogate, X: np.ndarray, y_true: np.ndarray, epsilon: float) -> np.ndarray:
    """
    One signed-gradient step per row, clamped to the unit box.

    Args:
        m: Surrogate whose loss gradient drives the step
        X: (n, d) inputs in [0, 1]
        y_true: (n,) true classes
        epsilon: Step size (0 returns X unchanged)

    Returns:
        (n, d) adversarial inputs; zero-gradient coordinates are untouched
    """
    if epsilon < 0:
        raise AttackError(f"epsilon must be non-negative, got {epsilon}")
    X = np.asarray(X, dtype=float)
    if epsilon == 0:
        return X.copy()
    grad = m.input_gradients(X, y_true)
    return np.clip(X + epsilon * np.sign(grad), 0.0, 1.0)


def fgsm(m: MlpSurrogate, x: np.ndarray, y_true: int, epsilon: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise SchemaMismatchError(f"expected a single feature vector, got shape {x.shape}")
    return fgsm_batch(m, x[None, :], np.array([y_true]), epsilon)[0]
