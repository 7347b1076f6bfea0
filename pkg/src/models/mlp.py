"""
Differentiable one-hidden-layer MLP surrogate.

Architecture: softmax(relu(x W1 + b1) W2 + b2) with two output classes.
Besides prediction it exposes the analytic gradient of the cross-entropy
loss with respect to the input (for FGSM) and the Jacobian of the class
probabilities with respect to the input (for JSMA saliency maps).
"""
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..data.tables import Dataset
from ..utils.errors import SchemaMismatchError, TrainingError
from ..utils.seeding import make_rng
from .base import ClassifierModel
from .config import ModelKind, TrainConfig


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-row -log softmax(logits)[y], computed without clipping."""
    m = logits.max(axis=1, keepdims=True)
    log_norm = (m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True)))[:, 0]
    return log_norm - logits[np.arange(len(y)), y]


class MlpSurrogate(ClassifierModel):
    """Layer sizes [d, h, 2]; rectifier hidden layer, softmax output."""

    kind = ModelKind.MLP

    def __init__(
        self,
        W1: np.ndarray,
        b1: np.ndarray,
        W2: np.ndarray,
        b2: np.ndarray,
        loss_history: Optional[List[float]] = None,
        **header,
    ):
        W1 = np.asarray(W1, dtype=float)
        header.setdefault("n_features", W1.shape[0])
        super().__init__(**header)
        self.W1 = W1
        self.b1 = np.asarray(b1, dtype=float)
        self.W2 = np.asarray(W2, dtype=float)
        self.b2 = np.asarray(b2, dtype=float)
        self.loss_history = list(loss_history or [])
        h = self.W1.shape[1]
        if self.W1.shape != (self.n_features, h) or self.b1.shape != (h,):
            raise SchemaMismatchError(f"hidden layer shapes {self.W1.shape}/{self.b1.shape} are inconsistent")
        if self.W2.shape != (h, 2) or self.b2.shape != (2,):
            raise SchemaMismatchError(f"output layer shapes {self.W2.shape}/{self.b2.shape} are inconsistent")

    @property
    def layer_sizes(self) -> Tuple[int, int, int]:
        return (self.n_features, self.W1.shape[1], 2)

    @property
    def final_loss(self) -> Optional[float]:
        return self.loss_history[-1] if self.loss_history else None

    def _hidden(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        z1 = X @ self.W1 + self.b1
        return z1, np.maximum(z1, 0.0)

    def logits(self, X: np.ndarray) -> np.ndarray:
        _, a1 = self._hidden(X)
        return a1 @ self.W2 + self.b2

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.logits(X))

    def loss(self, X: np.ndarray, y: np.ndarray) -> float:
        """Mean cross-entropy over the rows."""
        X = self._validate_input(X)
        return float(cross_entropy(self.logits(X), np.asarray(y, dtype=np.int64)).mean())

    def input_gradients(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """
        Gradient of each row's own cross-entropy loss with respect to that row.

        Args:
            X: (n, d) inputs
            y: (n,) true classes

        Returns:
            (n, d) matrix of d J(x_i, y_i) / d x_i
        """
        X = self._validate_input(X)
        y = np.asarray(y, dtype=np.int64).reshape(-1)
        z1, a1 = self._hidden(X)
        p = softmax(a1 @ self.W2 + self.b2)
        dz2 = p.copy()
        dz2[np.arange(len(y)), y] -= 1.0
        dz1 = (dz2 @ self.W2.T) * (z1 > 0)
        return dz1 @ self.W1.T

    def jacobians(self, X: np.ndarray) -> np.ndarray:
        """
        Jacobian of the class probabilities with respect to each input row.

        Returns:
            (n, 2, d) array, entry [i, j, k] = d F_j(x_i) / d x_ik
        """
        X = self._validate_input(X)
        z1, a1 = self._hidden(X)
        p = softmax(a1 @ self.W2 + self.b2)
        # d softmax_j / d z_k = p_j (delta_jk - p_k)
        dp_dz = p[:, :, None] * (np.eye(2)[None, :, :] - p[:, None, :])
        dz_dx = (self.W2.T[None, :, :] * (z1 > 0)[:, None, :]) @ self.W1.T
        return dp_dz @ dz_dx

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), "layer_sizes": list(self.layer_sizes), "final_loss": self.final_loss}

    def state_dict(self) -> Dict[str, Any]:
        return {
            "W1": self.W1.tolist(),
            "b1": self.b1.tolist(),
            "W2": self.W2.tolist(),
            "b2": self.b2.tolist(),
            "loss_history": [float(v) for v in self.loss_history],
        }

    @classmethod
    def from_state(cls, header: Dict[str, Any], state: Dict[str, Any]) -> "MlpSurrogate":
        return cls(
            state["W1"], state["b1"], state["W2"], state["b2"],
            loss_history=state.get("loss_history"),
            **header,
        )


def mlp_forward(m: MlpSurrogate, x: np.ndarray) -> np.ndarray:
    """Probability vector (length 2) for a single input."""
    return m.predict_proba(np.asarray(x, dtype=float).reshape(1, -1))[0]


def mlp_input_gradient(m: MlpSurrogate, x: np.ndarray, y: int) -> np.ndarray:
    """Exact gradient of the cross-entropy loss at (x, y) with respect to x."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise SchemaMismatchError(f"expected a single feature vector, got shape {x.shape}")
    return m.input_gradients(x[None, :], np.array([y]))[0]


def mlp_jacobian(m: MlpSurrogate, x: np.ndarray) -> np.ndarray:
    """2 x d Jacobian dF_j/dx_i of the softmax outputs at x."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise SchemaMismatchError(f"expected a single feature vector, got shape {x.shape}")
    return m.jacobians(x[None, :])[0]


def init_mlp(d: int, hidden: int, rng: np.random.Generator, **header) -> MlpSurrogate:
    """He-normal weights, zero biases."""
    W1 = rng.normal(0.0, np.sqrt(2.0 / d), size=(d, hidden))
    W2 = rng.normal(0.0, np.sqrt(2.0 / hidden), size=(hidden, 2))
    return MlpSurrogate(W1, np.zeros(hidden), W2, np.zeros(2), n_features=d, **header)


def fit_mlp(train: Dataset, cfg: Optional[TrainConfig] = None, seed: Optional[int] = None) -> MlpSurrogate:
    """
    Train the surrogate by mini-batch gradient descent on mean cross-entropy.

    Args:
        train: Training dataset (features in [0, 1])
        cfg: Training configuration (mlp section)
        seed: Seed for weight initialization and batch order (defaults to cfg.seed)

    Returns:
        Trained MlpSurrogate; loss_history[0] is the loss at initialization
        and loss_history[e] the loss after epoch e
    """
    cfg = cfg or TrainConfig()
    seed = cfg.seed if seed is None else seed
    params = cfg.mlp
    X, y = train.features, train.labels
    n = train.n

    model = init_mlp(
        train.d,
        params.hidden,
        make_rng(seed, "mlp", "init"),
        train_seed=seed,
        schema_fingerprint=train.schema_fingerprint,
        hyperparameters=cfg.params_for(ModelKind.MLP),
    )
    W1, b1, W2, b2 = model.W1, model.b1, model.W2, model.b2
    order_rng = make_rng(seed, "mlp", "batches")
    history = [model.loss(X, y)]
    lr = params.learning_rate

    for epoch in range(1, params.epochs + 1):
        order = order_rng.permutation(n)
        for start in range(0, n, params.batch_size):
            batch = order[start:start + params.batch_size]
            xb, yb = X[batch], y[batch]

            z1 = xb @ W1 + b1
            a1 = np.maximum(z1, 0.0)
            logits = a1 @ W2 + b2
            batch_loss = cross_entropy(logits, yb).mean()
            if not np.isfinite(batch_loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}; learning rate {lr} is likely too high"
                )

            dz2 = softmax(logits)
            dz2[np.arange(len(yb)), yb] -= 1.0
            dz2 /= len(yb)
            dz1 = (dz2 @ W2.T) * (z1 > 0)

            W2 -= lr * (a1.T @ dz2)
            b2 -= lr * dz2.sum(axis=0)
            W1 -= lr * (xb.T @ dz1)
            b1 -= lr * dz1.sum(axis=0)

        epoch_loss = model.loss(X, y)
        if not np.isfinite(epoch_loss):
            raise TrainingError(f"non-finite loss at epoch {epoch}; learning rate {lr} is likely too high")
        history.append(epoch_loss)
        model.logger.debug(f"epoch {epoch}/{params.epochs} loss={epoch_loss:.6f}")

    model.loss_history = history
    model.logger.info(f"Trained MLP {model.layer_sizes} for {params.epochs} epochs, final loss {history[-1]:.4f}")
    return model
