"""
Single-feature Jacobian saliency map attack.

Each iteration recomputes the surrogate Jacobian at the current point,
scores every feature for how strongly moving it pushes the prediction
toward the target class, and moves the best feature by gamma. A feature is
modified at most once, so a row never has more than ceil(theta * d)
changed coordinates.
"""
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from ..data.tables import BENIGN
from ..models.mlp import MlpSurrogate
from ..utils.errors import AttackError, SchemaMismatchError
from .config import Direction, jsma_budget

STOP_ALREADY_TARGET = "already_target"
STOP_TARGET_REACHED = "target_reached"
STOP_BUDGET = "budget_exhausted"
STOP_NO_SALIENCY = "no_salient_feature"


@dataclass(frozen=True)
class SaliencyMap:
    """Non-negative per-feature scores and the helpful sign of change."""

    scores: np.ndarray
    direction: np.ndarray
    target_class: int

    @property
    def best(self) -> Optional[int]:
        """Highest-scoring feature (lowest index on ties), or None if all scores are 0."""
        i = int(np.argmax(self.scores))
        return i if self.scores[i] > 0 else None


@dataclass(frozen=True)
class PerturbationLog:
    """Modifications applied to one row, in the order they were made."""

    features: Tuple[int, ...]
    before: Tuple[float, ...]
    after: Tuple[float, ...]
    stop_reason: str

    @property
    def n_changed(self) -> int:
        return sum(1 for b, a in zip(self.before, self.after) if a != b)

    @property
    def l1(self) -> float:
        return float(sum(abs(a - b) for b, a in zip(self.before, self.after)))

    def to_dict(self) -> dict:
        return {
            "features": list(self.features),
            "before": list(self.before),
            "after": list(self.after),
            "n_changed": self.n_changed,
            "l1": self.l1,
            "stop_reason": self.stop_reason,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PerturbationLog":
        return cls(
            tuple(int(f) for f in payload["features"]),
            tuple(float(v) for v in payload["before"]),
            tuple(float(v) for v in payload["after"]),
            payload["stop_reason"],
        )


def saliency_scores(
    jacs: np.ndarray,
    target: int,
    direction: Union[Direction, str] = Direction.BOTH,
    excluded: Optional[np.ndarray] = None,
    X: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Batched saliency rule.

    Args:
        jacs: (n, 2, d) Jacobians of the class probabilities
        target: Class the attack pushes toward
        direction: Allowed sign of change
        excluded: (n, d) boolean mask of features that must score 0
        X: (n, d) current inputs; when given, features already at 1 cannot
            increase and features already at 0 cannot decrease

    Returns:
        (scores, signs), both (n, d); signs are +1 or -1
    """
    direction = Direction(direction)
    jt = jacs[:, target, :]
    jo = jacs[:, 1 - target, :]

    up = np.where((jt > 0) & (jo < 0), jt * np.abs(jo), 0.0)
    down = np.where((jt < 0) & (jo > 0), np.abs(jt) * jo, 0.0)
    if X is not None:
        up = np.where(X >= 1.0, 0.0, up)
        down = np.where(X <= 0.0, 0.0, down)
    if direction is Direction.INCREASE:
        down = np.zeros_like(down)
    elif direction is Direction.DECREASE:
        up = np.zeros_like(up)

    scores = np.maximum(up, down)
    signs = np.where(down > up, -1, 1).astype(np.int8)
    if excluded is not None:
        scores = np.where(excluded, 0.0, scores)
    return scores, signs


def saliency_map(
    jac: np.ndarray,
    target: int,
    excluded=(),
    direction: Union[Direction, str] = Direction.BOTH,
    x: Optional[np.ndarray] = None,
) -> SaliencyMap:
    """
    Saliency map for one 2 x d Jacobian.

    Args:
        jac: Jacobian dF_j/dx_i
        target: Target class (0 or 1)
        excluded: Feature indices forced to score 0
        direction: Allowed sign of change. Defaults to both: each feature
            keeps the larger of its increase and decrease scores. The
            single-direction rule (a feature only ever grows) is "increase".
        x: Current input, for the saturation rule

    Returns:
        SaliencyMap
    """
    if target not in (0, 1):
        raise AttackError(f"target class must be 0 or 1, got {target}")
    jac = np.asarray(jac, dtype=float)
    d = jac.shape[1]
    mask = np.zeros((1, d), dtype=bool)
    mask[0, list(excluded)] = True
    X = None if x is None else np.asarray(x, dtype=float)[None, :]
    scores, signs = saliency_scores(jac[None, :, :], target, direction, mask, X)
    return SaliencyMap(scores[0], signs[0], target)


def jsma_batch(
    m: MlpSurrogate,
    X: np.ndarray,
    theta: float,
    gamma: float,
    target: int = BENIGN,
    direction: Union[Direction, str] = Direction.BOTH,
) -> Tuple[np.ndarray, List[PerturbationLog]]:
    """
    Run the greedy attack on every row of X at once.

    A row stops as soon as the surrogate predicts `target`, when its
    budget of ceil(theta * d) modified features is spent, or when no
    feature has a positive saliency score.

    Args:
        m: Surrogate providing Jacobians and predictions
        X: (n, d) inputs in [0, 1]
        theta: Fraction of features that may change
        gamma: Size of each change
        target: Class the attack aims for
        direction: Allowed sign of change (default both; see `saliency_map`)

    Returns:
        (adversarial inputs, one PerturbationLog per row)
    """
    if not 0.0 < theta <= 1.0 or not 0.0 < gamma <= 1.0:
        raise AttackError(f"theta and gamma must lie in (0, 1], got theta={theta}, gamma={gamma}")
    X = np.array(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != m.n_features:
        raise SchemaMismatchError(f"surrogate expects {m.n_features} features, got shape {X.shape}")
    n, d = X.shape
    budget = jsma_budget(theta, d)

    modified = np.zeros((n, d), dtype=bool)
    steps: List[List[Tuple[int, float, float]]] = [[] for _ in range(n)]
    reasons = [STOP_BUDGET] * n

    active = m.predict(X) != target
    for i in np.flatnonzero(~active):
        reasons[i] = STOP_ALREADY_TARGET

    for step in range(budget):
        rows = np.flatnonzero(active)
        if len(rows) == 0:
            break
        if step > 0:
            reached = m.predict(X[rows]) == target
            for i in rows[reached]:
                reasons[i] = STOP_TARGET_REACHED
            active[rows[reached]] = False
            rows = rows[~reached]
            if len(rows) == 0:
                break

        scores, signs = saliency_scores(m.jacobians(X[rows]), target, direction, modified[rows], X[rows])
        best = np.argmax(scores, axis=1)
        best_score = scores[np.arange(len(rows)), best]

        stuck = best_score <= 0
        for i in rows[stuck]:
            reasons[i] = STOP_NO_SALIENCY
        active[rows[stuck]] = False

        movers = rows[~stuck]
        features = best[~stuck]
        sign = signs[np.arange(len(rows)), best][~stuck]
        before = X[movers, features]
        after = np.clip(before + sign * gamma, 0.0, 1.0)
        X[movers, features] = after
        modified[movers, features] = True
        for i, f, b, a in zip(movers, features, before, after):
            steps[i].append((int(f), float(b), float(a)))

    # rows that used their last feature may have reached the target with it
    spent = np.flatnonzero(active)
    if len(spent):
        reached = m.predict(X[spent]) == target
        for i in spent[reached]:
            reasons[i] = STOP_TARGET_REACHED

    logs = [
        PerturbationLog(
            tuple(f for f, _, _ in row_steps),
            tuple(b for _, b, _ in row_steps),
            tuple(a for _, _, a in row_steps),
            reason,
        )
        for row_steps, reason in zip(steps, reasons)
    ]
    return X, logs


def jsma(
    m: MlpSurrogate,
    x: np.ndarray,
    y_true: int,
    theta: float,
    gamma: float,
    target: Optional[int] = None,
    direction: Union[Direction, str] = Direction.BOTH,
) -> Tuple[np.ndarray, PerturbationLog]:
    """
    Attack a single input.

    The target defaults to benign; `y_true` is only used to reject
    attacking a row toward its own class.
    """
    target = BENIGN if target is None else target
    if y_true == target:
        raise AttackError(f"row is already of target class {target}")
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise SchemaMismatchError(f"expected a single feature vector, got shape {x.shape}")
    X_adv, logs = jsma_batch(m, x[None, :], theta, gamma, target, direction)
    return X_adv[0], logs[0]
