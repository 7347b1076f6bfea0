"""
Attack parameters.
"""
import math
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..data.tables import BENIGN


def jsma_budget(theta: float, d: int) -> int:
    """ceil(theta * d), at least 1."""
    # 0.3 * 10 must give 3, not 4
    return max(1, int(math.ceil(round(theta * d, 9))))


class AttackMethod(str, Enum):
    FGSM = "fgsm"
    JSMA = "jsma"


class Direction(str, Enum):
    """Which sign of change a JSMA step may take."""

    BOTH = "both"
    INCREASE = "increase"
    DECREASE = "decrease"


class AttackConfig(BaseModel):
    """
    One attack setting.

    theta is the fraction of features JSMA may change and gamma the size of
    each change; epsilon is the FGSM step.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    method: AttackMethod = AttackMethod.JSMA
    theta: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    gamma: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    epsilon: Optional[float] = Field(default=None, gt=0.0)
    direction: Direction = Direction.BOTH
    target: int = Field(default=BENIGN, ge=0, le=1)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_method_params(self) -> "AttackConfig":
        if self.method is AttackMethod.JSMA and (self.theta is None or self.gamma is None):
            raise ValueError("jsma needs both theta and gamma")
        if self.method is AttackMethod.FGSM and self.epsilon is None:
            raise ValueError("fgsm needs epsilon")
        return self

    def budget(self, d: int) -> int:
        """Maximum number of features JSMA may modify."""
        return d if self.theta is None else jsma_budget(self.theta, d)

    @property
    def label(self) -> str:
        if self.method is AttackMethod.FGSM:
            return f"fgsm(eps={self.epsilon:g})"
        return f"jsma(theta={self.theta:g},gamma={self.gamma:g})"

    @classmethod
    def jsma(cls, theta: float, gamma: float, **kwargs) -> "AttackConfig":
        return cls(method=AttackMethod.JSMA, theta=theta, gamma=gamma, **kwargs)

    @classmethod
    def fgsm(cls, epsilon: float, **kwargs) -> "AttackConfig":
        return cls(method=AttackMethod.FGSM, epsilon=epsilon, **kwargs)
