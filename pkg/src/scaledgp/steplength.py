"""Steplength rules for the scaled gradient projection loop.

Two rules are provided: a constant steplength and the adaptive alternation
of the two scaled Barzilai-Borwein values.  A rule is an object with
``reset()`` and ``next(k, x, grad, metric) -> alpha``; the solver calls
``next`` once per iteration before building the projected point.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .metric import DiagonalMetric


class DegenerateHistory(ValueError):
    """The point difference ``s`` is zero, so no BB value exists."""


@dataclass
class SteplengthConfig:
    alpha_min: float = 1e-5
    alpha_max: float = 1e5
    alpha_0: float = 1.3
    memory: int = 3
    tau_0: float = 0.5
    tau_shrink: float = 0.9
    tau_grow: float = 1.1

    def __post_init__(self):
        if not 0 < self.alpha_min <= self.alpha_max:
            raise ValueError("need 0 < alpha_min <= alpha_max")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if not 0 < self.tau_0 < 1:
            raise ValueError("tau_0 must lie in (0, 1)")

    def clamp(self, alpha: float) -> float:
        return float(min(max(alpha, self.alpha_min), self.alpha_max))


@dataclass
class BBHistory:
    prev_x: Optional[np.ndarray] = None
    prev_grad: Optional[np.ndarray] = None
    prev_alpha: Optional[float] = None
    tau: float = 0.5
    window: deque = field(default_factory=deque)


def bb_steplengths(s: np.ndarray, z: np.ndarray, metric: DiagonalMetric, alpha_max: float = 1e5):
    """Scaled BB values ``(bb1, bb2)`` from a point difference ``s`` and gradient difference ``z``.

    ``bb1 = s'D^-1 D^-1 s / s'D^-1 z`` and ``bb2 = s'D z / z'D D z``; a
    nonpositive denominator yields ``alpha_max`` for that rule.
    """
    if not np.any(s):
        raise DegenerateHistory("point difference is zero")
    dinv = metric.inverse_diag
    d = metric.diag
    s_dinv = s * dinv
    den1 = float(np.sum(s_dinv * z))
    bb1 = float(np.sum(s_dinv * s_dinv)) / den1 if den1 > 0 else alpha_max
    dz = d * z
    num2 = float(np.sum(s * dz))
    den2 = float(np.sum(dz * dz))
    bb2 = num2 / den2 if (num2 > 0 and den2 > 0) else alpha_max
    return bb1, bb2


def next_alpha(history: BBHistory, config: SteplengthConfig, metric: DiagonalMetric, x: np.ndarray, grad: np.ndarray) -> float:
    """Adaptive BB alternation; mutates ``history`` and returns ``alpha_k``."""
    if history.prev_x is None:
        alpha = config.clamp(config.alpha_0)
    else:
        s = x - history.prev_x
        z = grad - history.prev_grad
        try:
            bb1, bb2 = bb_steplengths(s, z, metric, config.alpha_max)
        except DegenerateHistory:
            alpha = history.prev_alpha
        else:
            bb1 = config.clamp(bb1)
            bb2 = config.clamp(bb2)
            history.window.append(bb2)
            while len(history.window) > config.memory:
                history.window.popleft()
            if bb2 / bb1 <= history.tau:
                alpha = min(history.window)
                history.tau *= config.tau_shrink
            else:
                alpha = bb1
                history.tau *= config.tau_grow
        alpha = config.clamp(alpha)
    history.prev_x = x.copy()
    history.prev_grad = grad.copy()
    history.prev_alpha = alpha
    return alpha


class BBSteplength:
    """Adaptive alternation of the scaled BB rules."""

    name = "bb"

    def __init__(self, config: Optional[SteplengthConfig] = None):
        self.config = config or SteplengthConfig()
        self.reset()

    @property
    def alpha_max(self) -> float:
        return self.config.alpha_max

    def reset(self):
        self.history = BBHistory(tau=self.config.tau_0)

    def next(self, k, x, grad, metric):
        return next_alpha(self.history, self.config, metric, x, grad)


class ConstantSteplength:
    name = "constant"

    def __init__(self, alpha: float):
        if alpha <= 0:
            raise ValueError("constant steplength must be positive")
        self.alpha = float(alpha)

    @property
    def alpha_max(self) -> float:
        return self.alpha

    def reset(self):
        pass

    def next(self, k, x, grad, metric):
        return self.alpha


def parse_steplength(spec: str, config: Optional[SteplengthConfig] = None):
    """Build a rule from ``constant:<a>`` or ``bb``."""
    spec = spec.strip()
    if spec == "bb":
        return BBSteplength(config)
    kind, _, arg = spec.partition(":")
    if kind == "constant":
        try:
            return ConstantSteplength(float(arg))
        except ValueError:
            pass
    raise ValueError(f"bad steplength spec {spec!r}")
