"""Diagonal scaling matrices and eigenvalue-bound schedules.

A scaling matrix ``D_k`` is stored by its diagonal.  The bound ``mu_k`` keeps
every entry inside ``[1/mu_k, mu_k]``.  Convergence of the scaled iteration on
convex problems needs ``mu_k**2 = 1 + zeta_k`` with a summable, nonnegative
``zeta_k``; :class:`BoundSchedule` produces such sequences and
:class:`ThetaMonitor` tracks the running product ``theta_k = prod mu_j**2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class ScheduleWarning(UserWarning):
    """Emitted when a bound schedule stops looking summable."""


@dataclass(frozen=True)
class DiagonalMetric:
    """Positive diagonal matrix with entries in ``[1/mu, mu]``."""

    diag: np.ndarray
    mu: float = 1.0

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        object.__setattr__(self, "diag", d)
        if self.mu < 1.0:
            raise ValueError(f"metric bound mu must be >= 1, got {self.mu}")
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ValueError("metric diagonal must be finite and positive")

    @classmethod
    def identity(cls, shape) -> "DiagonalMetric":
        return cls(np.ones(shape), 1.0)

    @property
    def inverse_diag(self) -> np.ndarray:
        return 1.0 / self.diag

    def norm2(self, v: np.ndarray) -> float:
        """Squared D-norm ``v' D v``."""
        return float(np.sum(self.diag * v * v))

    def inverse_norm2(self, v: np.ndarray) -> float:
        """Squared D^{-1}-norm ``v' D^{-1} v``."""
        return float(np.sum(v * v / self.diag))

    def contains(self, mu: Optional[float] = None, rtol: float = 1e-12) -> bool:
        """True when every entry lies in ``[1/mu, mu]`` (``mu`` defaults to the own bound)."""
        m = self.mu if mu is None else mu
        lo, hi = 1.0 / m, m
        return bool(np.all(self.diag >= lo * (1 - rtol)) and np.all(self.diag <= hi * (1 + rtol)))


def clamp_to_metric(values, mu_k: float) -> DiagonalMetric:
    """Clamp raw scaling values into ``[1/mu_k, mu_k]``."""
    if mu_k < 1.0:
        raise ValueError(f"mu_k must be >= 1, got {mu_k}")
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("scaling values must be finite")
    if mu_k == 1.0:
        return DiagonalMetric(np.ones_like(values), 1.0)
    return DiagonalMetric(np.clip(values, 1.0 / mu_k, mu_k), float(mu_k))


@dataclass(frozen=True)
class BoundSchedule:
    """Eigenvalue bound sequence ``mu_k`` for ``k >= 1``.

    ``mode="fixed"`` returns ``mu_fixed`` at every step.  ``mode="variable"``
    uses ``zeta_k = c / k**2`` unless a custom ``zeta`` callable is given.
    """

    mode: str = "variable"
    mu_fixed: float = 1.0
    c: float = 1e10
    zeta: Optional[Callable[[int], float]] = None

    def __post_init__(self):
        if self.mode not in ("fixed", "variable"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "fixed" and self.mu_fixed < 1.0:
            raise ValueError("mu_fixed must be >= 1")
        if self.mode == "variable" and self.zeta is None and self.c < 0:
            raise ValueError("c must be nonnegative")

    @classmethod
    def fixed(cls, mu: float) -> "BoundSchedule":
        return cls(mode="fixed", mu_fixed=float(mu))

    @classmethod
    def summable(cls, c: float = 1e10) -> "BoundSchedule":
        return cls(mode="variable", c=float(c))

    def zeta_at(self, k: int) -> float:
        if k < 1:
            raise IndexError(f"schedule index starts at 1, got {k}")
        if self.mode == "fixed":
            return self.mu_fixed**2 - 1.0
        if self.zeta is not None:
            z = float(self.zeta(k))
            if z < 0:
                raise ValueError(f"zeta_{k} = {z} is negative")
            return z
        return self.c / (k * k)

    def log_theta_bound(self) -> float:
        """``log prod_{k>=1} (1 + zeta_k)``; ``inf`` when not known to be finite.

        For ``zeta_k = c/k**2`` the product has the closed form
        ``sinh(pi sqrt(c)) / (pi sqrt(c))``.
        """
        if self.mode == "fixed":
            return 0.0 if self.mu_fixed == 1.0 else math.inf
        if self.zeta is not None:
            return math.inf
        if self.c == 0:
            return 0.0
        z = math.pi * math.sqrt(self.c)
        # log sinh(z) = z + log1p(-exp(-2z)) - log 2
        return z + math.log1p(-math.exp(-2.0 * z)) - math.log(2.0) - math.log(z)


def mu_at(schedule: BoundSchedule, k: int) -> float:
    """Bound ``mu_k`` at iteration ``k >= 1``."""
    if k < 1:
        raise IndexError(f"schedule index starts at 1, got {k}")
    if schedule.mode == "fixed":
        return schedule.mu_fixed
    return math.sqrt(1.0 + schedule.zeta_at(k))


@dataclass
class ThetaMonitor:
    """Running ``log theta_k = sum_j log(mu_j**2)`` with a summability check.

    ``log_bound`` is the analytic ``log M`` when the schedule provides one.
    The monitor flags a schedule as unbounded once ``zeta_k`` has failed to
    decrease for ``patience`` consecutive positive steps, or once ``log_theta``
    exceeds ``log_bound``.
    """

    log_bound: float = math.inf
    patience: int = 3
    warn: bool = True
    k: int = 0
    log_theta: float = 0.0
    zeta_sum: float = 0.0
    last_zeta: Optional[float] = None
    stalled: int = 0
    unbounded: bool = False
    history: list = field(default_factory=list)

    @classmethod
    def for_schedule(cls, schedule: BoundSchedule, **kwargs) -> "ThetaMonitor":
        return cls(log_bound=schedule.log_theta_bound(), **kwargs)

    @property
    def theta(self) -> float:
        return math.exp(self.log_theta) if self.log_theta < 700 else math.inf

    def update(self, mu_k: float) -> "ThetaMonitor":
        return theta_update(self, mu_k)


def theta_update(monitor: ThetaMonitor, mu_k: float) -> ThetaMonitor:
    """Fold ``mu_k`` into the monitor (in place) and return it."""
    if mu_k < 1.0:
        raise ValueError(f"mu_k must be >= 1, got {mu_k}")
    zeta = mu_k * mu_k - 1.0
    monitor.k += 1
    # log(mu^2) = log1p(zeta) keeps precision when mu is close to 1
    monitor.log_theta += math.log1p(zeta) if zeta < 1e300 else 2.0 * math.log(mu_k)
    monitor.zeta_sum += zeta
    monitor.history.append(monitor.log_theta)
    if monitor.last_zeta is not None and zeta > 0 and zeta >= monitor.last_zeta:
        monitor.stalled += 1
    else:
        monitor.stalled = 0
    monitor.last_zeta = zeta
    flagged = monitor.stalled >= monitor.patience or monitor.log_theta > monitor.log_bound * (1 + 1e-12) + 1e-12
    if flagged and not monitor.unbounded:
        monitor.unbounded = True
        if monitor.warn:
            warnings.warn(
                f"bound schedule violates the summability condition at k={monitor.k} "
                f"(log theta = {monitor.log_theta:.6g})",
                ScheduleWarning,
                stacklevel=2,
            )
    return monitor


# ---------------------------------------------------------------------------
# metric providers used by the solver loop
# ---------------------------------------------------------------------------

class IdentityMetric:
    """Always returns the identity; turns the scaled method into plain GP."""

    name = "identity"
    schedule = None

    def __call__(self, k: int, x: np.ndarray, grad: np.ndarray) -> DiagonalMetric:
        return DiagonalMetric.identity(x.shape)


class ScaledMetric:
    """Metric provider ``D_k = clamp(scaling(x, grad), 1/mu_k, mu_k)``.

    Parameters
    ----------
    schedule : BoundSchedule
        Supplies ``mu_k``; the solver's step ``k`` (from 0) uses ``mu_{k+1}``.
    scaling : callable
        ``scaling(x, grad) -> ndarray`` of raw (unclamped) diagonal values.
    """

    def __init__(self, schedule: BoundSchedule, scaling: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        self.schedule = schedule
        self.scaling = scaling
        self.name = f"{schedule.mode}"

    def __call__(self, k: int, x: np.ndarray, grad: np.ndarray) -> DiagonalMetric:
        mu_k = mu_at(self.schedule, k + 1)
        return clamp_to_metric(self.scaling(x, grad), mu_k)


def parse_metric(spec: str):
    """Parse ``identity | fixed:<mu> | summable:<c>`` into ``(kind, BoundSchedule | None)``."""
    spec = spec.strip()
    if spec == "identity":
        return "identity", None
    kind, _, arg = spec.partition(":")
    try:
        value = float(arg)
    except ValueError:
        raise ValueError(f"bad metric spec {spec!r}") from None
    if kind == "fixed":
        return "fixed", BoundSchedule.fixed(value)
    if kind == "summable":
        return "summable", BoundSchedule.summable(value)
    raise ValueError(f"bad metric spec {spec!r}")
