"""Scaled gradient projection over boxes.

The iteration is

    y_k = clamp(x_k - alpha_k D_k grad f(x_k), lower, upper)
    d_k = y_k - x_k
    x_{k+1} = x_k + lambda_k d_k

with ``lambda_k`` from Armijo backtracking along the segment.  For a diagonal
``D_k`` and a box, the projection in the ``D_k^{-1}`` norm is the
componentwise clamp, so every step costs O(n) plus the oracle calls.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import _kernels
from .metric import DiagonalMetric, IdentityMetric, ThetaMonitor, theta_update

log = logging.getLogger(__name__)


class InvalidInput(ValueError):
    """Non-finite data or an infeasible point handed to the solver."""


class ContractViolation(ValueError):
    """A caller broke an operation precondition (e.g. a non-descent direction)."""


class LineSearchFailure(RuntimeError):
    """Backtracking exhausted its budget; usually a wrong gradient oracle."""


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------

class FeasibleRegion:
    """Box ``{x : lower <= x <= upper}``; bounds may be infinite."""

    def __init__(self, lower, upper, shape=None):
        if shape is not None:
            lower = np.broadcast_to(np.asarray(lower, dtype=float), shape)
            upper = np.broadcast_to(np.asarray(upper, dtype=float), shape)
        self.lower = np.array(lower, dtype=float)
        self.upper = np.array(upper, dtype=float)
        if self.lower.shape != self.upper.shape:
            raise ValueError("lower and upper bounds differ in shape")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("bounds must not be NaN")
        if np.any(self.lower > self.upper):
            raise ValueError("empty box: some lower bound exceeds its upper bound")

    @classmethod
    def nonnegative(cls, shape) -> "FeasibleRegion":
        return cls(0.0, np.inf, shape=shape)

    @classmethod
    def unbounded(cls, shape) -> "FeasibleRegion":
        return cls(-np.inf, np.inf, shape=shape)

    @property
    def shape(self):
        return self.lower.shape

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(x, self.lower), self.upper)

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


class SmoothObjective:
    """Value and gradient oracles for a differentiable objective.

    Subclasses may override :meth:`value_and_gradient` to share work between
    the two oracles.
    """

    def __init__(self, value: Callable, gradient: Callable, dimension: Optional[int] = None,
                 lipschitz: Optional[float] = None):
        self._value = value
        self._gradient = gradient
        self.dimension = dimension
        self.lipschitz = lipschitz

    def value(self, x: np.ndarray) -> float:
        return float(self._value(x))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._gradient(x), dtype=float)

    def value_and_gradient(self, x: np.ndarray):
        return self.value(x), self.gradient(x)


class QuadraticObjective(SmoothObjective):
    """``f(x) = 0.5 x'Hx + c'x + offset`` with ``L = lambda_max(H)``."""

    def __init__(self, hessian, linear, offset: float = 0.0):
        self.hessian = np.asarray(hessian, dtype=float)
        self.linear = np.asarray(linear, dtype=float)
        self.offset = float(offset)
        eig = np.linalg.eigvalsh(self.hessian)
        super().__init__(self._f, self._g, dimension=self.linear.size, lipschitz=float(eig[-1]))

    def _f(self, x):
        return 0.5 * x @ self.hessian @ x + self.linear @ x + self.offset

    def _g(self, x):
        return self.hessian @ x + self.linear


@dataclass(frozen=True)
class LineSearchParams:
    beta: float = 1e-4
    delta: float = 0.5
    max_backtracks: int = 60

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be positive")


@dataclass
class IterateState:
    k: int
    x: np.ndarray
    y: np.ndarray
    d: np.ndarray
    alpha: float
    lam: float
    metric: DiagonalMetric


# ---------------------------------------------------------------------------
# run bookkeeping
# ---------------------------------------------------------------------------

@dataclass
class IterationEntry:
    k: int
    f: float
    lam: float
    alpha: float
    dnorm: float
    mu: float
    seconds: float
    directional: float = 0.0
    backtracks: int = 0


@dataclass
class RunRecord:
    """Per-iteration trace of a solver run.

    Entry ``k`` holds ``f(x_k)``; the step taken from ``x_k`` (its ``lambda``,
    ``alpha``, ``|d|``, ``mu``) is stored on the same entry.  The final entry
    holds the last iterate, with zero step data.
    """

    entries: List[IterationEntry] = field(default_factory=list)
    reason: str = ""
    theta: Optional[ThetaMonitor] = None

    def __len__(self):
        return len(self.entries)

    @property
    def iterations(self) -> int:
        return max(len(self.entries) - 1, 0)

    @property
    def f_values(self) -> np.ndarray:
        return np.array([e.f for e in self.entries])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(e, name) for e in self.entries])

    def is_monotone(self) -> bool:
        f = self.f_values
        return bool(np.all(np.diff(f) <= 0))

    def validate(self):
        if not self.is_monotone():
            bad = int(np.argmax(np.diff(self.f_values) > 0))
            raise InvalidInput(f"run record is not monotone at entry {bad + 1}")


# ---------------------------------------------------------------------------
# stopping rules
# ---------------------------------------------------------------------------

class StoppingRule:
    """Composable termination test.  ``check`` returns a reason string or ``None``.

    Called after every accepted step with the new iterate index ``k``, the new
    and previous objective values and the stationarity-residual callback.
    """

    def __init__(self, max_iter: int = 1000, rel_f: Optional[float] = None,
                 stationarity: Optional[float] = None, callback: Optional[Callable] = None):
        self.max_iter = max_iter
        self.rel_f = rel_f
        self.stationarity = stationarity
        self.callback = callback

    def check(self, k: int, f_new: float, f_old: float, residual: Callable[[], float], x: np.ndarray):
        if self.rel_f is not None and abs(f_new - f_old) <= self.rel_f * abs(f_new):
            return "rel_f"
        if self.stationarity is not None and residual() <= self.stationarity:
            return "stationarity"
        if self.callback is not None:
            reason = self.callback(k, x, f_new)
            if reason:
                return reason
        if k >= self.max_iter:
            return "max_iter"
        return None


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _check_alpha(alpha):
    if not alpha > 0:
        raise ValueError(f"steplength alpha must be positive, got {alpha}")


def scaled_projection(x, grad, alpha, metric: DiagonalMetric, region: FeasibleRegion):
    """Clamp of ``x - alpha * D * grad`` onto the box."""
    _check_alpha(alpha)
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise InvalidInput("gradient has non-finite entries")
    return _kernels.clamp_step(x, grad, alpha, metric.diag, region.lower, region.upper)


def descent_direction(x, grad, alpha, metric: DiagonalMetric, region: FeasibleRegion):
    """Return ``(y, d, grad'd)`` for the scaled projected step."""
    y = scaled_projection(x, grad, alpha, metric, region)
    d = y - x
    return y, d, float(np.sum(grad * d))


def armijo_linesearch(f, x, d, directional, params: LineSearchParams = LineSearchParams(), f_x=None):
    """Backtrack ``lambda`` over ``1, delta, delta**2, ...`` until sufficient decrease.

    Returns ``(lambda, f(x + lambda d), backtracks)``.
    """
    if not directional < 0:
        raise ContractViolation(f"direction is not a descent direction (grad'd = {directional})")
    fx = f(x) if f_x is None else f_x
    lam = 1.0
    for m in range(params.max_backtracks + 1):
        f_new = f(x + lam * d)
        if f_new <= fx + params.beta * lam * directional:
            return lam, f_new, m
        lam *= params.delta
    raise LineSearchFailure(
        f"no sufficient decrease after {params.max_backtracks} backtracks (grad'd = {directional:.3e})"
    )


def stationarity_residual(x, objective: SmoothObjective, region: FeasibleRegion, grad=None) -> float:
    """``|x - clamp(x - grad f(x))|``; zero exactly at stationary points of the box problem."""
    g = objective.gradient(x) if grad is None else grad
    return float(np.linalg.norm(x - region.project(x - g)))


def _check_start(objective, region, x0):
    x0 = np.array(x0, dtype=float)
    if x0.shape != region.shape:
        raise InvalidInput(f"x0 shape {x0.shape} does not match region shape {region.shape}")
    if not region.contains(x0):
        raise InvalidInput("x0 is not in the feasible region")
    f0, g0 = objective.value_and_gradient(x0)
    if not math.isfinite(f0) or not np.all(np.isfinite(g0)):
        raise InvalidInput("objective is not finite at x0")
    return x0, f0, g0


def sgp_solve(objective: SmoothObjective, region: FeasibleRegion, metric_provider, steplength_rule,
              ls_params: LineSearchParams = LineSearchParams(), stop: Optional[StoppingRule] = None,
              x0=None, check_descent: bool = False, track_theta: bool = True, clock=time.perf_counter):
    """Run the scaled gradient projection method.

    Parameters
    ----------
    objective : SmoothObjective
    region : FeasibleRegion
    metric_provider : callable
        ``metric_provider(k, x, grad) -> DiagonalMetric`` for ``k = 0, 1, ...``.
        :class:`~scaledgp.metric.IdentityMetric` gives plain gradient projection.
    steplength_rule
        Object with ``reset()`` and ``next(k, x, grad, metric) -> alpha``.
    ls_params : LineSearchParams
    stop : StoppingRule
    x0 : array_like
        Feasible starting point.
    check_descent : bool
        Assert the descent certificate ``grad'd <= -|d|^2_{D^-1} / alpha`` at
        every step.

    Returns
    -------
    x : ndarray
        Final iterate.
    record : RunRecord
    """
    stop = stop or StoppingRule()
    x, fx, g = _check_start(objective, region, x0)
    steplength_rule.reset()
    monitor = None
    if track_theta and getattr(metric_provider, "schedule", None) is not None:
        monitor = ThetaMonitor.for_schedule(metric_provider.schedule, warn=False)
    record = RunRecord(theta=monitor)
    t0 = clock()
    k = 0
    while True:
        metric = metric_provider(k, x, g)
        if monitor is not None:
            theta_update(monitor, metric.mu)
        alpha = steplength_rule.next(k, x, g, metric)
        y, d, directional = descent_direction(x, g, alpha, metric, region)
        if check_descent:
            bound = -metric.inverse_norm2(d) / alpha
            if directional > bound + 1e-10 * max(1.0, abs(bound)):
                raise ContractViolation(f"descent certificate fails at k={k}: {directional} > {bound}")
        if not np.any(d) or directional >= 0:
            # d == 0 iff x is stationary; a nonnegative certificate with d != 0
            # can only come from rounding at a stationary point
            record.entries.append(IterationEntry(k, fx, 0.0, alpha, 0.0, metric.mu, clock() - t0))
            record.reason = "stationary"
            break
        lam, f_new, backtracks = armijo_linesearch(objective.value, x, d, directional, ls_params, f_x=fx)
        record.entries.append(
            IterationEntry(k, fx, lam, alpha, float(np.linalg.norm(d)), metric.mu, clock() - t0,
                           directional, backtracks)
        )
        x_new = x + lam * d
        stalled = np.array_equal(x_new, x)
        x = x_new
        f_old, fx = fx, f_new
        g = objective.gradient(x)
        k += 1
        # an accepted step that leaves x unchanged bit-for-bit repeats forever
        reason = "stalled" if stalled else stop.check(
            k, fx, f_old, lambda: stationarity_residual(x, objective, region, g), x)
        if reason:
            record.entries.append(IterationEntry(k, fx, 0.0, 0.0, 0.0, 0.0, clock() - t0))
            record.reason = reason
            break
    log.debug("sgp_solve stopped after %d iterations (%s)", record.iterations, record.reason)
    return x, record


def gp_solve(objective: SmoothObjective, region: FeasibleRegion, alpha: float,
             ls_params: LineSearchParams = LineSearchParams(), stop: Optional[StoppingRule] = None, x0=None):
    """Plain gradient projection with constant steplength and Armijo backtracking.

    Kept separate from :func:`sgp_solve` as a reference loop; with the identity
    metric and a constant steplength both produce the same iterates.
    """
    _check_alpha(alpha)
    stop = stop or StoppingRule()
    x, fx, g = _check_start(objective, region, x0)
    xs = [x.copy()]
    k = 0
    while True:
        y = np.minimum(np.maximum(x - alpha * g, region.lower), region.upper)
        d = y - x
        directional = float(np.sum(g * d))
        if not np.any(d) or directional >= 0:
            break
        lam, f_new, _ = armijo_linesearch(objective.value, x, d, directional, ls_params, f_x=fx)
        x = x + lam * d
        f_old, fx = fx, f_new
        g = objective.gradient(x)
        xs.append(x.copy())
        k += 1
        if stop.check(k, fx, f_old, lambda: stationarity_residual(x, objective, region, g), x):
            break
    return x, xs
