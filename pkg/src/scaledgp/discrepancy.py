"""Regularization parameter selection by the discrepancy principle.

``nu`` is chosen so that ``(2/n) KL(x_nu) = eta``, where ``x_nu`` is an
approximate minimizer of ``KL + nu * HS``.  The outer loop is a secant
iteration on ``nu`` safeguarded by a bracket: whenever the secant point falls
outside the current bracket, the bracket is bisected instead (geometric mean
while the bracket spans more than a decade).  Inner problems are warm-started
from the previous reconstruction.
"""

from __future__ import annotations

import csv
import inspect
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .core import FeasibleRegion, LineSearchParams, StoppingRule, sgp_solve
from .imaging.poisson import CompositeObjective, HSRegularizer, PoissonModel, kl_value


class NoRootError(RuntimeError):
    """The target discrepancy could not be bracketed."""


@dataclass
class DiscrepancyConfig:
    eta: float = 1.0
    eps_inner: float = 5e-8
    eps1: float = 5e-4
    eps2: float = 5e-3
    max_inner_iters: int = 5000
    max_outer_steps: int = 40
    nu_bracket: Tuple[float, float] = (1e-6, 1.0)
    expand_factor: float = 10.0
    max_expansions: int = 12

    def __post_init__(self):
        for name in ("eps_inner", "eps1", "eps2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        lo, hi = self.nu_bracket
        if not 0 < lo < hi:
            raise ValueError("nu_bracket must satisfy 0 < lo < hi")


@dataclass
class InnerResult:
    discrepancy: float
    x: Optional[np.ndarray]
    iterations: int
    f_value: float = float("nan")


@dataclass
class TraceRow:
    outer_step: int
    nu: float
    discrepancy: float
    inner_iters: int
    f_value: float
    seconds: float


@dataclass
class SecantState:
    history: List[Tuple[float, float]] = field(default_factory=list)
    bracket: Optional[Tuple[float, float]] = None
    warm_start: Optional[np.ndarray] = None


@dataclass
class DiscrepancyResult:
    nu: float
    x: Optional[np.ndarray]
    discrepancy: float
    trace: List[TraceRow]
    reason: str
    converged: bool

    @property
    def steps(self) -> int:
        return len(self.trace)

    @property
    def total_inner_iterations(self) -> int:
        return sum(r.inner_iters for r in self.trace)


def discrepancy_value(model: PoissonModel, x) -> float:
    """``(2/n) KL(x)``."""
    return 2.0 * kl_value(model, x) / model.size


def stopping_predicate(nu, nu_prev, disc, config: DiscrepancyConfig) -> Optional[str]:
    """Return the name of the satisfied outer stopping test, or ``None``."""
    gap = abs(disc - config.eta)
    if gap <= config.eps1:
        return "discrepancy"
    if nu_prev is not None and abs(nu - nu_prev) <= config.eps2 * nu and gap <= 10 * config.eps1:
        return "nu_step"
    return None


def inner_solve(objective_factory: Callable[[float], CompositeObjective], nu: float, warm_start,
                config: DiscrepancyConfig, metric_factory, steplength_rule, region: FeasibleRegion,
                ls_params: LineSearchParams = LineSearchParams()):
    """Approximate ``x_nu`` with SGP, stopping on the relative objective change.

    Returns ``(x, record)``.
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    objective = objective_factory(nu)
    stop = StoppingRule(max_iter=config.max_inner_iters, rel_f=config.eps_inner)
    return sgp_solve(objective, region, metric_factory(objective), steplength_rule, ls_params, stop,
                     x0=warm_start)


class ImagingProblem:
    """``nu -> InnerResult`` evaluator for the Poisson deblurring problem.

    Parameters
    ----------
    model : PoissonModel
    reg : HSRegularizer
    metric_factory : callable
        ``metric_factory(objective) -> metric provider`` for each inner solve.
    steplength_rule
        Steplength rule shared (and reset) across inner solves.
    x0 : ndarray
        Initial image for the first inner solve.
    """

    def __init__(self, model: PoissonModel, reg: HSRegularizer, metric_factory, steplength_rule, x0,
                 config: Optional[DiscrepancyConfig] = None, ls_params: LineSearchParams = LineSearchParams()):
        self.model = model
        self.reg = reg
        self.metric_factory = metric_factory
        self.steplength_rule = steplength_rule
        self.x0 = np.asarray(x0, dtype=float)
        self.config = config or DiscrepancyConfig()
        self.ls_params = ls_params
        self.region = FeasibleRegion.nonnegative(model.shape)
        self.records = []

    def objective(self, nu: float) -> CompositeObjective:
        return CompositeObjective(self.model, self.reg, nu)

    def __call__(self, nu: float, warm_start) -> InnerResult:
        start = self.x0 if warm_start is None else warm_start
        x, record = inner_solve(self.objective, nu, start, self.config, self.metric_factory,
                                self.steplength_rule, self.region, self.ls_params)
        self.records.append(record)
        return InnerResult(discrepancy_value(self.model, x), x, record.iterations, float(record.f_values[-1]))


def _as_evaluator(problem):
    """Accept either an ``(nu, warm) -> InnerResult`` evaluator or a plain ``nu -> D(nu)`` function."""
    try:
        takes_warm = len(inspect.signature(problem).parameters) >= 2
    except (TypeError, ValueError):
        takes_warm = True

    def evaluate(nu, warm):
        out = problem(nu, warm) if takes_warm else problem(nu)
        if isinstance(out, InnerResult):
            return out
        return InnerResult(float(out), None, 0)
    return evaluate


def solve_for_nu(problem, config: Optional[DiscrepancyConfig] = None, clock=time.perf_counter) -> DiscrepancyResult:
    """Find ``nu`` with ``D(nu) = eta`` by a bracketed secant iteration.

    ``problem(nu, warm_start) -> InnerResult``; a callable ``problem(nu) -> float``
    is accepted as well (analytic stubs).  Each evaluation counts as one outer
    step.  Raises :class:`NoRootError` when ``eta`` cannot be bracketed.
    """
    config = config or DiscrepancyConfig()
    evaluate = _as_evaluator(problem)
    eta = config.eta
    state = SecantState()
    trace: List[TraceRow] = []
    t0 = clock()
    last = {"x": None, "f": float("nan")}

    def step(nu):
        res = evaluate(nu, state.warm_start)
        if not math.isfinite(res.discrepancy):
            raise RuntimeError(f"non-finite discrepancy at nu={nu}")
        if res.x is not None:
            state.warm_start = res.x
            last["x"] = res.x
        nu_prev = state.history[-1][0] if state.history else None
        state.history.append((nu, res.discrepancy))
        trace.append(TraceRow(len(trace) + 1, nu, res.discrepancy, res.iterations, res.f_value, clock() - t0))
        return res.discrepancy, stopping_predicate(nu, nu_prev, res.discrepancy, config)

    def finish(nu, disc, reason, converged=True):
        return DiscrepancyResult(nu, last["x"], disc, trace, reason, converged)

    lo, hi = config.nu_bracket
    d_lo, reason = step(lo)
    if reason:
        return finish(lo, d_lo, reason)
    d_hi, reason = step(hi)
    if reason:
        return finish(hi, d_hi, reason)

    expansions = 0
    while not (d_lo < eta < d_hi):
        if expansions >= config.max_expansions or len(trace) >= config.max_outer_steps:
            raise NoRootError(
                f"eta={eta} not bracketed after {expansions} expansions "
                f"(D({lo:.3g})={d_lo:.6g}, D({hi:.3g})={d_hi:.6g})"
            )
        expansions += 1
        if d_lo >= eta:
            hi, d_hi = lo, d_lo
            lo = lo / config.expand_factor
            d_lo, reason = step(lo)
            if reason:
                return finish(lo, d_lo, reason)
        else:
            lo, d_lo = hi, d_hi
            hi = hi * config.expand_factor
            d_hi, reason = step(hi)
            if reason:
                return finish(hi, d_hi, reason)
    state.bracket = (lo, hi)

    while len(trace) < config.max_outer_steps:
        (nu_a, d_a), (nu_b, d_b) = state.history[-2], state.history[-1]
        lo, hi = state.bracket
        candidate = None
        if d_b != d_a:
            candidate = nu_b - (d_b - eta) * (nu_b - nu_a) / (d_b - d_a)
        if candidate is None or not (lo < candidate < hi) or not math.isfinite(candidate):
            candidate = math.sqrt(lo * hi) if hi > 10 * lo else 0.5 * (lo + hi)
        disc, reason = step(candidate)
        if disc < eta:
            state.bracket = (candidate, hi)
        else:
            state.bracket = (lo, candidate)
        if reason:
            return finish(candidate, disc, reason)
        lo, hi = state.bracket
        if hi - lo <= config.eps2 * lo and abs(disc - eta) > 10 * config.eps1:
            # Inner solves are inexact and warm-started, so an endpoint measured
            # earlier can disagree with the current path.  Once nu is pinned to
            # eps2 precision a consistent D would be within 10 eps1 of eta; if it
            # is not, step the stale side outward and measure again from the
            # current reconstruction.
            stale_lo = disc >= eta
            widen = 10.0 * config.eps2
            while len(trace) < config.max_outer_steps:
                probe = lo / (1.0 + widen) if stale_lo else hi * (1.0 + widen)
                d_probe, reason = step(probe)
                if reason:
                    return finish(probe, d_probe, reason)
                if stale_lo and d_probe < eta:
                    state.bracket = (probe, hi)
                    break
                if not stale_lo and d_probe >= eta:
                    state.bracket = (lo, probe)
                    break
                lo, hi = (probe, hi) if stale_lo else (lo, probe)
                widen *= 2.0

    nu_last, d_last = state.history[-1]
    return finish(nu_last, d_last, "max_outer_steps", converged=False)


TRACE_COLUMNS = ("outer_step", "nu", "discrepancy", "inner_iters", "f_value", "seconds")


def write_trace(path, trace: List[TraceRow], record_time: bool = True):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace:
            w.writerow([r.outer_step, repr(float(r.nu)), repr(float(r.discrepancy)), r.inner_iters,
                        repr(float(r.f_value)), repr(float(r.seconds if record_time else 0.0))])
