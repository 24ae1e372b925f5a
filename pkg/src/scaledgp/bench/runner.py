"""Benchmark runs: problem construction, solver variants, ground truth and CSV output."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from ..core import FeasibleRegion, LineSearchParams, RunRecord, StoppingRule, sgp_solve
from ..discrepancy import DiscrepancyConfig, ImagingProblem, solve_for_nu, write_trace
from ..imaging import io as imgio
from ..imaging.operators import gaussian_psf
from ..imaging.phantoms import ellipse_phantom, simulate_problem
from ..imaging.poisson import CompositeObjective, HSRegularizer, PoissonModel, SplitGradientScaling
from ..metric import IdentityMetric, ScaledMetric, parse_metric
from ..steplength import SteplengthConfig, parse_steplength
from ..testing import kkt_enumeration, random_box_qp
from .config import ConfigError, dump_config, methods_of

log = logging.getLogger(__name__)

METHOD_ALIASES = {"gp": "identity", "sgp-fixed": "fixed", "sgp*": "fixed", "sgp": "summable"}


# ---------------------------------------------------------------------------
# problems
# ---------------------------------------------------------------------------

@dataclass
class Problem:
    kind: str
    objective: object
    region: FeasibleRegion
    x0: np.ndarray
    truth: np.ndarray
    scaling: object
    model: Optional[PoissonModel] = None
    exact: Optional[tuple] = None  # (x, f) when a closed-form optimum is known


def initial_image(model: PoissonModel) -> np.ndarray:
    """Flat image carrying the background-subtracted mean flux."""
    level = max(float(model.data.mean()) - model.background, 1e-3)
    return np.full(model.shape, level)


def resolve_rho(spec, data) -> float:
    spec = str(spec).strip()
    if spec == "auto":
        return 1e-4 * float(np.max(data))
    try:
        return float(spec)
    except ValueError:
        raise ConfigError(f"bad rho {spec!r}; expected a number or 'auto'") from None


def build_model(cfg):
    """Simulate (or load) the Poisson data; returns ``(model, truth, psf)``."""
    if cfg["problem.psf"] == "gaussian":
        psf = gaussian_psf(cfg["problem.psf_size"], cfg["problem.psf_variance"])
    else:
        psf = imgio.read_image(cfg["problem.psf"])
    if cfg["problem.data"]:
        from ..imaging.operators import BlurOperator

        data = imgio.read_image(cfg["problem.data"])
        truth = imgio.read_image(cfg["problem.truth"]) if cfg["problem.truth"] else np.zeros_like(data)
        b = cfg["problem.background"] * cfg["problem.scale"]
        return PoissonModel(BlurOperator(psf, data.shape), data, b), truth, psf
    obj = ellipse_phantom(cfg["problem.size"], cfg["problem.intensity"])
    model, truth = simulate_problem(obj, psf, cfg["problem.background"], cfg["problem.scale"],
                                    cfg["problem.seed"], cfg["problem.noiseless"])
    return model, truth, psf


def build_problem(cfg, rho_key: str = "model.rho", nu: Optional[float] = None) -> Problem:
    kind = cfg["problem.kind"]
    if kind == "quadratic":
        rng = np.random.default_rng(cfg["problem.seed"])
        objective, region = random_box_qp(rng, cfg["problem.quadratic_n"], cfg["problem.quadratic_cond"])
        x_star, f_star = kkt_enumeration(objective.hessian, objective.linear, region.lower)
        inv_diag = 1.0 / np.diag(objective.hessian)
        x0 = region.lower + 1.0
        return Problem(kind, objective, region, x0, x_star, lambda x, g: inv_diag, exact=(x_star, f_star))
    if kind != "phantom":
        raise ConfigError(f"unknown problem.kind {kind!r}")
    model, truth, _ = build_model(cfg)
    reg = HSRegularizer(resolve_rho(cfg[rho_key], model.data))
    objective = CompositeObjective(model, reg, cfg["model.nu"] if nu is None else nu)
    region = FeasibleRegion.nonnegative(model.shape)
    return Problem(kind, objective, region, initial_image(model), truth,
                   SplitGradientScaling(reg, objective.nu), model=model)


# ---------------------------------------------------------------------------
# solver variants
# ---------------------------------------------------------------------------

def method_metric_spec(method: str, cfg) -> str:
    base = METHOD_ALIASES.get(method, method)
    if base == "fixed":
        return f"fixed:{cfg['solver.fixed_mu']!r}"
    if base == "summable":
        return f"summable:{cfg['solver.summable_c']!r}"
    return base


def make_metric(method: str, cfg, scaling):
    try:
        kind, schedule = parse_metric(method_metric_spec(method, cfg))
    except ValueError as exc:
        raise ConfigError(f"unknown method {method!r}: {exc}") from None
    if kind == "identity":
        return IdentityMetric()
    return ScaledMetric(schedule, scaling)


def make_steplength(cfg):
    sl_cfg = SteplengthConfig(cfg["solver.alpha_min"], cfg["solver.alpha_max"], cfg["solver.alpha_0"],
                              cfg["solver.bb_memory"], cfg["solver.tau_0"])
    try:
        return parse_steplength(cfg["solver.steplength"], sl_cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def ls_params(cfg) -> LineSearchParams:
    return LineSearchParams(cfg["solver.beta"], cfg["solver.delta"], cfg["solver.max_backtracks"])


def validate(cfg):
    """Raise :class:`ConfigError` for inconsistent settings before any work is done."""
    try:
        for m in methods_of(cfg):
            make_metric(m, cfg, None)
        make_steplength(cfg)
        ls_params(cfg)
        DiscrepancyConfig(cfg["discrepancy.eta"], cfg["discrepancy.eps_inner"], cfg["discrepancy.eps1"],
                          cfg["discrepancy.eps2"], cfg["discrepancy.max_inner_iters"],
                          cfg["discrepancy.max_outer_steps"],
                          (cfg["discrepancy.nu_lo"], cfg["discrepancy.nu_hi"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg["problem.kind"] not in ("phantom", "quadratic"):
        raise ConfigError(f"unknown problem.kind {cfg['problem.kind']!r}")
    if not methods_of(cfg):
        raise ConfigError("solver.methods is empty")


def run_method(problem: Problem, method: str, cfg, max_iter: int, clock=time.perf_counter):
    metric = make_metric(method, cfg, problem.scaling)
    stop = StoppingRule(max_iter=max_iter)
    return sgp_solve(problem.objective, problem.region, metric, make_steplength(cfg), ls_params(cfg), stop,
                     x0=problem.x0, clock=clock)


# ---------------------------------------------------------------------------
# ground truth
# ---------------------------------------------------------------------------

_GT_KEYS = ("problem.", "model.", "solver.")


def problem_hash(cfg) -> str:
    relevant = {k: v for k, v in cfg.items() if k.startswith(_GT_KEYS) and k != "solver.methods"}
    relevant["run.groundtruth_iters"] = cfg["run.groundtruth_iters"]
    relevant["run.groundtruth_method"] = cfg["run.groundtruth_method"]
    for key in ("problem.data", "problem.truth", "problem.psf"):
        path = relevant.get(key)
        if path and path != "gaussian" and Path(path).exists():
            relevant[key] = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return hashlib.sha256(dump_config(relevant).encode()).hexdigest()[:16]


@dataclass
class GroundTruth:
    x: np.ndarray
    f: float
    iterations: int
    key: str


def ground_truth(problem: Problem, cfg, cache_dir=None) -> GroundTruth:
    """Reference minimizer: closed form for quadratics, otherwise a long run (cached)."""
    key = problem_hash(cfg)
    if problem.exact is not None:
        x, f = problem.exact
        return GroundTruth(x, float(problem.objective.value(x)), 0, key)
    path = Path(cache_dir) / f"groundtruth-{key}.npz" if cache_dir else None
    if path is not None and path.exists():
        with np.load(path) as data:
            return GroundTruth(data["x"], float(data["f"]), int(data["iterations"]), key)
    iters = cfg["run.groundtruth_iters"]
    x, record = run_method(problem, cfg["run.groundtruth_method"], cfg, iters)
    gt = GroundTruth(x, float(record.f_values[-1]), record.iterations, key)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, x=gt.x, f=gt.f, iterations=gt.iterations)
    return gt


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

ITER_COLUMNS = ("k", "rel_gap", "f", "lambda", "alpha", "mu", "rate_envelope", "seconds")
SUMMARY_COLUMNS = ("method", "status", "reason", "iterations", "iters_to_gap", "final_rel_gap",
                   "rel_error", "seconds")


def _fmt(v) -> str:
    return repr(float(v))


def relative_gap(f, f_ref):
    f = np.asarray(f, dtype=float)
    if f_ref == 0:
        return f - f_ref
    return (f - f_ref) / abs(f_ref)


def rate_envelope(f, f_ref) -> np.ndarray:
    """Running maximum of ``k * (f_k - f_ref)``."""
    f = np.asarray(f, dtype=float)
    return np.maximum.accumulate(np.arange(f.size) * (f - f_ref)) if f.size else f


def iterations_to_gap(gap, tol) -> Optional[int]:
    hit = np.nonzero(np.asarray(gap) <= tol)[0]
    return int(hit[0]) if hit.size else None


def write_iteration_csv(path, record: RunRecord, f_ref: float, record_time: bool = True):
    f = record.f_values
    gap = relative_gap(f, f_ref)
    env = rate_envelope(f, f_ref)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ITER_COLUMNS)
        for i, e in enumerate(record.entries):
            w.writerow([e.k, _fmt(gap[i]), _fmt(e.f), _fmt(e.lam), _fmt(e.alpha), _fmt(e.mu), _fmt(env[i]),
                        _fmt(e.seconds if record_time else 0.0)])


def read_iteration_csv(path) -> List[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "k" else float(v)) for k, v in row.items()} for row in rows]


@dataclass
class MethodResult:
    method: str
    status: str
    reason: str = ""
    record: Optional[RunRecord] = None
    x: Optional[np.ndarray] = None
    iters_to_gap: Optional[int] = None
    final_rel_gap: float = math.nan
    rel_error: float = math.nan
    seconds: float = 0.0


def relative_error(x, truth) -> float:
    den = float(np.linalg.norm(truth))
    return float(np.linalg.norm(x - truth) / den) if den > 0 else float(np.linalg.norm(x - truth))


def write_summary(path, results: List[MethodResult], record_time: bool = True):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in results:
            iters = r.record.iterations if r.record is not None else 0
            w.writerow([r.method, r.status, r.reason, iters, "" if r.iters_to_gap is None else r.iters_to_gap,
                        _fmt(r.final_rel_gap), _fmt(r.rel_error), _fmt(r.seconds if record_time else 0.0)])


PLOT_COLUMNS = ("method", "k", "f", "rel_gap", "lambda", "alpha", "mu")


def emit_plotdata(path, records: Dict[str, RunRecord], f_ref: float):
    """Long-format CSV of all runs, sorted by ``(method, k)``."""
    rows = []
    for method, record in records.items():
        gap = relative_gap(record.f_values, f_ref) if len(record) else []
        for i, e in enumerate(record.entries):
            rows.append((method, e.k, e.f, gap[i], e.lam, e.alpha, e.mu))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for m, k, *vals in rows:
            w.writerow([m, k] + [_fmt(v) for v in vals])
    return len(rows)


def read_plotdata(path) -> List[tuple]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [(r[0], int(r[1]), *map(float, r[2:])) for r in reader]


def safe_name(method: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in method)


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def _bench_one(args):
    problem, method, cfg, f_ref, tol = args
    t0 = time.perf_counter()
    try:
        x, record = run_method(problem, method, cfg, cfg["run.max_iter"])
        record.validate()
    except Exception as exc:  # recorded per variant, the run continues
        log.error("method %s failed: %s", method, exc)
        return MethodResult(method, "failed", f"{type(exc).__name__}: {exc}", seconds=time.perf_counter() - t0)
    gap = relative_gap(record.f_values, f_ref)
    return MethodResult(method, "ok", record.reason, record, x, iterations_to_gap(gap, tol), float(gap[-1]),
                        relative_error(x, problem.truth), time.perf_counter() - t0)


def run_benchmark(cfg, out_dir=None, methods=None):
    """Run every solver variant and write per-method CSVs, ``summary.csv`` and ``plotdata.csv``.

    Returns ``(results, ground_truth)``.
    """
    validate(cfg)
    out = Path(out_dir or cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    cache = Path(cfg["output.cache_dir"]) if cfg["output.cache_dir"] else out / "cache"
    problem = build_problem(cfg)
    gt = ground_truth(problem, cfg, cache)
    methods = methods or methods_of(cfg)
    jobs = [(problem, m, cfg, gt.f, cfg["run.gap_tol"]) for m in methods]
    if cfg["run.workers"] > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg["run.workers"]) as pool:
            results = list(pool.map(_bench_one, jobs))
    else:
        results = [_bench_one(j) for j in jobs]
    record_time = cfg["run.record_time"]
    for r in results:
        if r.record is not None:
            write_iteration_csv(out / f"{safe_name(r.method)}.csv", r.record, gt.f, record_time)
    write_summary(out / "summary.csv", results, record_time)
    emit_plotdata(out / "plotdata.csv", {r.method: r.record for r in results if r.record is not None}, gt.f)
    return results, gt


@dataclass
class AutoparamResult:
    method: str
    status: str
    reason: str = ""
    result: object = None
    rel_error: float = math.nan
    seconds: float = 0.0


AUTOPARAM_COLUMNS = ("method", "status", "reason", "k", "k_tot", "nu", "discrepancy", "rel_error", "seconds")


def discrepancy_config(cfg) -> DiscrepancyConfig:
    return DiscrepancyConfig(cfg["discrepancy.eta"], cfg["discrepancy.eps_inner"], cfg["discrepancy.eps1"],
                             cfg["discrepancy.eps2"], cfg["discrepancy.max_inner_iters"],
                             cfg["discrepancy.max_outer_steps"],
                             (cfg["discrepancy.nu_lo"], cfg["discrepancy.nu_hi"]))


def run_autoparam(cfg, out_dir=None, methods=None):
    """Discrepancy-principle selection of ``nu`` for every method, with per-step traces and a summary table."""
    validate(cfg)
    if cfg["problem.kind"] != "phantom":
        raise ConfigError("autoparam needs problem.kind = phantom")
    out = Path(out_dir or cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    model, truth, _ = build_model(cfg)
    reg = HSRegularizer(resolve_rho(cfg["discrepancy.rho"], model.data))
    dcfg = discrepancy_config(cfg)
    record_time = cfg["run.record_time"]
    results = []
    for method in methods or methods_of(cfg):
        def metric_factory(objective, method=method):
            return make_metric(method, cfg, SplitGradientScaling(reg, objective.nu))

        problem = ImagingProblem(model, reg, metric_factory, make_steplength(cfg), initial_image(model), dcfg,
                                 ls_params(cfg))
        t0 = time.perf_counter()
        try:
            res = solve_for_nu(problem, dcfg)
        except Exception as exc:
            log.error("autoparam %s failed: %s", method, exc)
            results.append(AutoparamResult(method, "failed", f"{type(exc).__name__}: {exc}",
                                           seconds=time.perf_counter() - t0))
            continue
        ar = AutoparamResult(method, "ok" if res.converged else "not_converged", res.reason, res,
                             relative_error(res.x, truth), time.perf_counter() - t0)
        results.append(ar)
        write_trace(out / f"autoparam_{safe_name(method)}.csv", res.trace, record_time)
        if cfg["output.images"]:
            imgio.write_raw(out / f"reconstruction_{safe_name(method)}.sgi", res.x)
    with open(out / "autoparam_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AUTOPARAM_COLUMNS)
        for r in results:
            res = r.result
            w.writerow([r.method, r.status, r.reason, res.steps if res else 0,
                        res.total_inner_iterations if res else 0, _fmt(res.nu if res else math.nan),
                        _fmt(res.discrepancy if res else math.nan), _fmt(r.rel_error),
                        _fmt(r.seconds if record_time else 0.0)])
    return results


def run_simulate(cfg, out_dir=None):
    out = Path(out_dir or cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    model, truth, psf = build_model(cfg)
    for name, img in (("data", model.data), ("truth", truth), ("psf", psf)):
        imgio.write_raw(out / f"{name}.sgi", img)
        imgio.write_pgm(out / f"{name}.pgm", img)
    return model, truth


def run_groundtruth(cfg, out_dir=None):
    validate(cfg)
    out = Path(out_dir or cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    cache = Path(cfg["output.cache_dir"]) if cfg["output.cache_dir"] else out / "cache"
    problem = build_problem(cfg)
    gt = ground_truth(problem, cfg, cache)
    if gt.x.ndim == 2:
        imgio.write_raw(out / "groundtruth.sgi", gt.x)
        imgio.write_pgm(out / "groundtruth.pgm", gt.x)
    (out / "groundtruth.txt").write_text(
        f"key = {gt.key}\nf = {gt.f!r}\niterations = {gt.iterations}\n"
    )
    return gt
