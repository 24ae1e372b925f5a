"""Flat ``key = value`` benchmark configuration with dotted sections.

Both spellings are accepted::

    [problem]
    size = 64

    problem.size = 64

Blank lines and ``#`` comments are ignored.  Every key has a default and
unknown keys are rejected.
"""

from __future__ import annotations

import copy
from pathlib import Path


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "problem.kind": "phantom",
    "problem.size": 64,
    "problem.intensity": 500.0,
    "problem.psf": "gaussian",
    "problem.psf_size": 33,
    "problem.psf_variance": 9.0,
    "problem.background": 10.0,
    "problem.scale": 1.0,
    "problem.seed": 0,
    "problem.noiseless": False,
    "problem.data": "",
    "problem.truth": "",
    "problem.quadratic_n": 10,
    "problem.quadratic_cond": 1e2,
    "model.nu": 0.0415,
    "model.rho": "1.0",
    "solver.methods": "gp,sgp-fixed,sgp",
    "solver.steplength": "bb",
    "solver.fixed_mu": 1e5,
    "solver.summable_c": 1e10,
    "solver.alpha_min": 1e-5,
    "solver.alpha_max": 1e5,
    "solver.alpha_0": 1.3,
    "solver.bb_memory": 3,
    "solver.tau_0": 0.5,
    "solver.beta": 1e-4,
    "solver.delta": 0.5,
    "solver.max_backtracks": 60,
    "run.max_iter": 1500,
    "run.gap_tol": 1e-6,
    "run.groundtruth_iters": 1500,
    "run.groundtruth_method": "sgp",
    "run.record_time": True,
    "run.workers": 1,
    "discrepancy.eta": 1.0,
    "discrepancy.rho": "auto",
    "discrepancy.eps_inner": 5e-8,
    "discrepancy.eps1": 5e-4,
    "discrepancy.eps2": 5e-3,
    "discrepancy.max_inner_iters": 5000,
    "discrepancy.max_outer_steps": 40,
    "discrepancy.nu_lo": 1e-6,
    "discrepancy.nu_hi": 1.0,
    "output.dir": "out",
    "output.cache_dir": "",
    "output.images": True,
}


def _coerce(key, raw, default):
    text = raw.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1]
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError
        if isinstance(default, int):
            return int(float(text)) if float(text).is_integer() else int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw.strip()!r} as {type(default).__name__}") from None
    return text


def parse_config(text: str, base=None) -> dict:
    cfg = copy.deepcopy(DEFAULTS if base is None else base)
    section = ""
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        full = f"{section}.{key}" if section and "." not in key else key
        if full not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {full!r}")
        cfg[full] = _coerce(full, value, DEFAULTS[full])
    return cfg


def load_config(path=None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def dump_config(cfg: dict) -> str:
    """Serialize as sorted dotted keys; ``parse_config(dump_config(c)) == c``."""
    lines = []
    for key in sorted(cfg):
        value = cfg[key]
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def methods_of(cfg: dict):
    return [m.strip() for m in str(cfg["solver.methods"]).split(",") if m.strip()]
