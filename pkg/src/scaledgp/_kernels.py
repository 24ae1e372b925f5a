"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba versions are used when numba imports cleanly and the environment
variable ``SCALEDGP_DISABLE_NUMBA`` is unset (or ``0``).  Both paths are always
importable under the ``*_numpy`` / ``*_numba`` names so they can be compared
directly in tests and benchmarks.

All numba kernels are serial: reductions run in a fixed order so that results
are reproducible run to run.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_disabled() -> bool:
    return os.environ.get("SCALEDGP_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def _njit(fn):
    if not HAVE_NUMBA:
        return None
    return numba.njit(cache=True, fastmath=False)(fn)


# ---------------------------------------------------------------------------
# box clamp of a scaled gradient step
# ---------------------------------------------------------------------------

def clamp_step_numpy(x, grad, alpha, diag, lower, upper):
    return np.minimum(np.maximum(x - alpha * diag * grad, lower), upper)


def _clamp_step_loop(x, grad, alpha, diag, lower, upper):
    out = np.empty_like(x)
    for i in range(x.size):
        v = x[i] - alpha * diag[i] * grad[i]
        if v < lower[i]:
            v = lower[i]
        if v > upper[i]:
            v = upper[i]
        out[i] = v
    return out


_clamp_step_jit = _njit(_clamp_step_loop)


def clamp_step_numba(x, grad, alpha, diag, lower, upper):
    shape = x.shape
    out = _clamp_step_jit(
        np.ascontiguousarray(x).ravel(),
        np.ascontiguousarray(grad).ravel(),
        float(alpha),
        np.ascontiguousarray(diag).ravel(),
        np.ascontiguousarray(lower).ravel(),
        np.ascontiguousarray(upper).ravel(),
    )
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# generalized Kullback-Leibler terms
# ---------------------------------------------------------------------------

def kl_terms_numpy(g, model):
    """Return (KL value, g / model) with the 0 log 0 = 0 convention."""
    pos = g > 0
    ratio = np.zeros_like(model)
    np.divide(g, model, out=ratio, where=pos)
    logs = np.zeros_like(model)
    np.log(ratio, out=logs, where=pos)
    value = float(np.sum(g * logs + model - g))
    return value, ratio


def _kl_terms_loop(g, model):
    ratio = np.zeros_like(model)
    total = 0.0
    for i in range(g.size):
        m = model[i]
        gi = g[i]
        if gi > 0.0:
            r = gi / m
            ratio[i] = r
            total += gi * math.log(r) + m - gi
        else:
            total += m - gi
    return total, ratio


_kl_terms_jit = _njit(_kl_terms_loop)


def kl_terms_numba(g, model):
    shape = model.shape
    value, ratio = _kl_terms_jit(np.ascontiguousarray(g).ravel(), np.ascontiguousarray(model).ravel())
    return float(value), ratio.reshape(shape)


# ---------------------------------------------------------------------------
# hypersurface regularizer: forward differences with periodic wrap
# ---------------------------------------------------------------------------
#
# With dh_i = x[r, c+1] - x[r, c], dv_i = x[r+1, c] - x[r, c] and
# den_i = sqrt(dh_i^2 + dv_i^2 + rho^2), the gradient of sum(den) at pixel m is
#
#   x_m (2/den_m + 1/den_left + 1/den_up)
#     - [(x_right + x_down)/den_m + x_left/den_left + x_up/den_up]
#
# and the split returns the first line as V and the bracket as U.

def hs_value_numpy(x, rho):
    dh = np.roll(x, -1, axis=1) - x
    dv = np.roll(x, -1, axis=0) - x
    return float(np.sum(np.sqrt(dh * dh + dv * dv + rho * rho)))


def hs_split_numpy(x, rho):
    """Return (value, V, U) for the hypersurface functional."""
    right = np.roll(x, -1, axis=1)
    down = np.roll(x, -1, axis=0)
    dh = right - x
    dv = down - x
    den = np.sqrt(dh * dh + dv * dv + rho * rho)
    inv = 1.0 / den
    inv_left = np.roll(inv, 1, axis=1)
    inv_up = np.roll(inv, 1, axis=0)
    left = np.roll(x, 1, axis=1)
    up = np.roll(x, 1, axis=0)
    v = x * (2.0 * inv + inv_left + inv_up)
    u = (right + down) * inv + left * inv_left + up * inv_up
    return float(np.sum(den)), v, u


def hs_gradient_numpy(x, rho):
    """Return (value, gradient) as the negative divergence of the normalized field."""
    dh = np.roll(x, -1, axis=1) - x
    dv = np.roll(x, -1, axis=0) - x
    den = np.sqrt(dh * dh + dv * dv + rho * rho)
    ph = dh / den
    pv = dv / den
    grad = (np.roll(ph, 1, axis=1) - ph) + (np.roll(pv, 1, axis=0) - pv)
    return float(np.sum(den)), grad


def _hs_inv_den_loop(x, rho):
    rows, cols = x.shape
    inv = np.empty_like(x)
    total = 0.0
    r2 = rho * rho
    for r in range(rows):
        rn = r + 1 if r + 1 < rows else 0
        for c in range(cols):
            cn = c + 1 if c + 1 < cols else 0
            dh = x[r, cn] - x[r, c]
            dv = x[rn, c] - x[r, c]
            d = math.sqrt(dh * dh + dv * dv + r2)
            total += d
            inv[r, c] = 1.0 / d
    return total, inv


_hs_inv_den = _njit(_hs_inv_den_loop) or _hs_inv_den_loop


def _hs_split_loop(x, rho):
    rows, cols = x.shape
    total, inv = _hs_inv_den(x, rho)
    v = np.empty_like(x)
    u = np.empty_like(x)
    for r in range(rows):
        rn = r + 1 if r + 1 < rows else 0
        rp = r - 1 if r > 0 else rows - 1
        for c in range(cols):
            cn = c + 1 if c + 1 < cols else 0
            cp = c - 1 if c > 0 else cols - 1
            i0 = inv[r, c]
            il = inv[r, cp]
            iu = inv[rp, c]
            v[r, c] = x[r, c] * (2.0 * i0 + il + iu)
            u[r, c] = (x[r, cn] + x[rn, c]) * i0 + x[r, cp] * il + x[rp, c] * iu
    return total, v, u


def _hs_gradient_loop(x, rho):
    rows, cols = x.shape
    ph = np.empty_like(x)
    pv = np.empty_like(x)
    total = 0.0
    r2 = rho * rho
    for r in range(rows):
        rn = r + 1 if r + 1 < rows else 0
        for c in range(cols):
            cn = c + 1 if c + 1 < cols else 0
            dh = x[r, cn] - x[r, c]
            dv = x[rn, c] - x[r, c]
            d = math.sqrt(dh * dh + dv * dv + r2)
            total += d
            ph[r, c] = dh / d
            pv[r, c] = dv / d
    grad = np.empty_like(x)
    for r in range(rows):
        rp = r - 1 if r > 0 else rows - 1
        for c in range(cols):
            cp = c - 1 if c > 0 else cols - 1
            grad[r, c] = (ph[r, cp] - ph[r, c]) + (pv[rp, c] - pv[r, c])
    return total, grad


def _hs_value_loop(x, rho):
    rows, cols = x.shape
    total = 0.0
    r2 = rho * rho
    for r in range(rows):
        rn = r + 1 if r + 1 < rows else 0
        for c in range(cols):
            cn = c + 1 if c + 1 < cols else 0
            dh = x[r, cn] - x[r, c]
            dv = x[rn, c] - x[r, c]
            total += math.sqrt(dh * dh + dv * dv + r2)
    return total


_hs_split_jit = _njit(_hs_split_loop)
_hs_gradient_jit = _njit(_hs_gradient_loop)
_hs_value_jit = _njit(_hs_value_loop)


def hs_value_numba(x, rho):
    return float(_hs_value_jit(np.ascontiguousarray(x, dtype=np.float64), float(rho)))


def hs_split_numba(x, rho):
    total, v, u = _hs_split_jit(np.ascontiguousarray(x, dtype=np.float64), float(rho))
    return float(total), v, u


def hs_gradient_numba(x, rho):
    total, grad = _hs_gradient_jit(np.ascontiguousarray(x, dtype=np.float64), float(rho))
    return float(total), grad


def _select(name):
    if USE_NUMBA:
        return globals()[name + "_numba"]
    return globals()[name + "_numpy"]


def backend() -> str:
    """Name of the active kernel backend (``"numba"`` or ``"numpy"``)."""
    return "numba" if USE_NUMBA else "numpy"


clamp_step = _select("clamp_step")
kl_terms = _select("kl_terms")
hs_value = _select("hs_value")
hs_split = _select("hs_split")
hs_gradient = _select("hs_gradient")
