"""Synthetic test objects and Poisson data simulation."""

from __future__ import annotations

import numpy as np

from .operators import BlurOperator, gaussian_psf
from .poisson import PoissonModel

# (value, centre_row, centre_col, semi_axis_row, semi_axis_col, angle_deg); coordinates in [-1, 1]
_ELLIPSES = (
    (1.0, 0.0, 0.0, 0.92, 0.69, 0.0),
    (-0.8, -0.0184, 0.0, 0.874, 0.6624, 0.0),
    (-0.2, 0.0, 0.22, 0.41, 0.11, -18.0),
    (-0.2, 0.0, -0.22, 0.31, 0.16, 18.0),
    (0.1, -0.35, 0.0, 0.25, 0.21, 0.0),
    (0.1, -0.1, 0.0, 0.046, 0.046, 0.0),
    (0.1, 0.1, 0.0, 0.046, 0.046, 0.0),
    (0.1, 0.605, -0.08, 0.023, 0.046, 0.0),
    (0.1, 0.605, 0.0, 0.023, 0.023, 0.0),
    (0.1, 0.605, 0.06, 0.046, 0.023, 0.0),
)


def ellipse_phantom(size: int = 64, scale: float = 500.0) -> np.ndarray:
    """Piecewise-constant head phantom built from ten ellipses, values in ``[0, scale]``."""
    ax = np.linspace(-1.0, 1.0, size)
    rr, cc = np.meshgrid(ax, ax, indexing="ij")
    img = np.zeros((size, size))
    for value, r0, c0, ar, ac, angle in _ELLIPSES:
        t = np.deg2rad(angle)
        dr, dc = rr - r0, cc - c0
        u = dr * np.cos(t) + dc * np.sin(t)
        v = -dr * np.sin(t) + dc * np.cos(t)
        img[(u / ar) ** 2 + (v / ac) ** 2 <= 1.0] += value
    img = np.clip(img, 0.0, None)
    return img * (scale / img.max())


def simulate_problem(truth, psf=None, background: float = 10.0, scale: float = 1.0, seed=0,
                     noiseless: bool = False):
    """Blur ``scale * truth``, add ``scale * background`` and draw Poisson counts.

    Returns ``(model, scaled_truth)``.  ``noiseless=True`` gives ``g = A x* + b``
    exactly.
    """
    truth = np.asarray(truth, dtype=float) * scale
    if np.any(truth < 0):
        raise ValueError("ground truth must be nonnegative")
    if psf is None:
        psf = gaussian_psf()
    b = float(background) * scale
    op = BlurOperator(psf, truth.shape)
    mean = op.apply(truth) + b
    # FFT rounding can leave tiny negative values where the object is zero
    mean = np.maximum(mean, 0.0)
    if noiseless:
        data = mean
    else:
        rng = np.random.default_rng(seed)
        data = rng.poisson(mean).astype(float)
    return PoissonModel(op, data, b), truth
