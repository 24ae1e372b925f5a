"""Periodic convolution operators.

:class:`BlurOperator` applies a point-spread function by FFT under periodic
boundary conditions, so the matrix it represents is block circulant with
circulant blocks.  :class:`DenseBlurOperator` builds the same matrix
explicitly and is only meant for small images (tests, cross-checks).
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft


def psf_to_otf(psf: np.ndarray, shape) -> np.ndarray:
    """Embed a centred PSF in ``shape`` and return its real-input transform.

    The PSF centre (``size // 2`` along each axis) is moved to index ``(0, 0)``
    so the convolution does not shift the image.  Kernels larger than the
    image are folded onto it modulo the image size.
    """
    psf = np.asarray(psf, dtype=float)
    rows, cols = shape
    pr, pc = psf.shape
    # kernels larger than the image wrap around (periodic boundary)
    ri = (np.arange(pr) - pr // 2) % rows
    ci = (np.arange(pc) - pc // 2) % cols
    big = np.zeros(shape)
    np.add.at(big, (ri[:, None], ci[None, :]), psf)
    return sfft.rfft2(big)


class BlurOperator:
    """``A x = psf (*) x`` with periodic wrap, computed in O(n log n).

    Parameters
    ----------
    psf : ndarray
        2-D kernel with its centre at ``(rows//2, cols//2)``.
    shape : tuple of int
        Image shape.
    normalize : bool
        Rescale the kernel to unit sum so that ``A e = A' e = e``.
    """

    def __init__(self, psf, shape, normalize: bool = True):
        psf = np.asarray(psf, dtype=float)
        if np.any(psf < 0):
            raise ValueError("PSF entries must be nonnegative")
        total = psf.sum()
        if total <= 0:
            raise ValueError("PSF must have positive mass")
        if normalize:
            psf = psf / total
        self.psf = psf
        self.shape = tuple(int(s) for s in shape)
        self._otf = psf_to_otf(psf, self.shape)
        self._otf_conj = np.conj(self._otf)

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return sfft.irfft2(sfft.rfft2(x) * self._otf, s=self.shape)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return sfft.irfft2(sfft.rfft2(y) * self._otf_conj, s=self.shape)

    __call__ = apply

    def to_dense(self) -> np.ndarray:
        return DenseBlurOperator(self.psf, self.shape, normalize=False).matrix


class DenseBlurOperator:
    """Explicit BCCB matrix of the periodic convolution; intended for n <= 256."""

    max_pixels = 256

    def __init__(self, psf, shape, normalize: bool = True):
        psf = np.asarray(psf, dtype=float)
        if normalize:
            psf = psf / psf.sum()
        rows, cols = shape
        n = rows * cols
        if n > self.max_pixels:
            raise ValueError(f"dense operator limited to {self.max_pixels} pixels, got {n}")
        self.psf = psf
        self.shape = (rows, cols)
        pr, pc = psf.shape
        cr, cc = pr // 2, pc // 2
        mat = np.zeros((n, n))
        # (A x)[r, c] = sum_{i, j} psf[i, j] x[r - (i - cr), c - (j - cc)]
        for r in range(rows):
            for c in range(cols):
                out = r * cols + c
                for i in range(pr):
                    for j in range(pc):
                        src = ((r - (i - cr)) % rows) * cols + (c - (j - cc)) % cols
                        mat[out, src] += psf[i, j]
        self.matrix = mat

    def apply(self, x):
        return (self.matrix @ np.ravel(x)).reshape(self.shape)

    def adjoint(self, y):
        return (self.matrix.T @ np.ravel(y)).reshape(self.shape)

    __call__ = apply


def gaussian_psf(size: int = 33, variance: float = 9.0) -> np.ndarray:
    """Isotropic Gaussian kernel of the given variance, truncated to ``size x size`` and normalized."""
    if size % 2 == 0:
        raise ValueError("PSF size must be odd")
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=float)
    rr, cc = np.meshgrid(ax, ax, indexing="ij")
    psf = np.exp(-(rr**2 + cc**2) / (2.0 * variance))
    return psf / psf.sum()
