"""Poisson deblurring objective: generalized KL fit plus hypersurface regularizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..core import SmoothObjective
from ..metric import DiagonalMetric, clamp_to_metric
from .operators import BlurOperator


class DomainError(ValueError):
    """Image with negative entries passed where ``x >= 0`` is required."""


def _check_nonneg(x):
    if np.any(x < 0):
        raise DomainError("image must be nonnegative")


@dataclass
class PoissonModel:
    """Data ``g`` observed as Poisson(``A x + b``)."""

    operator: BlurOperator
    data: np.ndarray
    background: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if np.any(self.data < 0):
            raise ValueError("data must be nonnegative")
        if self.background < 0:
            raise ValueError("background must be nonnegative")
        if self.data.shape != tuple(self.operator.shape):
            raise ValueError("data shape does not match the operator")

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def forward(self, x) -> np.ndarray:
        return self.operator.apply(x) + self.background


@dataclass(frozen=True)
class HSRegularizer:
    """``sum_i sqrt((Dh x)_i^2 + (Dv x)_i^2 + rho^2)`` with periodic forward differences."""

    rho: float = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")


def _model_values(model, x):
    mx = model.forward(x)
    if np.any(mx <= 0):
        raise DomainError("A x + b must be positive; use b > 0 or x > 0")
    return mx


def kl_value(model: PoissonModel, x) -> float:
    """Generalized Kullback-Leibler divergence between ``g`` and ``A x + b``."""
    _check_nonneg(x)
    value, _ = _kernels.kl_terms(model.data, _model_values(model, x))
    return value


def kl_gradient(model: PoissonModel, x) -> np.ndarray:
    """``A'(e - g / (A x + b))``."""
    _check_nonneg(x)
    _, ratio = _kernels.kl_terms(model.data, _model_values(model, x))
    return model.operator.adjoint(1.0 - ratio)


def hs_value(reg: HSRegularizer, x) -> float:
    return _kernels.hs_value(np.asarray(x, dtype=float), reg.rho)


def hs_gradient(reg: HSRegularizer, x) -> np.ndarray:
    return _kernels.hs_gradient(np.asarray(x, dtype=float), reg.rho)[1]


def split_gradient(reg: HSRegularizer, x):
    """Nonnegative split ``(V, U)`` of the HS gradient with ``V - U = grad HS``.

    ``V`` collects every term carrying ``x_i`` as a factor, so ``V = 0`` where
    ``x = 0``.
    """
    x = np.asarray(x, dtype=float)
    _check_nonneg(x)
    _, v, u = _kernels.hs_split(x, reg.rho)
    return v, u


def build_scaling(x, nu: float, v, mu_k: float) -> DiagonalMetric:
    """Split-gradient scaling ``clamp(x / (1 + nu V), 1/mu_k, mu_k)``."""
    _check_nonneg(x)
    return clamp_to_metric(x / (1.0 + nu * v), mu_k)


class CompositeObjective(SmoothObjective):
    """``f(x) = KL(x) + nu * HS_rho(x)`` on the nonnegative orthant."""

    def __init__(self, model: PoissonModel, reg: HSRegularizer, nu: float):
        if not nu >= 0:
            raise ValueError("nu must be nonnegative")
        self.model = model
        self.reg = reg
        self.nu = float(nu)
        super().__init__(self._value_only, self._gradient_only, dimension=model.size)

    def _value_only(self, x):
        v, _ = _kernels.kl_terms(self.model.data, _model_values(self.model, x))
        if self.nu:
            v += self.nu * _kernels.hs_value(x, self.reg.rho)
        return v

    def _gradient_only(self, x):
        return self.value_and_gradient(x)[1]

    def value_and_gradient(self, x):
        kl, ratio = _kernels.kl_terms(self.model.data, _model_values(self.model, x))
        grad = self.model.operator.adjoint(1.0 - ratio)
        if self.nu:
            hs, hg = _kernels.hs_gradient(x, self.reg.rho)
            return kl + self.nu * hs, grad + self.nu * hg
        return kl, grad

    def kl(self, x) -> float:
        return kl_value(self.model, x)


class SplitGradientScaling:
    """Raw scaling values ``x / (1 + nu V(x))`` for use with :class:`~scaledgp.metric.ScaledMetric`."""

    def __init__(self, reg: HSRegularizer, nu: float):
        self.reg = reg
        self.nu = float(nu)

    def __call__(self, x, grad):
        if self.nu == 0:
            return np.array(x, dtype=float)
        v, _ = split_gradient(self.reg, x)
        return x / (1.0 + self.nu * v)
