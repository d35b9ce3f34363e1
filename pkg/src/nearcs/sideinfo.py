"""Out-of-band prior: block-norm probability map and logit prior weights.

The prior added to the greedy selection score of block ``i`` is
``v_i = D * ln(p_i / (1 - p_i))``. Three closed forms for ``D`` are provided,
all in terms of role-named variances:

* ``sigma_nz2``  -- per-entry variance of the correlation of a *nonzero* block,
* ``sigma_zero2`` -- per-entry variance of the correlation of a *zero* block.

``S_taps`` is always the total number of nonzero scalar taps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .numerics import ParameterError

D_MODES = ("exact", "simplified")


class RegimeError(ValueError):
    """Closed-form coefficient evaluated outside the regime it was derived for."""


@dataclass(frozen=True)
class PriorVector:
    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
            raise ParameterError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "p", p)

    def __len__(self):
        return self.p.size

    @classmethod
    def uniform(cls, n: int) -> "PriorVector":
        return cls(np.full(n, 0.5))

    @classmethod
    def indicator(cls, n_blocks: int, blocks) -> "PriorVector":
        p = np.zeros(n_blocks)
        p[np.asarray(blocks, dtype=np.int64)] = 1.0
        return cls(p)


@dataclass(frozen=True)
class PriorWeights:
    v: np.ndarray
    D: float


@dataclass(frozen=True)
class DParams:
    M: int
    S_taps: int
    g: float
    sigma2: float
    d: int = 1
    K_eff: int = 1
    mode: str = "exact"

    def __post_init__(self):
        if self.M < 1 or self.S_taps < 1 or self.d < 1 or self.K_eff < 1:
            raise ParameterError("M, S_taps, d, K_eff must be positive")
        if not (self.g > 0 and self.sigma2 > 0):
            raise ParameterError("g and sigma2 must be positive")
        if self.mode not in D_MODES:
            raise ParameterError(f"mode must be one of {D_MODES}")

    def with_(self, **changes) -> "DParams":
        return replace(self, **changes)


def block_norms(X_sub: np.ndarray, d: int) -> np.ndarray:
    X_sub = np.asarray(X_sub)
    if X_sub.ndim == 1:
        X_sub = X_sub[:, None]
    if X_sub.shape[0] % d:
        raise ParameterError(f"{X_sub.shape[0]} rows not divisible by d={d}")
    e = (X_sub.real**2 + X_sub.imag**2).reshape(X_sub.shape[0] // d, -1).sum(axis=1)
    return np.sqrt(e)


def probability_map_minmax(norms) -> PriorVector:
    """Min-max map of block norms onto [0, 1]; all-equal norms map to 1/2."""
    x = np.asarray(norms, dtype=float)
    if x.size < 2:
        raise ParameterError("need at least two block norms")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return PriorVector(np.full(x.size, 0.5))
    return PriorVector(np.clip((x - lo) / (hi - lo), 0.0, 1.0))


def logit(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(p) - np.log1p(-p)


def prior_factor(p: PriorVector, D: float) -> PriorWeights:
    if not D > 0:
        raise ParameterError("D must be positive")
    return PriorWeights(v=D * logit(p.p), D=float(D))


# -- Coefficient D ------------------------------------------------------------

def theorem1_variances(dp: DParams) -> tuple[float, float]:
    """Per-real-component variances (nonzero tap, zero tap) of a single-tap correlation."""
    s1 = 0.5 * dp.M * ((dp.S_taps - 1) * dp.g**2 + dp.sigma2)
    s2 = 0.5 * dp.M * (dp.S_taps * dp.g**2 + dp.sigma2)
    return s1, s2


def coefficient_D_theorem1(dp: DParams) -> float:
    """Single subcarrier, single tap (K = d = 1)."""
    s1, s2 = theorem1_variances(dp)
    mg2 = (dp.M * dp.g) ** 2
    if dp.mode == "simplified":
        return s2 / -math.expm1(-mg2 / (4.0 * s2))
    A = 1.0 / s2
    B = 0.5 * math.exp(-mg2 * s2 / (2.0 * s1 * (s1 + s2))) * (s1 + s2) / (s1 * s2)
    if A <= B:
        raise RegimeError(f"A={A:.6g} <= B={B:.6g}")
    return 1.0 / (A - B)


def coefficient_D_theorem1_asymptotic(dp: DParams) -> float:
    s2 = theorem1_variances(dp)[1]
    return 4.0 * s2**2 / (dp.M * dp.g) ** 2


def block_variances(dp: DParams) -> tuple[float, float]:
    """Per-entry complex variances ``(sigma_nz2, sigma_zero2)`` of a block correlation."""
    sigma_nz2 = dp.M * ((dp.S_taps - 1) * dp.g**2 + dp.sigma2)
    sigma_zero2 = dp.M * (dp.S_taps * dp.g**2 + dp.sigma2)
    return sigma_nz2, sigma_zero2


def patnaik_rho(dp: DParams) -> float:
    sigma_nz2, _ = block_variances(dp)
    n = 2.0 * dp.d * dp.K_eff
    lam = n * (dp.M * dp.g) ** 2 / sigma_nz2
    return (n + 2.0 * lam) / (n + lam)


def gamma_rates(dp: DParams) -> tuple[float, float]:
    """Rates ``(beta_nz, beta_zero)`` of the Gamma laws of the two block statistics."""
    sigma_nz2, sigma_zero2 = block_variances(dp)
    return 1.0 / (patnaik_rho(dp) * sigma_nz2), 1.0 / sigma_zero2


def coefficient_D_theorem2(dp: DParams) -> float:
    """Multiple subcarriers with block length d."""
    if dp.mode == "simplified":
        s0 = block_variances(dp)[1]
        mg2 = (dp.M * dp.g) ** 2
        return (s0 + 2.0 * mg2) / mg2 * s0
    b1, b2 = gamma_rates(dp)
    if b2 <= b1:
        raise RegimeError(f"beta_zero={b2:.6g} <= beta_nz={b1:.6g}")
    return 1.0 / (b2 - b1)


def coefficient_D_corollary(dp: DParams) -> float:
    return coefficient_D_theorem2(dp.with_(d=1))
