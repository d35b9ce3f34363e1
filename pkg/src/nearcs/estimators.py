"""Greedy block-sparse recovery with an optional logit prior.

Every greedy kind runs through :func:`_greedy`. Per iteration, over the aligned
blocks not yet touched by the support, it maximizes
``||A_k^H R||_F^2 + D ln(p_k / (1 - p_k))``, appends the winning block's taps,
refits by least squares on the accumulated support, and updates the residual.
``omp``/``bomp`` pass no prior and so execute the identical arithmetic with
``v = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .numerics import ParameterError, RankDeficientError, frobenius_norm, least_squares
from .sideinfo import (
    DParams,
    PriorVector,
    RegimeError,
    coefficient_D_corollary,
    coefficient_D_theorem1,
    coefficient_D_theorem2,
    logit,
)

KINDS = ("omp", "bomp", "clw_omp", "clw_bomp", "cslw_omp", "cslw_bomp", "ls", "genie")
PRIOR_KINDS = ("clw_omp", "clw_bomp", "cslw_omp", "cslw_bomp")
BLOCK_KINDS = ("bomp", "clw_bomp", "cslw_bomp")
K_RULES = ("paper_literal", "sparsity_decrement", "fixed")


@dataclass(frozen=True)
class EstimatorConfig:
    kind: str
    stop_S_taps: int
    d: int = 1
    D_mode: str = "exact"
    K_rule: str = "paper_literal"
    literal_Y_correlation: bool = False
    d_schedule: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown estimator kind {self.kind!r}")
        if self.K_rule not in K_RULES:
            raise ParameterError(f"unknown K_rule {self.K_rule!r}")
        if self.kind not in BLOCK_KINDS and self.d != 1:
            object.__setattr__(self, "d", 1)
        if self.d < 1 or self.stop_S_taps < 0:
            raise ParameterError("d must be >= 1 and stop_S_taps >= 0")
        if self.kind in BLOCK_KINDS and self.d_schedule is None and self.stop_S_taps % self.d:
            raise ParameterError(f"stop_S_taps={self.stop_S_taps} not divisible by d={self.d}")

    @property
    def name(self) -> str:
        return self.kind

    def with_(self, **changes) -> "EstimatorConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    block: int
    d: int
    correlation: float
    prior: float
    D: float
    residual_norm: float


@dataclass
class EstimateResult:
    X_hat: np.ndarray
    support: np.ndarray
    trace: list[IterationRecord] = field(default_factory=list)
    selection_order: list[int] = field(default_factory=list)


class EstimationError(RuntimeError):
    def __init__(self, message: str, partial: EstimateResult | None = None):
        super().__init__(message)
        self.partial = partial


class ExhaustionError(EstimationError):
    """Every remaining candidate block carries a -inf prior."""


def _schedule(d: int, d_schedule, stop: int) -> list[int]:
    if d_schedule is None:
        return [d] * (stop // d)
    sched = list(d_schedule)
    if not sched:
        raise ParameterError("empty d_schedule")
    out, total, i = [], 0, 0
    while total < stop:
        di = sched[min(i, len(sched) - 1)]
        if total + di > stop:
            raise ParameterError(f"d_schedule {sched} does not tile stop_S_taps={stop}")
        out.append(di)
        total += di
        i += 1
    return out


def _greedy(Y, A, schedule: Sequence[int], prior: Callable[[int, int], tuple[np.ndarray, float]] | None,
            literal_Y: bool = False) -> EstimateResult:
    Y = np.asarray(Y)
    A = np.asarray(A)
    if Y.ndim == 1:
        Y = Y[:, None]
    M, N = A.shape
    if Y.shape[0] != M:
        raise ParameterError(f"Y has {Y.shape[0]} rows, A has {M}")
    AH = A.conj().T
    taken = np.zeros(N, dtype=bool)
    order: list[int] = []
    trace: list[IterationRecord] = []
    R = Y
    X_S = np.zeros((0, Y.shape[1]), dtype=np.complex128)

    def partial():
        return _result(N, Y.shape[1], order, X_S, trace)

    for it, d in enumerate(schedule):
        if N % d:
            raise ParameterError(f"block length {d} does not divide N={N}")
        G = AH @ (Y if literal_Y else R)
        energy = (G.real**2 + G.imag**2).sum(axis=1).reshape(N // d, d).sum(axis=1)
        if prior is None:
            v, D = None, 0.0
            score = energy.copy()
        else:
            v, D = prior(it, d)
            score = energy + v
        score[taken.reshape(N // d, d).any(axis=1)] = -np.inf
        if not np.any(score > -np.inf):
            raise ExhaustionError(f"no admissible block left at iteration {it}", partial())
        k = int(np.argmax(score))
        order.extend(range(k * d, (k + 1) * d))
        taken[k * d:(k + 1) * d] = True
        try:
            X_S = least_squares(A[:, order], Y)
        except RankDeficientError as exc:
            del order[-d:]
            raise EstimationError(str(exc), partial()) from exc
        R = Y - A[:, order] @ X_S
        trace.append(IterationRecord(
            iteration=it, block=k, d=d, correlation=float(energy[k]),
            prior=0.0 if v is None else float(v[k]), D=float(D),
            residual_norm=frobenius_norm(R)))
    return _result(N, Y.shape[1], order, X_S, trace, A=A, Y=Y)


def _result(N, K, order, X_S, trace, A=None, Y=None) -> EstimateResult:
    X_hat = np.zeros((N, K), dtype=np.complex128)
    if order and A is not None:
        # Final solve on the sorted support so that equal supports give bitwise-equal
        # estimates regardless of selection order (and match genie_bound).
        final = sorted(order)
        X_hat[final] = least_squares(A[:, final], Y)
    elif order:
        X_hat[order] = X_S
    return EstimateResult(X_hat=X_hat, support=np.sort(np.asarray(order, dtype=np.int64)),
                          trace=list(trace), selection_order=list(order))


def _d_function(kind: str):
    return {
        "clw_omp": coefficient_D_theorem1,
        "clw_bomp": coefficient_D_theorem2,
        "cslw_omp": coefficient_D_corollary,
        "cslw_bomp": coefficient_D_theorem2,
    }[kind]


def _make_prior(kind: str, priors: Mapping[int, PriorVector], cfg: EstimatorConfig, dparams: DParams):
    """Per-iteration ``(v, D)`` provider honouring ``cfg.K_rule``."""
    d_fn = _d_function(kind)
    base = dparams.with_(mode=cfg.D_mode)
    logits = {d: logit(pv.p) for d, pv in priors.items()}
    state = {"D": None, "taps": 0}

    def coefficient(it: int, d: int) -> float:
        if cfg.K_rule == "fixed":
            if state["D"] is None:
                state["D"] = d_fn(base.with_(d=d))
            return state["D"]
        if cfg.K_rule == "paper_literal":
            dp = base.with_(d=d, K_eff=max(base.K_eff - it, 1))
        else:
            dp = base.with_(d=d, S_taps=max(base.S_taps - state["taps"], 1))
        try:
            return d_fn(dp)
        except RegimeError:
            # Decremented parameters can leave the derivation regime late in a
            # run; keep the last admissible coefficient.
            if state["D"] is None:
                raise
            return state["D"]

    def provider(it: int, d: int):
        if d not in logits:
            raise ParameterError(f"no prior vector for block length {d}")
        D = coefficient(it, d)
        state["D"] = D
        state["taps"] += d
        return D * logits[d], D

    return provider


def _priors_by_d(p, d: int) -> dict[int, PriorVector]:
    if isinstance(p, PriorVector):
        return {d: p}
    if isinstance(p, Mapping):
        return {int(k): (v if isinstance(v, PriorVector) else PriorVector(v)) for k, v in p.items()}
    return {d: PriorVector(p)}


def _check_prior_length(priors, N):
    for d, pv in priors.items():
        if len(pv) != N // d:
            raise ParameterError(f"prior for d={d} has length {len(pv)}, expected {N // d}")


def cslw_bomp(Y, A, p, cfg: EstimatorConfig, dparams: DParams) -> EstimateResult:
    """Simultaneous logit-weighted block OMP. ``p`` may map block length -> prior for schedules."""
    d = cfg.d
    priors = _priors_by_d(p, d)
    _check_prior_length(priors, np.shape(A)[1])
    kind = cfg.kind if cfg.kind in PRIOR_KINDS else "cslw_bomp"
    schedule = _schedule(d, cfg.d_schedule, cfg.stop_S_taps)
    prov = _make_prior(kind, priors, cfg, dparams)
    return _greedy(Y, A, schedule, prov, cfg.literal_Y_correlation)


def cslw_omp(Y, A, p, cfg: EstimatorConfig, dparams: DParams) -> EstimateResult:
    return cslw_bomp(Y, A, p, cfg.with_(kind="cslw_omp", d=1, d_schedule=None), dparams.with_(d=1))


def clw_omp(y, A, p, cfg: EstimatorConfig, dparams: DParams) -> EstimateResult:
    y = _single_column(y)
    return cslw_bomp(y, A, p, cfg.with_(kind="clw_omp", d=1, d_schedule=None),
                     dparams.with_(d=1, K_eff=1))


def clw_bomp(y, A, p, cfg: EstimatorConfig, dparams: DParams) -> EstimateResult:
    y = _single_column(y)
    return cslw_bomp(y, A, p, cfg.with_(kind="clw_bomp"), dparams.with_(K_eff=1))


def _single_column(y):
    y = np.asarray(y)
    if y.ndim == 2 and y.shape[1] != 1:
        raise ParameterError("single-subcarrier estimator needs one measurement column")
    return y.reshape(-1, 1)


def omp(Y, A, cfg: EstimatorConfig) -> EstimateResult:
    """Simultaneous (MMV) OMP: one tap per iteration by residual column energy."""
    return _greedy(Y, A, [1] * cfg.stop_S_taps, None, cfg.literal_Y_correlation)


def bomp(Y, A, cfg: EstimatorConfig) -> EstimateResult:
    return _greedy(Y, A, _schedule(cfg.d, cfg.d_schedule, cfg.stop_S_taps), None,
                   cfg.literal_Y_correlation)


def ls_estimate(Y, A) -> np.ndarray:
    """Minimum-norm least squares ``pinv(A) @ Y``."""
    return np.linalg.lstsq(np.asarray(A), np.asarray(Y), rcond=None)[0]


def genie_bound(Y, A, true_support) -> EstimateResult:
    """Least squares restricted to the true support."""
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    A = np.asarray(A)
    sup = np.sort(np.asarray(true_support, dtype=np.int64))
    X_hat = np.zeros((A.shape[1], Y.shape[1]), dtype=np.complex128)
    if sup.size:
        try:
            X_hat[sup] = least_squares(A[:, sup], Y)
        except RankDeficientError as exc:
            raise EstimationError(str(exc)) from exc
    return EstimateResult(X_hat=X_hat, support=sup, trace=[], selection_order=list(sup))


def run_estimator(cfg: EstimatorConfig, Y, A, p: PriorVector | None = None,
                  dparams: DParams | None = None, true_support=None) -> EstimateResult:
    """Dispatch on ``cfg.kind``."""
    kind = cfg.kind
    if kind == "omp":
        return omp(Y, A, cfg)
    if kind == "bomp":
        return bomp(Y, A, cfg)
    if kind == "ls":
        X_hat = ls_estimate(Y, A)
        return EstimateResult(X_hat=X_hat, support=np.arange(X_hat.shape[0]))
    if kind == "genie":
        return genie_bound(Y, A, true_support)
    if p is None or dparams is None:
        raise ParameterError(f"{kind} needs a prior vector and D parameters")
    fn = {"cslw_bomp": cslw_bomp, "cslw_omp": cslw_omp, "clw_omp": clw_omp, "clw_bomp": clw_bomp}[kind]
    return fn(Y, A, p, cfg, dparams)
