"""Seeded Monte Carlo sweeps over the estimator family."""
from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .channel import SystemParams, gen_angular_channel, gen_measurement, gen_sub6_channel, gen_support
from .estimators import BLOCK_KINDS, PRIOR_KINDS, EstimationError, EstimatorConfig, run_estimator
from .numerics import ParameterError, RngStream
from .sideinfo import DParams, block_norms, probability_map_minmax

SWEEP_AXES = ("snr", "sparsity_blocks", "compression_M", "amplitude_ratio_C")
NMSE_CONVENTIONS = ("paper", "energy_normalized")
CSV_COLUMNS = ("sweep_axis", "sweep_value", "estimator", "trials", "failures", "nmse_mean", "nmse_db",
               "nmse_energy_norm", "support_accuracy", "prob_accurate", "wallclock_s")


class UndefinedMetricError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    base: SystemParams
    estimators: tuple[EstimatorConfig, ...]
    sweep_axis: str
    sweep_values: tuple[float, ...]
    trials: int = 1000
    master_seed: int = 0
    theta: float = 1e-2
    out_path: str | None = None
    # Same channel, pilots and noise shape at every sweep point of a given trial.
    common_random_numbers: bool = True
    timing: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if self.sweep_axis not in SWEEP_AXES:
            raise ParameterError(f"sweep axis must be one of {SWEEP_AXES}")
        if not self.sweep_values:
            raise ParameterError("sweep must have at least one value")
        if not self.estimators:
            raise ParameterError("no estimators configured")
        names = [e.name for e in self.estimators]
        if len(set(names)) != len(names):
            raise ParameterError(f"duplicate estimator kinds {names}")
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        for v in self.sweep_values:
            self.params_at(v)

    def params_at(self, value) -> SystemParams:
        b = self.base
        if self.sweep_axis == "snr":
            return b.with_(snr_db=float(value))
        if self.sweep_axis == "sparsity_blocks":
            return b.with_(S_taps=int(value) * b.d)
        if self.sweep_axis == "compression_M":
            return b.with_(M=int(value))
        return b.with_(C=float(value))

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class MetricRecord:
    sweep_axis: str
    sweep_value: float
    estimator: str
    trials: int
    failures: int
    nmse_mean: float
    nmse_db: float
    nmse_energy_norm: float
    support_accuracy: float
    prob_accurate: float
    wallclock_s: float = 0.0


@dataclass(frozen=True)
class TrialMetrics:
    estimator: str
    failed: bool
    nmse: float = math.nan
    nmse_energy: float = math.nan
    support_accuracy: float = math.nan
    wallclock_s: float = 0.0
    error: str = ""


# -- Metrics -------------------------------------------------------------------

def nmse(X_hat, X, convention: str = "paper") -> float:
    X_hat, X = np.asarray(X_hat), np.asarray(X)
    if X_hat.shape != X.shape:
        raise ParameterError(f"shape mismatch {X_hat.shape} vs {X.shape}")
    E = X_hat - X
    err = float(np.sum(E.real**2 + E.imag**2))
    if convention == "paper":
        return err / X.size
    if convention == "energy_normalized":
        ref = float(np.sum(X.real**2 + X.imag**2))
        if ref == 0.0:
            raise UndefinedMetricError("energy-normalized NMSE of an all-zero channel")
        return err / ref
    raise ParameterError(f"convention must be one of {NMSE_CONVENTIONS}")


def support_accuracy(est_support, true_support) -> float:
    true = set(np.asarray(true_support, dtype=np.int64).tolist())
    if not true:
        raise ParameterError("true support is empty")
    est = set(np.asarray(est_support, dtype=np.int64).tolist())
    return len(est & true) / len(true)


def prob_accurate(nmse_values, theta: float) -> float:
    v = np.asarray(nmse_values, dtype=float)
    if v.size == 0:
        raise ParameterError("empty NMSE list")
    return float(np.mean(v < theta))


# -- Trials --------------------------------------------------------------------

def _trial_stream(cfg: ExperimentConfig, point_idx: int, trial_idx: int) -> RngStream:
    root = RngStream(cfg.master_seed)
    if cfg.common_random_numbers:
        return root.child("trial", trial_idx)
    return root.child("point", point_idx, "trial", trial_idx)


def _block_lengths(est: EstimatorConfig) -> set[int]:
    if est.d_schedule is not None and est.kind in BLOCK_KINDS:
        return set(est.d_schedule)
    return {est.d}


def run_trial(cfg: ExperimentConfig, point_idx: int, trial_idx: int) -> list[TrialMetrics]:
    """One pipeline pass at sweep point ``point_idx``: channel, side information, pilots, estimators."""
    params = cfg.params_at(cfg.sweep_values[point_idx])
    stream = _trial_stream(cfg, point_idx, trial_idx)
    support, starts = gen_support(params, stream.child("support"))
    ch = gen_angular_channel(params, support, stream.child("phases"), run_starts=starts)
    sub6 = gen_sub6_channel(ch, params, stream.child("sub6"))
    meas = gen_measurement(ch, params, stream.child("pilots"))
    out = []
    for est in cfg.estimators:
        t0 = time.perf_counter() if cfg.timing else 0.0
        e = est.with_(stop_S_taps=params.S_taps)
        p, dparams = None, None
        if e.kind in PRIOR_KINDS:
            lengths = _block_lengths(e)
            priors = {d: probability_map_minmax(block_norms(sub6.X_sub, d)) for d in lengths}
            p = priors[e.d] if len(priors) == 1 else priors
            dparams = DParams(M=params.M, S_taps=max(params.S_taps, 1), g=params.g, sigma2=params.sigma2,
                              d=e.d, K_eff=params.K)
        try:
            res = run_estimator(e, meas.Y, meas.A, p, dparams, true_support=ch.support)
        except (EstimationError, np.linalg.LinAlgError, ParameterError) as exc:
            out.append(TrialMetrics(estimator=est.name, failed=True, error=f"{type(exc).__name__}: {exc}"))
            continue
        wall = time.perf_counter() - t0 if cfg.timing else 0.0
        has_sup = ch.support.size > 0
        out.append(TrialMetrics(
            estimator=est.name, failed=False,
            nmse=nmse(res.X_hat, ch.X),
            nmse_energy=nmse(res.X_hat, ch.X, "energy_normalized") if has_sup else math.nan,
            support_accuracy=support_accuracy(res.support, ch.support) if has_sup else math.nan,
            wallclock_s=wall))
    return out


def _run_chunk(args):
    cfg, jobs = args
    return [(pi, ti, run_trial(cfg, pi, ti)) for pi, ti in jobs]


# -- Sweeps --------------------------------------------------------------------

def _aggregate(cfg: ExperimentConfig, point_idx: int, per_trial: Sequence[list[TrialMetrics]]) -> list[MetricRecord]:
    value = cfg.sweep_values[point_idx]
    records = []
    for j, est in enumerate(cfg.estimators):
        rows = [t[j] for t in per_trial]
        ok = [r for r in rows if not r.failed]
        n_ok = len(ok)
        if n_ok:
            nm = float(np.mean([r.nmse for r in ok]))
            records.append(MetricRecord(
                sweep_axis=cfg.sweep_axis, sweep_value=value, estimator=est.name, trials=n_ok,
                failures=len(rows) - n_ok, nmse_mean=nm,
                nmse_db=10.0 * math.log10(nm) if nm > 0 else -math.inf,
                nmse_energy_norm=float(np.mean([r.nmse_energy for r in ok])),
                support_accuracy=float(np.mean([r.support_accuracy for r in ok])),
                prob_accurate=prob_accurate([r.nmse for r in ok], cfg.theta),
                wallclock_s=float(sum(r.wallclock_s for r in ok))))
        else:
            records.append(MetricRecord(cfg.sweep_axis, value, est.name, 0, len(rows), math.nan, math.nan,
                                        math.nan, math.nan, math.nan, 0.0))
    return records


def run_sweep(cfg: ExperimentConfig, workers: int = 1, chunk_trials: int = 25) -> list[MetricRecord]:
    """Run every (sweep point, trial) pair and aggregate; writes ``cfg.out_path`` when set.

    Results do not depend on ``workers``: each trial draws from its own keyed stream
    and aggregation follows trial order.
    """
    jobs = [(pi, ti) for pi in range(len(cfg.sweep_values)) for ti in range(cfg.trials)]
    chunks = [jobs[i:i + chunk_trials] for i in range(0, len(jobs), chunk_trials)]
    results: dict[tuple[int, int], list[TrialMetrics]] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(_run_chunk, [(cfg, c) for c in chunks]):
                for pi, ti, m in chunk:
                    results[pi, ti] = m
    else:
        for c in chunks:
            for pi, ti, m in _run_chunk((cfg, c)):
                results[pi, ti] = m
    records = []
    for pi in range(len(cfg.sweep_values)):
        records.extend(_aggregate(cfg, pi, [results[pi, ti] for ti in range(cfg.trials)]))
    records.sort(key=lambda r: (r.sweep_value, r.estimator))
    if cfg.out_path:
        write_csv(records, cfg.out_path)
    return records


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def records_to_csv(records: Sequence[MetricRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(records: Sequence[MetricRecord], path: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(records_to_csv(records))


def read_csv(path: str) -> list[MetricRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append(MetricRecord(
            sweep_axis=r["sweep_axis"], sweep_value=float(r["sweep_value"]), estimator=r["estimator"],
            trials=int(r["trials"]), failures=int(r["failures"]),
            **{k: float(r[k]) for k in CSV_COLUMNS[5:]}))
    return out


def table(records: Sequence[MetricRecord], metric: str) -> dict[str, dict[float, float]]:
    """``{estimator: {sweep_value: metric}}`` view of a record list."""
    out: dict[str, dict[float, float]] = {}
    for r in records:
        out.setdefault(r.estimator, {})[r.sweep_value] = getattr(r, metric)
    return out
