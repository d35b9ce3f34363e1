"""Dual-band scenario synthesis: block-sparse mmWave angular channel, Sub-6GHz
support channel, measurement matrix and received pilots."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .numerics import ParameterError, as_generator, conj_transpose, sample_complex_gaussian

SPEED_OF_LIGHT = 299_792_458.0

GRID_MODES = ("on_grid", "off_grid")
Q_MODELS = ("unit", "scaled")


@dataclass(frozen=True)
class SystemParams:
    """Scenario scalars. Defaults are the desk-scale values used throughout the simulations."""

    N: int = 256
    N_sub: int = 32
    K: int = 32
    M: int = 25
    d: int = 4
    S_taps: int = 20
    g: float = 1.0
    snr_db: float = 10.0
    f_m: float = 28e9
    f_s: float = 3.5e9
    C: float = 3.0
    grid_mode: str = "on_grid"
    # Sub-6GHz nonzero run length (Case II far-field support uses a shorter run); None -> d.
    d_sub: int | None = None
    # "unit": |Q| = 1 + gamma*R1*delta; "scaled": |Q| = gamma*delta with R1 as a sign flip.
    q_model: str = "unit"

    def __post_init__(self):
        if min(self.N, self.N_sub, self.K, self.M, self.d) < 1:
            raise ParameterError("N, N_sub, K, M, d must be positive")
        if self.N % self.d:
            raise ParameterError(f"d={self.d} must divide N={self.N}")
        if self.S_taps < 0 or self.S_taps > self.N:
            raise ParameterError(f"S_taps={self.S_taps} must lie in [0, N]")
        if self.S_taps % self.d:
            raise ParameterError(f"S_taps={self.S_taps} must be a multiple of d={self.d}")
        if self.M > self.N:
            raise ParameterError(f"M={self.M} must not exceed N={self.N}")
        if not self.C > 0:
            raise ParameterError("C must be positive")
        if not self.f_m > self.f_s > 0:
            raise ParameterError("need f_m > f_s > 0")
        if not self.g > 0:
            raise ParameterError("g must be positive")
        if self.grid_mode not in GRID_MODES:
            raise ParameterError(f"grid_mode must be one of {GRID_MODES}")
        if self.q_model not in Q_MODELS:
            raise ParameterError(f"q_model must be one of {Q_MODELS}")
        if self.d_sub is not None and not 1 <= self.d_sub <= self.d:
            raise ParameterError(f"d_sub must lie in [1, d], got {self.d_sub}")

    @property
    def n_blocks(self) -> int:
        return self.N // self.d

    @property
    def gamma(self) -> float:
        return frequency_separation(self.f_m, self.f_s)

    @property
    def sigma_n2(self) -> float:
        return self.gamma**2 / self.C

    @property
    def sigma2(self) -> float:
        """Noise variance per complex received entry."""
        # An empty support has no signal power to reference; fall back to one tap.
        power = self.S_taps * self.g**2 if self.S_taps else self.g**2
        return power * 10.0 ** (-self.snr_db / 10.0)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_m

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class AngularChannel:
    X: np.ndarray
    support: np.ndarray
    d: int
    grid_mode: str
    run_starts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


@dataclass(frozen=True)
class SupportChannel:
    X_sub: np.ndarray
    gamma: float
    sigma_n2: float


@dataclass(frozen=True)
class Measurement:
    A: np.ndarray
    Y: np.ndarray
    sigma2: float


@dataclass(frozen=True)
class PhysicalPath:
    theta: float
    r: float
    gain: complex = 1.0

    def __post_init__(self):
        if not self.r > 0:
            raise ParameterError("path distance must be positive")


def frequency_separation(f_m: float, f_s: float) -> float:
    return abs(f_m - f_s) / max(f_m, f_s)


def _runs_to_support(starts, d: int) -> np.ndarray:
    starts = np.sort(np.asarray(starts, dtype=np.int64))
    return (starts[:, None] + np.arange(d)).ravel()


def gen_support(params: SystemParams, rng) -> tuple[np.ndarray, np.ndarray]:
    """Draw a support as S_taps/d runs of length d.

    Returns ``(support, run_starts)``, both sorted. On-grid runs are aligned
    blocks drawn without replacement. Off-grid runs start anywhere, uniformly
    over all pairwise-disjoint placements: shrinking each run to one slot
    turns the placement into a plain subset of N - n_runs*(d-1) slots.
    """
    gen = as_generator(rng)
    d, N = params.d, params.N
    n_runs = params.S_taps // d
    if n_runs * d > N:
        raise ParameterError(f"{n_runs} runs of length {d} cannot fit in {N} taps")
    if n_runs == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    if params.grid_mode == "on_grid":
        blocks = gen.choice(N // d, size=n_runs, replace=False)
        starts = np.sort(blocks) * d
        return _runs_to_support(starts, d), starts
    slots = np.sort(gen.choice(N - n_runs * (d - 1), size=n_runs, replace=False))
    starts = slots + np.arange(n_runs) * (d - 1)
    return _runs_to_support(starts, d), starts


def gen_angular_channel(params: SystemParams, support, rng, run_starts=None) -> AngularChannel:
    """Constant-modulus block-sparse X: supported entries are g*exp(j*phi), phi ~ U[0, 2pi)."""
    gen = as_generator(rng)
    support = np.asarray(support, dtype=np.int64)
    X = np.zeros((params.N, params.K), dtype=np.complex128)
    if support.size:
        phi = gen.uniform(0.0, 2.0 * np.pi, size=(support.size, params.K))
        X[support] = params.g * np.exp(1j * phi)
    if run_starts is None:
        run_starts = support[:: params.d] if support.size else np.zeros(0, dtype=np.int64)
    return AngularChannel(X=X, support=support, d=params.d, grid_mode=params.grid_mode,
                          run_starts=np.asarray(run_starts, dtype=np.int64))


def draw_channel(params: SystemParams, rng) -> AngularChannel:
    gen = as_generator(rng)
    support, starts = gen_support(params, gen)
    return gen_angular_channel(params, support, gen, run_starts=starts)


def far_field_steering(theta: float, N: int) -> np.ndarray:
    if abs(theta) > 1:
        raise ParameterError("|theta| must be <= 1")
    n = np.arange(N)
    return np.exp(-1j * np.pi * n * theta) / np.sqrt(N)


def near_field_steering(theta: float, r: float, N: int, wavelength: float) -> np.ndarray:
    """Exact-distance spherical-wave response of a symmetric half-wavelength ULA.

    The sign of theta follows ``far_field_steering`` so both models agree on
    direction. Phase is referenced to the array centre, hence the far-field
    limit equals ``far_field_steering`` up to one common phase factor.
    """
    if abs(theta) > 1:
        raise ParameterError("|theta| must be <= 1")
    if not r > 0:
        raise ParameterError("r must be positive")
    s = wavelength / 2.0
    delta = (2.0 * np.arange(N) - N + 1) / 2.0
    # r_n - r computed in cancellation-free form for r >> aperture.
    num = (delta * s) ** 2 + 2.0 * r * delta * s * theta
    r_n = np.sqrt(r * r + num)
    dr = num / (r_n + r)
    return np.exp(-1j * (2.0 * np.pi / wavelength) * dr) / np.sqrt(N)


def rayleigh_distance(aperture_m: float, wavelength_m: float) -> float:
    if aperture_m < 0 or not wavelength_m > 0:
        raise ParameterError("aperture must be >= 0 and wavelength > 0")
    return 2.0 * aperture_m**2 / wavelength_m


def dft_codebook(N: int, rows: int | None = None) -> np.ndarray:
    """Unitary DFT codebook ``F[m, n] = exp(j*2*pi*m*n/N)/sqrt(N)``.

    With ``rows < N`` the first ``rows`` antenna rows are kept, which is the
    Sub-6GHz codebook sampled on the same spatial grid.
    """
    if N < 1:
        raise ParameterError("N must be >= 1")
    rows = N if rows is None else rows
    m = np.arange(rows)[:, None]
    n = np.arange(N)[None, :]
    return np.exp(2j * np.pi * ((m * n) % N) / N) / np.sqrt(N)


def grid_angle(c: int, N: int) -> float:
    """Steering angle (in [-1, 1)) whose far-field response equals DFT column c."""
    t = (-2.0 * c / N) % 2.0
    return t - 2.0 if t >= 1.0 else t


def gen_sub6_channel(X: AngularChannel, params: SystemParams, rng) -> SupportChannel:
    """Perturb X into the Sub-6GHz angular channel.

    Supported taps are multiplied by a random coefficient Q with
    ``arg Q = 2*pi*gamma*R2*delta``; zero taps carry CN(0, gamma^2/C) noise.
    """
    gen = as_generator(rng)
    N, K = X.X.shape
    gamma = params.gamma
    sigma_n2 = gamma**2 / params.C
    X_sub = sample_complex_gaussian(N, K, sigma_n2, gen)
    sup = _sub6_rows(X, params)
    if sup.size:
        shape = (sup.size, K)
        delta = gen.uniform(0.0, 1.0, size=shape)
        r1 = gen.choice((-1.0, 1.0), size=shape)
        r2 = gen.choice((-1.0, 1.0), size=shape)
        phase = 2.0 * np.pi * gamma * r2 * delta
        if params.q_model == "unit":
            amp = 1.0 + gamma * r1 * delta
        else:
            amp = gamma * delta
            phase = phase + np.where(r1 < 0, np.pi, 0.0)
        X_sub[sup] = amp * np.exp(1j * phase) * X.X[sup]
    return SupportChannel(X_sub=X_sub, gamma=gamma, sigma_n2=sigma_n2)


def _sub6_rows(X: AngularChannel, params: SystemParams) -> np.ndarray:
    d_sub = params.d_sub or X.d
    if d_sub >= X.d or X.support.size == 0:
        return X.support
    # Shorter Sub-6GHz runs sit at the centre of each mmWave run.
    lead = (X.d - d_sub) // 2
    starts = X.support[:: X.d] + lead
    return _runs_to_support(starts, d_sub)


def gen_measurement(X: AngularChannel, params: SystemParams, rng) -> Measurement:
    """A ~ CN(0,1)^{M x N}, Y = A X + noise with noise variance set by the SNR."""
    gen = as_generator(rng)
    A = sample_complex_gaussian(params.M, params.N, 1.0, gen)
    sigma2 = params.sigma2
    noise = sample_complex_gaussian(params.M, params.K, sigma2, gen)
    return Measurement(A=A, Y=A @ X.X + noise, sigma2=sigma2)


def subcarrier_wavenumbers(K: int, f_c: float, subcarrier_spacing: float) -> np.ndarray:
    k = np.arange(K)
    return 2.0 * np.pi * (f_c + (k - math.ceil(K / 2)) * subcarrier_spacing) / SPEED_OF_LIGHT


def gen_physical_channel(paths: Sequence[PhysicalPath], N: int, K: int, wavelength: float,
                         subcarrier_spacing: float) -> np.ndarray:
    """Spatial-domain multi-path near-field channel H (N x K)."""
    L = len(paths)
    if L < 1:
        raise ParameterError("need at least one path")
    kk = subcarrier_wavenumbers(K, SPEED_OF_LIGHT / wavelength, subcarrier_spacing)
    H = np.zeros((N, K), dtype=np.complex128)
    for p in paths:
        b = near_field_steering(p.theta, p.r, N, wavelength)
        H += p.gain * np.exp(-1j * kk * p.r)[None, :] * b[:, None]
    return np.sqrt(N / L) * H


def to_angular(H: np.ndarray) -> np.ndarray:
    return conj_transpose(dft_codebook(H.shape[0])) @ H
