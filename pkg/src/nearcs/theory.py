"""Distribution theory of the greedy selection statistics.

Single tap (K = d = 1)
    T1 = |a_i^H y|^2 for a nonzero tap is a sum of two squared
    N(M Re x, s1), N(M Im x, s1) variables; T2 for a zero tap is s2 * chi2(2).
    T = T1 - T2 has an exponential left tail and a Marcum-Q right branch.

Block (Patnaik)
    ||A_i^H Y||_F^2 is Gamma(tau/2, 1/(rho s_nz)) for a nonzero block and
    Gamma(dK, 1/s_zero) for a zero block; their difference has a
    Whittaker-function density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .numerics import ParameterError, as_generator
from .sideinfo import (
    DParams,
    block_variances,
    coefficient_D_theorem1,
    coefficient_D_theorem2,
    logit,
    theorem1_variances,
)

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-8
TAIL_SDS = 40.0


class QuadratureError(ArithmeticError):
    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (estimate {estimate!r})")
        self.estimate = estimate


# -- Special functions ----------------------------------------------------------

_I0_SERIES_MAX = 20.0


def bessel_i0e(x: float) -> float:
    """Exponentially scaled ``exp(-x) I0(x)`` for ``x >= 0``."""
    if x < 0:
        raise ParameterError("bessel_i0 needs x >= 0")
    if x <= _I0_SERIES_MAX:
        q = 0.25 * x * x
        term, total, k = 1.0, 1.0, 0
        while term > 1e-17 * total:
            k += 1
            term *= q / (k * k)
            total += term
        return total * math.exp(-x)
    # Asymptotic expansion; terms keep shrinking well past the needed precision for x > 20.
    term, total, k = 1.0, 1.0, 0
    while abs(term) > 1e-17:
        k += 1
        term *= (2 * k - 1) ** 2 / (8.0 * k * x)
        total += term
    return total / math.sqrt(2.0 * math.pi * x)


def bessel_i0(x: float) -> float:
    return bessel_i0e(x) * math.exp(x)


def marcum_q1(a: float, b: float) -> float:
    """First-order Marcum Q-function by adaptive quadrature of its defining integral."""
    if a < 0 or b < 0:
        raise ParameterError("marcum_q1 needs a, b >= 0")
    if b == 0:
        return 1.0
    if a == 0:
        return math.exp(-0.5 * b * b)

    # x exp(-(x^2+a^2)/2) I0(ax) = x exp(-(x-a)^2/2) i0e(ax)
    def f(x):
        return x * math.exp(-0.5 * (x - a) ** 2) * bessel_i0e(a * x)

    hi = a + 40.0
    if b < a:
        val, _ = integrate.quad(f, 0.0, b, epsabs=1e-13, epsrel=1e-11, limit=200)
        return min(1.0, max(0.0, 1.0 - val))
    if b >= hi:
        val, _ = integrate.quad(f, b, b + 40.0, epsabs=1e-300, epsrel=1e-11, limit=200)
        return max(0.0, val)
    val, _ = integrate.quad(f, b, hi, epsabs=1e-13, epsrel=1e-11, limit=200)
    return min(1.0, max(0.0, val))


def marcum_q1_smallb_approx(a: float, b: float) -> float:
    return 1.0 - 0.5 * (math.exp(-(a * a - b * b) / 2.0) - math.exp(-(a * a + b * b) / 2.0))


def _log_hyperu(a: float, b: float, x: float) -> float:
    """log U(a, b, x) from ``U = 1/Gamma(a) int_0^inf e^{-xt} t^{a-1} (1+t)^{b-a-1} dt``."""
    if not (a > 0 and x > 0):
        raise ParameterError("integral representation of U needs a > 0 and x > 0")
    c = b - a - 1.0

    def phi(t):
        return -x * t + (a - 1.0) * math.log(t) + c * math.log1p(t)

    if a >= 1.0:
        B = b - 2.0 - x
        t_star = (B + math.sqrt(B * B + 4.0 * x * (a - 1.0))) / (2.0 * x)
        if t_star <= 0.0:
            t_star = min(1.0, 1.0 / x)
        curv = (a - 1.0) / t_star**2 + c / (1.0 + t_star) ** 2
        width = 1.0 / math.sqrt(curv) if curv > 0 else 1.0 / x
        ref = phi(t_star)

        def f(t):
            return math.exp(phi(t) - ref) if t > 0 else (1.0 if a == 1.0 else 0.0) * math.exp(-ref)

        lo = max(0.0, t_star - 60.0 * width)
        hi = t_star + 60.0 * width + 60.0 / x
        pieces = [(lo, t_star), (t_star, hi)]
        total, err = 0.0, 0.0
        for p, q in pieces:
            if q > p:
                v, e = integrate.quad(f, p, q, epsabs=0.0, epsrel=1e-11, limit=400)
                total += v
                err += e
        v, e = integrate.quad(f, hi, np.inf, epsabs=0.0, epsrel=1e-8, limit=200)
        total += v
        err += e
        if lo > 0.0:
            v, e = integrate.quad(f, 0.0, lo, epsabs=0.0, epsrel=1e-8, limit=200)
            total += v
            err += e
    else:
        # t^{a-1} singular at 0: substitute t = s^{1/a} on [0, 1].
        ref = 0.0

        def g(s):
            t = s ** (1.0 / a)
            return math.exp(-x * t + c * math.log1p(t)) / a

        def f(t):
            return math.exp(phi(t))

        v1, e1 = integrate.quad(g, 0.0, 1.0, epsabs=0.0, epsrel=1e-11, limit=200)
        v2, e2 = integrate.quad(f, 1.0, np.inf, epsabs=0.0, epsrel=1e-11, limit=200)
        total, err = v1 + v2, e1 + e2
    if not total > 0 or err > 1e-6 * total:
        raise QuadratureError("U integral did not converge", total)
    return math.log(total) + ref - math.lgamma(a)


def log_whittaker_w(kappa: float, mu: float, z: float) -> float:
    mu = abs(mu)
    return -0.5 * z + (mu + 0.5) * math.log(z) + _log_hyperu(mu - kappa + 0.5, 1.0 + 2.0 * mu, z)


def whittaker_w(kappa: float, mu: float, z: float) -> float:
    """Whittaker W_{kappa,mu}(z) for real z > 0 and mu - kappa + 1/2 > 0."""
    if not z > 0:
        raise ParameterError("whittaker_w needs z > 0")
    return math.exp(log_whittaker_w(kappa, mu, z))


def whittaker_w_smallz(kappa: float, mu: float, z: float) -> float:
    """Leading small-z behaviour ``Gamma(2mu)/Gamma(1/2+mu-kappa) z^{1/2-mu}`` (mu > 1/2)."""
    mu = abs(mu)
    return math.exp(math.lgamma(2 * mu) - math.lgamma(0.5 + mu - kappa) + (0.5 - mu) * math.log(z))


def patnaik(n: float, lam: float) -> tuple[float, float]:
    """Scale and degrees of freedom of the central chi2 matching chi'2(n, lam) in two moments."""
    if not n > 0 or lam < 0:
        raise ParameterError("patnaik needs n > 0 and lam >= 0")
    return (n + 2.0 * lam) / (n + lam), (n + lam) ** 2 / (n + 2.0 * lam)


# -- Parameter containers -------------------------------------------------------

@dataclass(frozen=True)
class GammaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ParameterError("Gamma shape and rate must be positive")

    @property
    def mean(self) -> float:
        return self.alpha / self.beta

    @property
    def var(self) -> float:
        return self.alpha / self.beta**2


@dataclass(frozen=True)
class SelectionDistParams:
    M: int
    g: float
    sigma2: float
    S_taps: int
    d: int = 1
    K: int = 1

    def __post_init__(self):
        if self.M < 1 or self.S_taps < 1 or self.d < 1 or self.K < 1:
            raise ParameterError("M, S_taps, d, K must be positive")
        if not (self.g > 0 and self.sigma2 > 0):
            raise ParameterError("g and sigma2 must be positive")

    @classmethod
    def from_dparams(cls, dp: DParams) -> "SelectionDistParams":
        return cls(M=dp.M, g=dp.g, sigma2=dp.sigma2, S_taps=dp.S_taps, d=dp.d, K=dp.K_eff)

    def dparams(self, mode: str = "exact") -> DParams:
        return DParams(M=self.M, S_taps=self.S_taps, g=self.g, sigma2=self.sigma2,
                       d=self.d, K_eff=self.K, mode=mode)

    # single tap: per-real-component variances
    @property
    def s1(self) -> float:
        return theorem1_variances(self.dparams())[0]

    @property
    def s2(self) -> float:
        return theorem1_variances(self.dparams())[1]

    @property
    def mg2(self) -> float:
        return (self.M * self.g) ** 2

    # block: per-entry complex variances
    @property
    def sigma_nz2(self) -> float:
        return block_variances(self.dparams())[0]

    @property
    def sigma_zero2(self) -> float:
        return block_variances(self.dparams())[1]

    @property
    def dof(self) -> int:
        return 2 * self.d * self.K

    @property
    def noncentrality(self) -> float:
        return self.dof * self.mg2 / self.sigma_nz2

    def gamma_nonzero(self) -> GammaParams:
        rho, tau = patnaik(self.dof, self.noncentrality)
        return GammaParams(tau / 2.0, 1.0 / (rho * self.sigma_nz2))

    def gamma_zero(self) -> GammaParams:
        return GammaParams(self.d * self.K, 1.0 / self.sigma_zero2)


# -- Single-tap difference T = T1 - T2 ------------------------------------------

def _single_consts(p: SelectionDistParams):
    s1, s2 = p.s1, p.s2
    ssum = s1 + s2
    pref = math.exp(-p.mg2 / (2.0 * ssum)) / (2.0 * ssum)
    a = math.sqrt(p.mg2) / math.sqrt(s1) * math.sqrt(s2 / ssum)
    c = ssum / (s1 * s2)
    return s1, s2, pref, a, c


def pdf_T_single(t, params: SelectionDistParams, branches: str = "reconciled"):
    """Density of T = T1 - T2.

    ``branches="reconciled"`` (default) attaches the Marcum-Q factor to t >= 0
    and the pure exponential to t < 0, which is what the convolution of the two
    laws gives. ``branches="printed"`` swaps them; that form does not
    integrate to one and is kept only to document the discrepancy.
    """
    s1, s2, pref, a, c = _single_consts(params)
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(tt)
    for i, x in enumerate(tt):
        marcum_side = x >= 0 if branches == "reconciled" else x < 0
        base = pref * math.exp(x / (2.0 * s2)) if x / (2.0 * s2) < 700 else math.inf
        if marcum_side:
            b = math.sqrt(abs(x) * c)
            out[i] = _marcum_tail_density(pref, x, s2, a, b)
        else:
            out[i] = base
    return out if np.ndim(t) else float(out[0])


def _marcum_tail_density(pref, x, s2, a, b):
    # pref * e^{x/(2 s2)} * Q1(a, b) with b^2 = x c; combine exponents to avoid overflow.
    q = marcum_q1(a, b)
    if q == 0.0:
        return 0.0
    return math.exp(math.log(pref) + x / (2.0 * s2) + math.log(q))


def cdf_T_single_negative(t: float, params: SelectionDistParams) -> float:
    """P(T < t) for t <= 0 in closed form."""
    s1, s2, pref, _, _ = _single_consts(params)
    return 2.0 * s2 * pref * math.exp(min(t, 0.0) / (2.0 * s2))


def single_T_moments(params: SelectionDistParams) -> tuple[float, float]:
    s1, s2 = params.s1, params.s2
    mean = params.mg2 + 2 * s1 - 2 * s2
    var = 4 * s1 * s1 + 4 * s1 * params.mg2 + 4 * s2 * s2
    return mean, var


def cdf_T_single(t, params: SelectionDistParams, n_nodes: int = 48):
    """P(T < t), integrating the t >= 0 branch from 0."""
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    F0 = cdf_T_single_negative(0.0, params)
    out = np.empty_like(tt)
    for i, x in enumerate(tt):
        out[i] = cdf_T_single_negative(x, params) if x <= 0 else F0 + integrate_pdf(
            lambda u: pdf_T_single(u, params), 0.0, x, n_nodes)
    return out if np.ndim(t) else float(out[0])


def cf_T(omega, params: SelectionDistParams):
    s1, s2 = params.s1, params.s2
    w = np.asarray(omega, dtype=float)
    den1 = 1.0 - 2j * w * s1
    return np.exp(1j * w * params.mg2 / den1) / (den1 * (1.0 + 2j * w * s2))


def sample_T_single(params: SelectionDistParams, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Model-level draws of (T1, T2): T1 from two Gaussians with means M Re x, M Im x and
    per-component variance s1, T2 as s2 * chi2(2)."""
    gen = as_generator(rng)
    phi = gen.uniform(0.0, 2.0 * np.pi, n)
    mu = params.M * params.g
    sd1 = math.sqrt(params.s1)
    re = mu * np.cos(phi) + sd1 * gen.standard_normal(n)
    im = mu * np.sin(phi) + sd1 * gen.standard_normal(n)
    t1 = re * re + im * im
    t2 = params.s2 * gen.chisquare(2, n)
    return t1, t2


# -- Gamma difference ----------------------------------------------------------

def _log_ctilde(g1: GammaParams, g2: GammaParams) -> float:
    return (g1.alpha * math.log(g1.beta) + g2.alpha * math.log(g2.beta)
            - 0.5 * (g1.alpha + g2.alpha) * math.log(g1.beta + g2.beta))


def gamma_diff_pdf(t, g1: GammaParams, g2: GammaParams):
    """Density of X1 - X2 with X1 ~ Gamma(a1, b1), X2 ~ Gamma(a2, b2) (shape-rate)."""
    a1, b1, a2, b2 = g1.alpha, g1.beta, g2.alpha, g2.beta
    s = b1 + b2
    lc = _log_ctilde(g1, g2)
    half = 0.5 * (a1 + a2)
    mu = 0.5 * (1.0 - a1 - a2)
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(tt)
    for i, x in enumerate(tt):
        if x > 0:
            lw = log_whittaker_w(0.5 * (a1 - a2), mu, s * x)
            out[i] = math.exp(lc - math.lgamma(a1) + (half - 1.0) * math.log(x) + 0.5 * (b2 - b1) * x + lw)
        elif x < 0:
            lw = log_whittaker_w(0.5 * (a2 - a1), mu, -s * x)
            out[i] = math.exp(lc - math.lgamma(a2) + (half - 1.0) * math.log(-x) + 0.5 * (b2 - b1) * x + lw)
        else:
            if a1 + a2 <= 1.0:
                out[i] = math.inf
            else:
                out[i] = math.exp(a1 * math.log(b1) + a2 * math.log(b2) + math.lgamma(a1 + a2 - 1.0)
                                  - math.lgamma(a1) - math.lgamma(a2) - (a1 + a2 - 1.0) * math.log(s))
    return out if np.ndim(t) else float(out[0])


def gamma_diff_moments(g1: GammaParams, g2: GammaParams) -> tuple[float, float]:
    return g1.mean - g2.mean, g1.var + g2.var


# -- Quadrature helpers --------------------------------------------------------

def integrate_pdf(pdf, a: float, b: float, n_nodes: int = 48) -> float:
    """Fixed-order Gauss-Legendre integral of a smooth density over [a, b]."""
    if b == a:
        return 0.0
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return float(half * np.dot(w, pdf(mid + half * x)))


def cdf_table(pdf, lo: float, hi: float, n_cells: int = 400, n_nodes: int = 16,
              split: float | None = 0.0, mass_below: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative integral of ``pdf`` on a grid over [lo, hi] (grid includes ``split``)."""
    if split is not None and lo < split < hi:
        n_lo = max(2, int(round(n_cells * (split - lo) / (hi - lo))))
        grid = np.concatenate([np.linspace(lo, split, n_lo + 1), np.linspace(split, hi, n_cells - n_lo + 1)[1:]])
    else:
        grid = np.linspace(lo, hi, n_cells + 1)
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    mids = 0.5 * (grid[:-1] + grid[1:])
    halves = 0.5 * np.diff(grid)
    nodes = (mids[:, None] + halves[:, None] * x[None, :]).ravel()
    vals = np.asarray(pdf(nodes), dtype=float).reshape(len(mids), n_nodes)
    cell = halves * (vals @ w)
    return grid, mass_below + np.concatenate([[0.0], np.cumsum(cell)])


def normalization(pdf, mean: float, sd: float, split: float | None = 0.0, n_cells: int = 400) -> float:
    lo, hi = mean - TAIL_SDS * sd, mean + TAIL_SDS * sd
    _, F = cdf_table(pdf, lo, hi, n_cells=n_cells, split=split)
    return float(F[-1])


def ks_statistic(samples: np.ndarray, grid: np.ndarray, cdf_vals: np.ndarray) -> float:
    """Two-sided KS distance of samples against a tabulated CDF (linear interpolation)."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = np.interp(x, grid, np.clip(cdf_vals, 0.0, 1.0), left=0.0, right=1.0)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


# -- Selection error probability ---------------------------------------------

@dataclass(frozen=True)
class _TDist:
    pdf: object
    F0: float
    scale: float


def _t_distribution(dist: str, params: SelectionDistParams) -> _TDist:
    if dist == "single_tap":
        _, var = single_T_moments(params)
        return _TDist(pdf=lambda u: pdf_T_single(u, params), F0=cdf_T_single_negative(0.0, params),
                      scale=math.sqrt(var))
    if dist == "block":
        g1, g2 = params.gamma_nonzero(), params.gamma_zero()
        mean, var = gamma_diff_moments(g1, g2)
        pdf = lambda u: gamma_diff_pdf(u, g1, g2)  # noqa: E731
        lo = min(mean - TAIL_SDS * math.sqrt(var), -TAIL_SDS * g2.var**0.5)
        F0 = integrate_piecewise(pdf, lo, 0.0, pieces=64)
        return _TDist(pdf=pdf, F0=F0, scale=math.sqrt(var))
    raise ParameterError(f"unknown distribution {dist!r}")


def integrate_piecewise(pdf, a: float, b: float, pieces: int = 32, n_nodes: int = 24) -> float:
    edges = np.linspace(a, b, pieces + 1)
    return float(sum(integrate_pdf(pdf, p, q, n_nodes) for p, q in zip(edges[:-1], edges[1:])))


def _excess(tdist: _TDist, dv: float, p1: float, p2: float) -> float:
    """P_e(dv) - P_e(0)."""
    up = integrate_pdf(tdist.pdf, 0.0, dv)  # signed for dv < 0
    down = integrate_pdf(tdist.pdf, -dv, 0.0)
    return p1 * (1.0 - p2) * up - p2 * (1.0 - p1) * down


def selection_error_probability(delta_v: float, p1: float, p2: float, dist: str,
                                params: SelectionDistParams) -> float:
    """P_e = p1(1-p2) P(T < dv) + p2(1-p1) P(T < -dv) for a nonzero index with prior p1
    competing against a zero index with prior p2. Infinite ``delta_v`` is allowed."""
    if not (0 < p1 < 1 and 0 < p2 < 1):
        raise ParameterError("p1, p2 must lie in (0, 1)")
    td = _t_distribution(dist, params)
    base = (p1 * (1.0 - p2) + p2 * (1.0 - p1)) * td.F0
    if math.isinf(delta_v):
        return p1 * (1.0 - p2) if delta_v > 0 else p2 * (1.0 - p1)
    return float(min(1.0, max(0.0, base + _excess_long(td, delta_v, p1, p2))))


def _excess_long(td: _TDist, dv: float, p1: float, p2: float) -> float:
    # Long intervals are split so fixed-order quadrature stays accurate.
    n = max(1, int(math.ceil(abs(dv) / (0.05 * td.scale))))
    if n == 1:
        return _excess(td, dv, p1, p2)
    edges = np.linspace(0.0, dv, n + 1)
    up = sum(integrate_pdf(td.pdf, a, b) for a, b in zip(edges[:-1], edges[1:]))
    down = sum(integrate_pdf(td.pdf, -b, -a) for a, b in zip(edges[:-1], edges[1:]))
    return p1 * (1.0 - p2) * up - p2 * (1.0 - p1) * down


# -- Optimality check ----------------------------------------------------------

@dataclass
class PriorCheckRow:
    p: float
    dp: float
    D: float
    dv_theory: float
    dv_opt: float
    pe_theory: float
    pe_opt: float
    rel_gap: float


@dataclass
class PriorCheckReport:
    regime: str
    D: float
    rows: list[PriorCheckRow] = field(default_factory=list)

    @property
    def max_rel_gap(self) -> float:
        return max(r.rel_gap for r in self.rows)


def _regime_dist(regime: str):
    if regime == "theorem1":
        return "single_tap", coefficient_D_theorem1
    if regime == "theorem2":
        return "block", coefficient_D_theorem2
    raise ParameterError(f"unknown regime {regime!r}")


def validate_optimal_prior(dparams: DParams, p_grid=(0.5,), dps=(1e-3, 1e-2), regime: str = "theorem1",
                           D_scale: float = 1.0, n_grid: int = 401) -> PriorCheckReport:
    """Compare the closed-form prior difference against a grid-searched optimum of P_e.

    For each pair ``(p, p + dp)``, the zero index carries the larger prior.
    """
    dist, d_fn = _regime_dist(regime)
    params = SelectionDistParams.from_dparams(dparams)
    D = d_fn(dparams.with_(mode="exact")) * D_scale
    td = _t_distribution(dist, params)
    report = PriorCheckReport(regime=regime, D=D)
    for p in p_grid:
        for dp in dps:
            p1, p2 = p, p + dp
            dv_th = D * float(logit(p2) - logit(p1))
            half = max(4.0 * abs(dv_th), 1e-4 * td.scale)
            for _ in range(12):
                f = _local_excess(td, half, p1, p2)
                grid = np.linspace(-half, half, n_grid)
                vals = f(grid)
                k = int(np.argmin(vals))
                if 0 < k < n_grid - 1:
                    break
                half *= 4.0
            res = optimize.minimize_scalar(f, bounds=(grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]),
                                           method="bounded", options={"xatol": 1e-10 * half})
            if res.fun <= vals[k]:
                dv_opt, e_opt = float(res.x), float(res.fun)
            else:
                dv_opt, e_opt = float(grid[k]), float(vals[k])
            e_th = float(_local_excess(td, max(half, abs(dv_th)), p1, p2)(dv_th))
            if e_th < e_opt:
                dv_opt, e_opt = dv_th, e_th
            base = (p1 * (1.0 - p2) + p2 * (1.0 - p1)) * td.F0
            pe_opt = base + e_opt
            report.rows.append(PriorCheckRow(p=p, dp=dp, D=D, dv_theory=dv_th, dv_opt=dv_opt,
                                             pe_theory=base + e_th, pe_opt=pe_opt,
                                             rel_gap=(e_th - e_opt) / pe_opt))
    return report


def _local_excess(td: _TDist, half: float, p1: float, p2: float, deg: int = 40):
    """``P_e(dv) - P_e(0)`` on [-half, half] from Chebyshev fits of each density branch."""
    cheb = np.polynomial.chebyshev.Chebyshev
    right = cheb.interpolate(td.pdf, deg, domain=[0.0, half]).integ(lbnd=0.0)
    left = cheb.interpolate(td.pdf, deg, domain=[-half, 0.0]).integ(lbnd=0.0)

    def F(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, right(np.clip(x, 0.0, half)), left(np.clip(x, -half, 0.0)))

    def excess(dv):
        out = p1 * (1.0 - p2) * F(dv) + p2 * (1.0 - p1) * F(-dv)
        return out if np.ndim(dv) else float(out)

    return excess


# -- Monte Carlo validation ------------------------------------------------------

@dataclass
class PipelineSamples:
    nonzero: np.ndarray
    zero: np.ndarray


def pipeline_system(params: SelectionDistParams):
    """SystemParams whose SNR reproduces ``params.sigma2`` with the smallest admissible N."""
    from .channel import SystemParams

    d = params.d
    N = max(params.M, params.S_taps + d)
    N += (-N) % d
    snr_db = 10.0 * math.log10(params.S_taps * params.g**2 / params.sigma2)
    return SystemParams(N=N, N_sub=N, K=params.K, M=params.M, d=d, S_taps=params.S_taps,
                        g=params.g, snr_db=snr_db)


def sample_selection_statistics(params: SelectionDistParams, n_nonzero: int, n_zero: int,
                                rng) -> PipelineSamples:
    """Block correlation energies ``||A_i^H Y||_F^2`` drawn through the channel generators.

    Nonzero blocks are those on the true support; with ``d = K = 1`` these are the
    single-tap statistics ``|a_i^H y|^2``.
    """
    from .channel import gen_angular_channel, gen_measurement, gen_support

    gen = as_generator(rng)
    sysp = pipeline_system(params)
    d, nb = sysp.d, sysp.n_blocks
    nz_parts, z_parts = [], []
    got_nz = got_z = 0
    while got_nz < n_nonzero or got_z < n_zero:
        sup, starts = gen_support(sysp, gen)
        X = gen_angular_channel(sysp, sup, gen, run_starts=starts)
        meas = gen_measurement(X, sysp, gen)
        G = meas.A.conj().T @ meas.Y
        e = (G.real**2 + G.imag**2).sum(axis=1).reshape(nb, d).sum(axis=1)
        mask = np.zeros(nb, dtype=bool)
        mask[starts // d] = True
        if got_nz < n_nonzero:
            nz_parts.append(e[mask])
            got_nz += int(mask.sum())
        if got_z < n_zero:
            z_parts.append(e[~mask])
            got_z += int((~mask).sum())
    return PipelineSamples(nonzero=np.concatenate(nz_parts)[:n_nonzero],
                           zero=np.concatenate(z_parts)[:n_zero])


def statistic_laws(params: SelectionDistParams):
    """Frozen scipy laws of the nonzero and zero block statistics (noncentral / central)."""
    from scipy import stats

    half = params.sigma_nz2 / 2.0
    nonzero = stats.ncx2(df=params.dof, nc=params.noncentrality, scale=half)
    zero = stats.gamma(a=params.d * params.K, scale=params.sigma_zero2)
    return nonzero, zero


def ks_against_cdf(samples: np.ndarray, cdf) -> float:
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def patnaik_sup_gap(params: SelectionDistParams, n: int, rng) -> float:
    """sup |CDF of rho*chi2(tau) - empirical CDF of chi'2(n_dof, lambda)|."""
    from scipy import stats

    gen = as_generator(rng)
    rho, tau = patnaik(params.dof, params.noncentrality)
    draws = gen.noncentral_chisquare(params.dof, params.noncentrality, n)
    return ks_against_cdf(draws, stats.chi2(df=tau, scale=rho).cdf)


@dataclass
class DistributionCheck:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(abs(self.value) < self.threshold)


SINGLE_TAP_SET = SelectionDistParams(M=100, g=1.0, sigma2=1.0, S_taps=5)
BLOCK_SET = SelectionDistParams(M=100, g=1.0, sigma2=1.0, S_taps=10, d=2, K=4)


def _tabulated_cdf(pdf, mean, sd, F_lo=0.0, n_cells=400, lo=None):
    lo = mean - 12.0 * sd if lo is None else lo
    grid, F = cdf_table(pdf, lo, mean + 12.0 * sd, n_cells=n_cells, mass_below=F_lo)
    return lambda x: np.interp(x, grid, np.clip(F, 0.0, 1.0), left=F_lo, right=1.0)


def single_T_cdf(params: SelectionDistParams):
    """Tabulated CDF of T: closed form for t < 0, integrated density for t >= 0."""
    mean, var = single_T_moments(params)
    sd = math.sqrt(var)
    F0 = cdf_T_single_negative(0.0, params)
    grid, F = cdf_table(lambda u: pdf_T_single(u, params), 0.0, max(mean, 0.0) + 12.0 * sd,
                        n_cells=400, split=None, mass_below=F0)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        neg = 2.0 * params.s2 * _single_consts(params)[2] * np.exp(np.minimum(x, 0.0) / (2.0 * params.s2))
        return np.where(x < 0, neg, np.interp(x, grid, np.clip(F, 0.0, 1.0), right=1.0))

    return cdf


def gamma_diff_cdf(g1: GammaParams, g2: GammaParams, n_cells: int = 400):
    mean, var = gamma_diff_moments(g1, g2)
    sd = math.sqrt(var)
    return _tabulated_cdf(lambda u: gamma_diff_pdf(u, g1, g2), mean, sd, n_cells=n_cells)


def validate_distributions(n_samples: int = 1_000_000, seed: int = 0, pipeline: bool = True,
                           ks_threshold: float = 0.01) -> list[DistributionCheck]:
    """Every distribution-level check, with pass thresholds attached."""
    from .numerics import RngStream

    root = RngStream(seed)
    checks: list[DistributionCheck] = []
    sp_, bp = SINGLE_TAP_SET, BLOCK_SET

    mean, var = single_T_moments(sp_)
    norm = normalization(lambda u: pdf_T_single(u, sp_), mean, math.sqrt(var))
    checks.append(DistributionCheck("pdf_T_single normalization error", norm - 1.0, 1e-4))
    g1, g2 = bp.gamma_nonzero(), bp.gamma_zero()
    gm, gv = gamma_diff_moments(g1, g2)
    norm = normalization(lambda u: gamma_diff_pdf(u, g1, g2), gm, math.sqrt(gv))
    checks.append(DistributionCheck("gamma_diff_pdf normalization error", norm - 1.0, 1e-4))

    rho, tau = patnaik(bp.dof, bp.noncentrality)
    n, lam = bp.dof, bp.noncentrality
    checks.append(DistributionCheck("patnaik mean identity", (rho * tau - (n + lam)) / (n + lam), 1e-12))
    checks.append(DistributionCheck("patnaik variance identity",
                                    (2 * rho**2 * tau - 2 * (n + 2 * lam)) / (2 * (n + 2 * lam)), 1e-12))
    checks.append(DistributionCheck("patnaik CDF sup-gap", patnaik_sup_gap(bp, n_samples, root.child("patnaik")),
                                    0.02))

    t1, t2 = sample_T_single(sp_, n_samples, root.child("model_T"))
    checks.append(DistributionCheck("T = T1 - T2 model KS", ks_against_cdf(t1 - t2, single_T_cdf(sp_)),
                                    ks_threshold))
    gen = root.child("gamma_diff").generator()
    diff = gen.gamma(g1.alpha, 1.0 / g1.beta, n_samples) - gen.gamma(g2.alpha, 1.0 / g2.beta, n_samples)
    checks.append(DistributionCheck("gamma_diff_pdf model KS", ks_against_cdf(diff, gamma_diff_cdf(g1, g2)),
                                    ks_threshold))

    if pipeline:
        for label, prm in (("single-tap", sp_), ("block", bp)):
            s = sample_selection_statistics(prm, n_samples, n_samples, root.child("pipeline", label))
            nz_law, z_law = statistic_laws(prm)
            checks.append(DistributionCheck(f"{label} nonzero pipeline KS", ks_against_cdf(s.nonzero, nz_law.cdf),
                                            ks_threshold))
            checks.append(DistributionCheck(f"{label} zero pipeline KS", ks_against_cdf(s.zero, z_law.cdf),
                                            ks_threshold))
    return checks
