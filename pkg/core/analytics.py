# core/analytics.py
"""
Semi-analytical rate and coverage of the reference aUE.

General aUE: the four serving distances are sampled exactly from their joint
law and the inner z-integral of the rate is done by adaptive quadrature; the
coverage uses the Gamma approximation of the conditional interference.
Worst-case aUE: one-dimensional adaptive quadrature over the equidistant law.
"""
import math
from dataclasses import asdict, dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special, stats

from core.distances import (
    BppParams,
    equidistant_mode,
    equidistant_pdf,
    sample_ordered_nearest,
)
from core.errors import DomainError, NumericError, ParameterError
from core.special import generalized_expint
from core.workers import CHUNK_SIZE, RunController, chunk_bounds, chunk_rng, map_chunks

KINDS = ("analytic", "monte-carlo")

MIN_OUTER_SAMPLES = 1000

# inner integral runs over s = ln(z / z*) in [-S_SPAN, S_SPAN], split at s = 0
S_SPAN = 60.0
INNER_RTOL = 1e-6

# the worst-case outer integral stops this close to R (the conditional law degenerates at d = R)
_EDGE = 1e-9


def db_to_linear(db):
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ChannelConfig:
    alpha: float
    n_abs: int
    radius: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        bpp = BppParams(self.n_abs, self.radius)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "n_abs", bpp.n_abs)
        object.__setattr__(self, "radius", bpp.radius)

    @property
    def bpp(self) -> BppParams:
        return BppParams(self.n_abs, self.radius)

    @property
    def interferers(self) -> int:
        return self.n_abs - 4

    def with_alpha(self, alpha: float) -> "ChannelConfig":
        return replace(self, alpha=alpha)

    def with_n(self, n_abs: int) -> "ChannelConfig":
        return replace(self, n_abs=n_abs)


@dataclass(frozen=True)
class MetricEstimate:
    value: float
    error: float
    kind: str
    trials: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.error >= 0:
            raise ParameterError(f"error must be non-negative, got {self.error}")

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "MetricEstimate":
        samples = np.asarray(samples, dtype=float)
        n = len(samples)
        err = float(samples.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(float(samples.mean()), err, "monte-carlo", n)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GammaApproxParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise DomainError(f"Gamma parameters must be positive, got ({self.shape}, {self.scale})")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def variance(self) -> float:
        return self.shape * self.scale ** 2

    def pdf(self, x):
        return stats.gamma.pdf(x, a=self.shape, scale=self.scale)

    def cdf(self, x):
        return stats.gamma.cdf(x, a=self.shape, scale=self.scale)


@dataclass(frozen=True)
class QuadratureConfig:
    epsabs: float = 1e-10
    epsrel: float = 1e-8
    limit: int = 200
    # breakpoints in SIR (linear) units, e.g. discontinuities of the coverage function
    points: Tuple[float, ...] = ()


@dataclass(frozen=True)
class InterferenceMean:
    value: float
    divergent: bool


# ---------------------------------------------------------------------------
# Moment generating functions
# ---------------------------------------------------------------------------

def signal_power(cfg: ChannelConfig, r) -> np.ndarray:
    """|sum r_i^{-alpha/2}|^2 over the last axis (coherent joint transmission)."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("serving distances must be positive")
    s = np.sum(arr ** (-cfg.alpha / 2.0), axis=-1)
    return s * s


def mgf_signal_general(cfg: ChannelConfig, r, z):
    value = np.exp(-np.asarray(z, dtype=float) * signal_power(cfg, r))
    return float(value) if np.ndim(value) == 0 else value


def mgf_signal_worst(cfg: ChannelConfig, d, z):
    d = np.asarray(d, dtype=float)
    value = np.exp(-16.0 * np.asarray(z, dtype=float) * d ** (-cfg.alpha))
    return float(value) if np.ndim(value) == 0 else value


def _check_d(cfg: ChannelConfig, d) -> np.ndarray:
    arr = np.asarray(d, dtype=float)
    if np.any(arr <= 0) or np.any(arr >= cfg.radius):
        raise DomainError(f"serving distance must lie in (0, {cfg.radius})")
    return arr


def log_interference_bracket(cfg: ChannelConfig, d, z) -> np.ndarray:
    """log of (1/(R^3-d^3)) ∫_d^R 3x^2 exp(-z x^-alpha) dx via E_v, v = (3+alpha)/alpha."""
    d = _check_d(cfg, d)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise DomainError("MGF argument z must be non-negative")
    a, big_r = cfg.alpha, cfg.radius
    v = (3.0 + a) / a
    d, z = np.broadcast_arrays(d, z)
    r3, d3 = big_r ** 3, d ** 3
    outer = r3 * generalized_expint(v, z * big_r ** (-a))
    inner = d3 * generalized_expint(v, z * d ** (-a))
    bracket = 3.0 / (a * (r3 - d3)) * (outer - inner)
    with np.errstate(divide="ignore"):
        return np.log(np.clip(bracket, 0.0, 1.0))


def mgf_interference_general(cfg: ChannelConfig, d4, z, exponent: Optional[float] = None):
    """M_I(z) given the fourth distance; ``exponent`` defaults to N - 4."""
    m = cfg.interferers if exponent is None else float(exponent)
    if m < 0:
        raise ParameterError("interferer exponent must be non-negative")
    if m == 0:
        _check_d(cfg, d4)
        value = np.ones(np.broadcast(np.asarray(d4), np.asarray(z)).shape)
    else:
        value = np.exp(m * log_interference_bracket(cfg, d4, z))
    return float(value) if np.ndim(value) == 0 else value


def mgf_interference_worst(cfg: ChannelConfig, d, z, exponent: Optional[float] = None):
    """Same structure with the common serving distance d in place of d4."""
    return mgf_interference_general(cfg, d, z, exponent)


def mgf_interference_quadrature(cfg: ChannelConfig, d: float, z: float,
                                exponent: Optional[float] = None) -> float:
    """Defining integral of the interference MGF by direct quadrature (reference values)."""
    d = float(_check_d(cfg, d))
    m = cfg.interferers if exponent is None else float(exponent)
    a, big_r = cfg.alpha, cfg.radius
    val, _ = integrate.quad(lambda x: 3.0 * x * x * math.exp(-z * x ** (-a)), d, big_r,
                            epsabs=0.0, epsrel=1e-12, limit=400)
    return (val / (big_r ** 3 - d ** 3)) ** m


# ---------------------------------------------------------------------------
# Rate
# ---------------------------------------------------------------------------

def _rate_kernel(cfg: ChannelConfig, signal: np.ndarray, d: np.ndarray, exponent: float,
                 rtol: float = INNER_RTOL) -> np.ndarray:
    """∫_0^∞ (1 - e^{-zS}) M_I(z; d) / z dz for each (S, d) pair.

    Integrated in s = ln(z / z*), z* = ln2 / S (where the signal MGF is 1/2).
    """
    signal = np.asarray(signal, dtype=float)
    d = np.minimum(np.asarray(d, dtype=float), cfg.radius * (1.0 - _EDGE))
    zstar = math.log(2.0) / signal

    def integrand(s):
        z = zstar * math.exp(s)
        return -np.expm1(-z * signal) * np.exp(exponent * log_interference_bracket(cfg, d, z))

    res, err, info = integrate.quad_vec(integrand, -S_SPAN, S_SPAN, points=[0.0],
                                        epsrel=rtol, epsabs=1e-300, norm="max",
                                        limit=2000, full_output=True)
    if not info.success:
        raise NumericError("inner rate integral did not converge",
                           {"status": info.status, "error": float(np.max(err)), "samples": len(signal)})
    return np.atleast_1d(res)


def rate_samples(cfg: ChannelConfig, mc_outer_samples: int, seed: int, eta: float = 1.0,
                 workers: int = 1, controller: Optional[RunController] = None) -> np.ndarray:
    """Per-sample conditional rates (1/eta) ∫ (1 - M_S) M_I^{(N-4)/eta} / z dz."""
    if cfg.interferers == 0:
        raise DomainError("rate is unbounded without interferers (N = 4)")
    if eta < 1:
        raise ParameterError(f"reuse factor must be >= 1, got {eta}")
    if int(mc_outer_samples) != mc_outer_samples or mc_outer_samples < MIN_OUTER_SAMPLES:
        raise ParameterError(f"mc_outer_samples must be an integer >= {MIN_OUTER_SAMPLES}")
    exponent = cfg.interferers / float(eta)
    bpp = cfg.bpp

    def work(index, start, stop):
        r = sample_ordered_nearest(bpp, 4, chunk_rng(seed, index), size=stop - start)
        return _rate_kernel(cfg, signal_power(cfg, r), r[:, 3], exponent) / float(eta)

    parts = map_chunks(work, int(mc_outer_samples), CHUNK_SIZE, workers, controller)
    return np.concatenate(parts)


def rate_general(cfg: ChannelConfig, mc_outer_samples: int, seed: int, workers: int = 1,
                 controller: Optional[RunController] = None) -> MetricEstimate:
    return MetricEstimate.from_samples(rate_samples(cfg, mc_outer_samples, seed, 1.0, workers, controller))


def rate_reuse(cfg: ChannelConfig, eta: float, mc_outer_samples: int, seed: int, workers: int = 1,
               controller: Optional[RunController] = None) -> MetricEstimate:
    """Rate under frequency reuse: interferers thinned to (N-4)/eta, bandwidth share 1/eta."""
    return MetricEstimate.from_samples(rate_samples(cfg, mc_outer_samples, seed, eta, workers, controller))


# ---------------------------------------------------------------------------
# Interference moments and the Gamma approximation
# ---------------------------------------------------------------------------

def _power_integral(a: float, d, big_r: float):
    """∫_d^R x^{a-1} dx, with the a = 0 (logarithmic) branch."""
    if abs(a) < 1e-12:
        return np.log(big_r / d)
    return d ** a * np.expm1(a * np.log(big_r / d)) / a


def interference_moments(cfg: ChannelConfig, d) -> Tuple[float, float]:
    """Mean and variance of the interference given serving distance d."""
    arr = _check_d(cfg, d)
    m = cfg.interferers
    if m == 0:
        zero = np.zeros_like(arr)
        return (0.0, 0.0) if arr.ndim == 0 else (zero, zero)
    a, big_r = cfg.alpha, cfg.radius
    norm = 3.0 / (big_r ** 3 - arr ** 3)
    if a == 3.0:
        first = norm * np.log(big_r / arr)
        second = norm * (arr ** -3 - big_r ** -3) / 3.0
    else:
        first = norm * _power_integral(3.0 - a, arr, big_r)
        second = norm * _power_integral(3.0 - 2.0 * a, arr, big_r)
    mean = m * first
    var = m * (second - first * first)
    if arr.ndim == 0:
        return float(mean), float(var)
    return mean, var


def _shape_scale(cfg: ChannelConfig, d):
    if cfg.interferers == 0:
        raise DomainError("no interferers: the interference is identically zero")
    mean, var = interference_moments(cfg, d)
    return mean * mean / var, var / mean


def gamma_approx_params(cfg: ChannelConfig, d: float) -> GammaApproxParams:
    shape, scale = _shape_scale(cfg, float(d))
    return GammaApproxParams(float(shape), float(scale))


# ---------------------------------------------------------------------------
# Coverage
# ---------------------------------------------------------------------------

class CoverageModel:
    """Outer samples of the general aUE; P(gamma) = mean of P(v, S / (gamma theta))."""

    def __init__(self, cfg: ChannelConfig, mc_outer_samples: int, seed: int):
        if int(mc_outer_samples) != mc_outer_samples or mc_outer_samples < MIN_OUTER_SAMPLES:
            raise ParameterError(f"mc_outer_samples must be an integer >= {MIN_OUTER_SAMPLES}")
        self.cfg = cfg
        parts = []
        for index, start, stop in chunk_bounds(int(mc_outer_samples), CHUNK_SIZE):
            parts.append(sample_ordered_nearest(cfg.bpp, 4, chunk_rng(seed, index), size=stop - start))
        r = np.concatenate(parts)
        d4 = np.minimum(r[:, 3], cfg.radius * (1.0 - _EDGE))
        self.signal = signal_power(cfg, r)
        self.shape, self.scale = _shape_scale(cfg, d4)

    def conditional(self, gamma_threshold: float) -> np.ndarray:
        if not gamma_threshold > 0:
            raise DomainError(f"SIR threshold must be positive, got {gamma_threshold}")
        return special.gammainc(self.shape, self.signal / (gamma_threshold * self.scale))

    def __call__(self, gamma_threshold: float) -> float:
        return float(self.conditional(gamma_threshold).mean())

    def estimate(self, gamma_threshold: float) -> MetricEstimate:
        return MetricEstimate.from_samples(self.conditional(gamma_threshold))


def coverage_general(cfg: ChannelConfig, gamma_threshold: float, mc_outer_samples: int,
                     seed: int) -> MetricEstimate:
    return CoverageModel(cfg, mc_outer_samples, seed).estimate(gamma_threshold)


def coverage_function_general(cfg: ChannelConfig, mc_outer_samples: int, seed: int) -> CoverageModel:
    """P(gamma) as a callable (linear SIR), for rate_from_coverage."""
    return CoverageModel(cfg, mc_outer_samples, seed)


def coverage_curve_general(cfg: ChannelConfig, gamma_db_grid: Sequence[float], mc_outer_samples: int,
                           seed: int) -> List[MetricEstimate]:
    model = CoverageModel(cfg, mc_outer_samples, seed)
    return [model.estimate(float(g)) for g in db_to_linear(gamma_db_grid)]


def rate_from_coverage(coverage_fn: Callable[[float], float],
                       quad: QuadratureConfig = QuadratureConfig()) -> MetricEstimate:
    """∫_0^∞ P(gamma) / (1 + gamma) dgamma with gamma = t / (1 - t)."""

    def integrand(t):
        if t >= 1.0:
            return 0.0
        return float(coverage_fn(t / (1.0 - t))) / (1.0 - t)

    pts = sorted(p / (1.0 + p) for p in quad.points if p > 0)
    out = integrate.quad(integrand, 0.0, 1.0, epsabs=quad.epsabs, epsrel=quad.epsrel,
                         limit=quad.limit, points=pts or None, full_output=1)
    if len(out) > 3:
        raise NumericError("rate-from-coverage quadrature did not converge",
                           {"message": out[3], "estimate": out[0], "abserr": out[1]})
    return MetricEstimate(float(out[0]), float(out[1]), "analytic")


# ---------------------------------------------------------------------------
# Worst case
# ---------------------------------------------------------------------------

def _outer_worst(cfg: ChannelConfig, inner: Callable[[float], float], rtol: float) -> Tuple[float, float]:
    bpp = cfg.bpp
    hi = cfg.radius * (1.0 - _EDGE)
    mode = equidistant_mode(bpp, 4)

    def integrand(x):
        if x <= 0.0:
            return 0.0
        w = equidistant_pdf(bpp, 4, x)
        if w == 0.0:
            return 0.0
        return w * inner(x)

    out = integrate.quad(integrand, 0.0, hi, epsabs=0.0, epsrel=rtol, limit=400,
                         points=[0.5 * mode, mode, min(1.5 * mode, 0.5 * (mode + hi))], full_output=1)
    if len(out) > 3:
        raise NumericError("worst-case outer quadrature did not converge",
                           {"message": out[3], "estimate": out[0], "abserr": out[1]})
    return float(out[0]), float(out[1])


def rate_worst(cfg: ChannelConfig, eta: float = 1.0, rtol: float = 1e-6) -> MetricEstimate:
    """Worst-case (equidistant) aUE rate; eta > 1 gives the frequency-reuse variant."""
    if cfg.interferers == 0:
        raise DomainError("rate is unbounded without interferers (N = 4)")
    if eta < 1:
        raise ParameterError(f"reuse factor must be >= 1, got {eta}")
    exponent = cfg.interferers / float(eta)

    def inner(x):
        s = np.array([16.0 * x ** (-cfg.alpha)])
        return float(_rate_kernel(cfg, s, np.array([x]), exponent)[0])

    value, err = _outer_worst(cfg, inner, rtol * 10.0)
    return MetricEstimate(value / eta, err / eta, "analytic")


def rate_worst_thinned(cfg: ChannelConfig, eta: float, rtol: float = 1e-6) -> MetricEstimate:
    return rate_worst(cfg, eta=eta, rtol=rtol)


def coverage_worst(cfg: ChannelConfig, gamma_threshold: float, rtol: float = 1e-8) -> MetricEstimate:
    if not gamma_threshold > 0:
        raise DomainError(f"SIR threshold must be positive, got {gamma_threshold}")

    def inner(x):
        shape, scale = _shape_scale(cfg, x)
        return float(special.gammainc(shape, 16.0 * x ** (-cfg.alpha) / (gamma_threshold * scale)))

    value, err = _outer_worst(cfg, inner, rtol)
    return MetricEstimate(min(max(value, 0.0), 1.0), err, "analytic")


# ---------------------------------------------------------------------------
# Infinite-PPP mean interference (Campbell)
# ---------------------------------------------------------------------------

def _campbell(alpha: float, lo: float, hi: float) -> InterferenceMean:
    """∫_lo^hi 4π r^{2-alpha} dr."""
    if alpha == 3.0:
        if lo == 0.0 or math.isinf(hi):
            return InterferenceMean(math.inf, True)
        return InterferenceMean(4.0 * math.pi * math.log(hi / lo), False)
    p = 3.0 - alpha
    if (lo == 0.0 and p < 0) or (math.isinf(hi) and p > 0):
        return InterferenceMean(math.inf, True)
    f_hi = 0.0 if math.isinf(hi) else hi ** p / p
    f_lo = 0.0 if lo == 0.0 else lo ** p / p
    return InterferenceMean(4.0 * math.pi * (f_hi - f_lo), False)


def mean_total_interference_ppp(lam: float, alpha: float, r_min: float, r_max: float,
                                bounded: bool = False) -> InterferenceMean:
    """Mean interference of a PPP of density ``lam`` on the shell r_min <= r < r_max.

    ``bounded=True`` uses the path loss min(1, r^-alpha) (distances in meters).
    """
    if not lam > 0:
        raise ParameterError(f"density must be positive, got {lam}")
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    if not (0.0 <= r_min < r_max):
        raise ParameterError(f"need 0 <= r_min < r_max, got ({r_min}, {r_max})")
    if not bounded:
        res = _campbell(alpha, float(r_min), float(r_max))
        return InterferenceMean(lam * res.value, res.divergent)
    near = 0.0
    if r_min < 1.0:
        near = 4.0 * math.pi / 3.0 * (min(1.0, r_max) ** 3 - r_min ** 3)
    far = InterferenceMean(0.0, False)
    if r_max > 1.0:
        far = _campbell(alpha, max(1.0, float(r_min)), float(r_max))
    if far.divergent:
        return InterferenceMean(math.inf, True)
    return InterferenceMean(lam * (near + far.value), False)


def ppp_interference_mc(lam: float, alpha: float, r_min: float, r_max: float, trials: int,
                        seed: int) -> MetricEstimate:
    """Monte-Carlo of the shell interference; the point count is Poisson(lam * volume)."""
    if math.isinf(r_max):
        raise ParameterError("Monte-Carlo needs a finite outer radius")
    rng = np.random.default_rng(seed)
    vol = 4.0 * math.pi / 3.0 * (r_max ** 3 - r_min ** 3)
    counts = rng.poisson(lam * vol, size=int(trials))
    total = np.zeros(int(trials))
    radii = np.cbrt(r_min ** 3 + rng.random(int(counts.sum())) * (r_max ** 3 - r_min ** 3))
    owners = np.repeat(np.arange(int(trials)), counts)
    np.add.at(total, owners, radii ** (-alpha))
    return MetricEstimate.from_samples(total)


__all__ = [
    "ChannelConfig", "MetricEstimate", "GammaApproxParams", "QuadratureConfig", "InterferenceMean",
    "CoverageModel", "db_to_linear", "linear_to_db", "signal_power",
    "mgf_signal_general", "mgf_signal_worst", "mgf_interference_general", "mgf_interference_worst",
    "mgf_interference_quadrature", "log_interference_bracket",
    "rate_samples", "rate_general", "rate_reuse", "interference_moments", "gamma_approx_params",
    "coverage_general", "coverage_function_general", "coverage_curve_general", "rate_worst_thinned", "rate_from_coverage",
    "rate_worst", "coverage_worst", "mean_total_interference_ppp", "ppp_interference_mc",
]
