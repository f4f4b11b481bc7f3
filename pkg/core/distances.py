# core/distances.py
"""
Distance laws of N i.i.d. uniform points in b(0, R), seen from the center.

Every density is available in natural and log form; the log form is the
primary implementation because (1 - F)^{N-4} underflows for N in the hundreds.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy import special

from core.errors import DomainError, ParameterError
from core.special import log_beta

SeedLike = Union[None, int, np.random.Generator]


@dataclass(frozen=True)
class BppParams:
    """N points, radius R. N = 4 is accepted and means an empty interferer set."""
    n_abs: int
    radius: float

    def __post_init__(self):
        if int(self.n_abs) != self.n_abs or self.n_abs < 4:
            raise ParameterError(f"n_abs must be an integer >= 4, got {self.n_abs}")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ParameterError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "n_abs", int(self.n_abs))
        object.__setattr__(self, "radius", float(self.radius))


class OrderedDistances(NamedTuple):
    r1: float
    r2: float
    r3: float
    r4: float

    @classmethod
    def checked(cls, values, radius: float) -> "OrderedDistances":
        r = np.asarray(values, dtype=float).reshape(4)
        _check_ordered(r[None, :], radius)
        return cls(*(float(v) for v in r))


def as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _out(value, scalar: bool):
    return float(value) if scalar else value


def _radii(params: BppParams, r, lower: float = 0.0):
    arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < lower) or np.any(arr > params.radius):
        raise DomainError(f"distance outside [{lower}, {params.radius}]")
    return arr, arr.ndim == 0


def _check_ordered(r: np.ndarray, radius: float):
    if r.shape[-1] != 4:
        raise DomainError("expected four ordered distances")
    if np.any(r[..., 0] <= 0) or np.any(r[..., 3] > radius):
        raise DomainError(f"ordered distances must lie in (0, {radius}]")
    if np.any(np.diff(r, axis=-1) <= 0):
        raise DomainError("ordered distances must be strictly increasing")


# ---------------------------------------------------------------------------
# Single distance
# ---------------------------------------------------------------------------

def nearest_cdf(params: BppParams, r):
    """P(distance of one point <= r) = (r/R)^3."""
    arr, scalar = _radii(params, r)
    return _out((arr / params.radius) ** 3, scalar)


def log_nearest_pdf(params: BppParams, r):
    arr, scalar = _radii(params, r)
    with np.errstate(divide="ignore"):
        value = math.log(3.0) + 2.0 * np.log(arr) - 3.0 * math.log(params.radius)
    return _out(value, scalar)


def nearest_pdf(params: BppParams, r):
    arr, scalar = _radii(params, r)
    return _out(3.0 * arr ** 2 / params.radius ** 3, scalar)


def _check_serving(params: BppParams, serving_r: float) -> float:
    d = float(serving_r)
    if not (0.0 < d < params.radius):
        raise DomainError(f"serving distance must lie in (0, {params.radius}), got {serving_r}")
    return d


def interferer_pdf_conditional(params: BppParams, serving_r: float, r):
    """Density of one interferer distance given the serving distance d: 3r^2/(R^3 - d^3) on [d, R]."""
    d = _check_serving(params, serving_r)
    arr, scalar = _radii(params, r, lower=d)
    return _out(3.0 * arr ** 2 / (params.radius ** 3 - d ** 3), scalar)


def interferer_cdf_conditional(params: BppParams, serving_r: float, r):
    d = _check_serving(params, serving_r)
    arr, scalar = _radii(params, r, lower=d)
    return _out((arr ** 3 - d ** 3) / (params.radius ** 3 - d ** 3), scalar)


# ---------------------------------------------------------------------------
# Order statistics
# ---------------------------------------------------------------------------

def log_joint_pdf_4nearest(params: BppParams, r):
    """Log density of the four smallest distances; ``r`` has trailing dimension 4."""
    arr = np.asarray(r, dtype=float)
    _check_ordered(arr, params.radius)
    n, big_r = params.n_abs, params.radius
    log_perm = special.gammaln(n + 1) - special.gammaln(n - 3)
    u4 = (arr[..., 3] / big_r) ** 3
    with np.errstate(divide="ignore"):
        tail = (n - 4) * np.log1p(-u4) if n > 4 else np.zeros_like(u4)
        local = np.sum(np.log(3.0 * arr ** 2 / big_r ** 3), axis=-1)
    value = log_perm + tail + local
    return float(value) if np.ndim(value) == 0 else value


def joint_pdf_4nearest(params: BppParams, r):
    return np.exp(log_joint_pdf_4nearest(params, r))


def _check_k(params: BppParams, k: int, upper: Optional[int] = None):
    upper = params.n_abs if upper is None else upper
    if int(k) != k or not (1 <= k <= upper):
        raise ParameterError(f"k must be an integer in [1, {upper}], got {k}")
    return int(k)


def log_kth_nearest_pdf(params: BppParams, k: int, r):
    k = _check_k(params, k)
    arr, scalar = _radii(params, r)
    n = params.n_abs
    log_c = special.gammaln(n + 1) - special.gammaln(k) - special.gammaln(n - k + 1)
    u = (arr / params.radius) ** 3
    with np.errstate(divide="ignore", invalid="ignore"):
        value = (log_c
                 + (special.xlogy(k - 1, u) if k > 1 else 0.0)
                 + (special.xlog1py(n - k, -u) if n > k else 0.0)
                 + math.log(3.0) + 2.0 * np.log(arr) - 3.0 * math.log(params.radius))
    return _out(value, scalar)


def kth_nearest_pdf(params: BppParams, k: int, r):
    """N!/((k-1)!(N-k)!) F^{k-1} (1-F)^{N-k} f."""
    value = np.exp(log_kth_nearest_pdf(params, k, r))
    return float(value) if np.ndim(value) == 0 else value


def kth_nearest_cdf(params: BppParams, k: int, r):
    k = _check_k(params, k)
    arr, scalar = _radii(params, r)
    u = (arr / params.radius) ** 3
    return _out(special.betainc(k, params.n_abs - k + 1, u), scalar)


def fourth_nearest_pdf(params: BppParams, r4):
    return kth_nearest_pdf(params, 4, r4)


def log_fourth_nearest_pdf(params: BppParams, r4):
    return log_kth_nearest_pdf(params, 4, r4)


# ---------------------------------------------------------------------------
# Equidistant (worst-case) distance
# ---------------------------------------------------------------------------

def log_equidistant_pdf(params: BppParams, k: int, x):
    """Kernel (x/R)^{2k} (1-(x/R)^3)^{N-k}, normalized exactly.

    The normalizer is R/3 * B((2k+1)/3, N-k+1); at k = 4 this is the
    familiar 3 / (R B(N-3, 3)).
    """
    k = _check_k(params, k, upper=params.n_abs - 1)
    arr, scalar = _radii(params, x)
    n, big_r = params.n_abs, params.radius
    u = arr / big_r
    log_norm = math.log(3.0 / big_r) - log_beta((2 * k + 1) / 3.0, n - k + 1)
    with np.errstate(divide="ignore"):
        value = log_norm + special.xlogy(2 * k, u) + special.xlog1py(n - k, -u ** 3)
    return _out(value, scalar)


def equidistant_pdf(params: BppParams, k: int, x):
    value = np.exp(log_equidistant_pdf(params, k, x))
    return float(value) if np.ndim(value) == 0 else value


def equidistant_mode(params: BppParams, k: int = 4) -> float:
    """argmax of the equidistant density: (2k / (2k + 3(N-k)))^{1/3} R."""
    k = _check_k(params, k, upper=params.n_abs - 1)
    n = params.n_abs
    return params.radius * (2.0 * k / (2.0 * k + 3.0 * (n - k))) ** (1.0 / 3.0)


def equidistant_printed_mass(params: BppParams, k: int) -> float:
    """Total mass of the kernel under the printed general-k constant.

    The printed constant is 3 / (R B(N-k, (2/3)^k + 1/3)); a correct
    normalization gives 1. At k = 4 the closed form used above is exact, for
    other k this number shows how far the printed constant is off.
    """
    k = _check_k(params, k, upper=params.n_abs - 1)
    n = params.n_abs
    exact = log_beta((2 * k + 1) / 3.0, n - k + 1)
    printed = log_beta(n - k, (2.0 / 3.0) ** k + 1.0 / 3.0)
    return math.exp(exact - printed)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

def sample_ordered_nearest(params: BppParams, k: int, seed: SeedLike = None,
                           size: Optional[int] = None, chunk: int = 8192):
    """k smallest of N radii drawn as R u^{1/3}, sorted.

    ``size=None`` returns one draw (OrderedDistances when k == 4), otherwise an
    array of shape (size, k).
    """
    k = _check_k(params, k)
    rng = as_rng(seed)
    n, big_r = params.n_abs, params.radius
    if size is None:
        r = np.sort(big_r * np.cbrt(rng.random(n)))[:k]
        return OrderedDistances(*(float(v) for v in r)) if k == 4 else r
    if int(size) != size or size < 1:
        raise ParameterError(f"size must be a positive integer, got {size}")
    out = np.empty((int(size), k))
    for start in range(0, int(size), chunk):
        stop = min(start + chunk, int(size))
        r = big_r * np.cbrt(rng.random((stop - start, n)))
        if k < n:
            r = np.partition(r, k - 1, axis=1)[:, :k]
        out[start:stop] = np.sort(r, axis=1)
    return out


def sample_interferer_distances(params: BppParams, serving_r, shape, seed: SeedLike = None) -> np.ndarray:
    """Inverse transform of the conditional interferer law: r = (d^3 + u (R^3 - d^3))^{1/3}.

    ``serving_r`` may be an array broadcastable against ``shape``.
    """
    rng = as_rng(seed)
    d = np.asarray(serving_r, dtype=float)
    if np.any(d <= 0) or np.any(d >= params.radius):
        raise DomainError(f"serving distance must lie in (0, {params.radius})")
    u = rng.random(shape)
    d3 = d ** 3
    return np.cbrt(d3 + u * (params.radius ** 3 - d3))
