# core/planner.py
"""
Frequency planning over the Delaunay cells.

Pipeline (plan_frequencies):
  1. effective interference radius eps* from the rate threshold (quintic in eps / R)
  2. FCC packing of spheres of radius eps* over the coverage ball, one centered at the origin
  3. cell classification against the spheres (standard / residual / independent)
  4. greedy coloring, spheres processed by descending cell count, random restarts

Also hosts the reuse-aware rate wrappers (thinned BPP and the hard-core
equivalent) and the plan / sphere CSV export.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from core.analytics import ChannelConfig, MetricEstimate, rate_reuse
from core.distances import BppParams
from core.errors import DomainError, ParameterError, SolverError
from core.geometry import Point3, Tetrahedralization
from core.special import log_gamma
from core.workers import CHUNK_SIZE, RunController, chunk_rng, map_chunks
from utils.csv_utils import write_csv
from utils.log_utils import LogCb, safe_log

CASES = ("general", "worst")
CELL_CLASSES = ("standard", "residual", "independent")

DEFAULT_RESTARTS = 8

# eps / R search interval for the quintic
_T_MAX = 10.0

# contact tolerance for "vertex inside sphere" relative to the sphere radius
_INSIDE_RTOL = 1e-12


def _check_case(case: str) -> str:
    if case not in CASES:
        raise ParameterError(f"case must be one of {CASES}, got {case!r}")
    return case


@dataclass(frozen=True)
class ReuseConfig:
    """Planning parameters; the path loss exponent is fixed to 2 for planning."""
    rate_threshold: float
    n_abs: int
    radius: float
    alpha: float = field(default=2.0, init=False)

    def __post_init__(self):
        if not (self.rate_threshold > 0 and math.isfinite(self.rate_threshold)):
            raise ParameterError(f"rate_threshold must be positive, got {self.rate_threshold}")
        bpp = BppParams(self.n_abs, self.radius)
        object.__setattr__(self, "rate_threshold", float(self.rate_threshold))
        object.__setattr__(self, "n_abs", bpp.n_abs)
        object.__setattr__(self, "radius", bpp.radius)

    @property
    def sir_threshold(self) -> float:
        return math.expm1(self.rate_threshold)

    def channel(self) -> ChannelConfig:
        return ChannelConfig(self.alpha, self.n_abs, self.radius)


# =========================================
# Reuse radius
# =========================================

def expected_signal_power(cfg: ReuseConfig, case: str, epsilon: float) -> float:
    """Mean coherent signal power of four servers inside b(0, eps), alpha = 2."""
    _check_case(case)
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    n = cfg.n_abs
    if case == "general":
        log_val = math.log(65.0 / 12.0) + log_gamma(n + 1.0) + log_gamma(10.0 / 3.0) - log_gamma(n + 1.0 / 3.0)
    else:
        log_val = math.log(8.0) + log_gamma(7.0 / 3.0) + log_gamma(float(n)) - log_gamma(n - 2.0 / 3.0)
    return math.exp(log_val) / (epsilon * epsilon)


def expected_interference_outside(cfg: ReuseConfig, epsilon: float) -> float:
    """Mean interference from aBSs outside b(0, eps), in its published closed form."""
    big_r = cfg.radius
    if not (0.0 < epsilon < big_r):
        raise DomainError(f"epsilon must lie in (0, {big_r}), got {epsilon}")
    return 3.0 * cfg.n_abs * epsilon ** 3 / (big_r ** 3 * (big_r ** 2 + big_r * epsilon + epsilon ** 2))


def interference_outside_mc(cfg: ReuseConfig, epsilon: float, trials: int, seed: int,
                            workers: int = 1) -> MetricEstimate:
    """Monte-Carlo of sum_{|x| > eps} |x|^-2 over N uniform aBSs (exact value 3N(R - eps)/R^3)."""
    big_r = cfg.radius
    if not (0.0 < epsilon < big_r):
        raise DomainError(f"epsilon must lie in (0, {big_r}), got {epsilon}")
    n = cfg.n_abs

    def work(index, start, stop):
        r = big_r * np.cbrt(chunk_rng(seed, index).random((stop - start, n)))
        return np.where(r > epsilon, r ** -2.0, 0.0).sum(axis=1)

    return MetricEstimate.from_samples(np.concatenate(map_chunks(work, int(trials), CHUNK_SIZE, workers)))


def delta_coefficient(cfg: ReuseConfig, case: str) -> float:
    """Coefficient of the eps* polynomial: eps^2 E[X] / (3N)."""
    return expected_signal_power(cfg, case, 1.0) / (3.0 * cfg.n_abs)


def _quintic(cfg: ReuseConfig, case: str):
    lead = cfg.sir_threshold
    delta = delta_coefficient(cfg, case)
    return lambda t: lead * t ** 5 - delta * (t * t + t + 1.0)


def solve_epsilon_star(cfg: ReuseConfig, case: str = "general", log: Optional[LogCb] = None) -> float:
    """Positive root of (e^Rth - 1) eps^5 - D R^3 eps^2 - D R^4 eps - D R^5.

    Solved in t = eps / R, where the polynomial no longer depends on R.
    A root beyond R is clamped to R with a warning.
    """
    _check_case(case)
    f = _quintic(cfg, case)
    lo, hi = f(0.0), f(_T_MAX)
    if not (lo < 0.0 < hi):
        raise SolverError("no sign change of the reuse-radius polynomial",
                          {"f(0)": lo, f"f({_T_MAX:g}R)": hi, "case": case, "n_abs": cfg.n_abs})
    t, info = optimize.brentq(f, 0.0, _T_MAX, xtol=1e-14, rtol=1e-12, maxiter=200, full_output=True)
    if not info.converged:
        raise SolverError("reuse-radius bisection did not converge", {"iterations": info.iterations})
    if t > 1.0:
        safe_log(log, f"eps* = {t:.4f} R lies outside the coverage ball; using R", "warning")
        return cfg.radius
    return float(t * cfg.radius)


def epsilon_residual(cfg: ReuseConfig, case: str, epsilon: float) -> float:
    """|polynomial(eps)| relative to its leading term."""
    t = epsilon / cfg.radius
    lead = cfg.sir_threshold * t ** 5
    return abs(_quintic(cfg, case)(t)) / lead


def reuse_factor(cfg: ReuseConfig, epsilon_star: float) -> int:
    """eta = ceil((24/35) N pi^2 (eps*/R)^3)."""
    if not epsilon_star > 0:
        raise DomainError(f"epsilon_star must be positive, got {epsilon_star}")
    value = 24.0 / 35.0 * cfg.n_abs * math.pi ** 2 * (epsilon_star / cfg.radius) ** 3
    return max(1, math.ceil(value))


# =========================================
# FCC packing
# =========================================

def fcc_sphere_centers(domain_radius: float, sphere_radius: float) -> np.ndarray:
    """Centers (M, 3) of an FCC packing of spheres of radius r, one at the origin.

    Cube edge a = 2 sqrt(2) r; centers are (a/2)(i, j, k) with i + j + k even,
    kept while |c| <= domain_radius + r. Sorted by norm, then lexicographically.
    """
    if not sphere_radius > 0:
        raise ParameterError(f"sphere_radius must be positive, got {sphere_radius}")
    if not domain_radius >= 0:
        raise ParameterError(f"domain_radius must be non-negative, got {domain_radius}")
    half = math.sqrt(2.0) * sphere_radius
    reach = domain_radius + sphere_radius
    m = int(math.ceil(reach / half))
    ax = np.arange(-m, m + 1)
    i, j, k = np.meshgrid(ax, ax, ax, indexing="ij")
    idx = np.column_stack([i.ravel(), j.ravel(), k.ravel()])
    idx = idx[idx.sum(axis=1) % 2 == 0]
    pts = idx * half
    nrm = np.linalg.norm(pts, axis=1)
    keep = nrm <= reach * (1.0 + 1e-12)
    pts, nrm = pts[keep], nrm[keep]
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], np.round(nrm, 9)))
    return pts[order]


def packing_efficiency(sphere_radius: float = 1.0) -> float:
    """Sphere volume fraction of one conventional FCC cube, counting shared spheres by weight."""
    a = 2.0 * math.sqrt(2.0) * sphere_radius
    pts = fcc_sphere_centers(a * math.sqrt(3.0), sphere_radius)
    in_cube = np.all((pts >= -1e-9 * a) & (pts <= a * (1.0 + 1e-9)), axis=1)
    cube = pts[in_cube]
    on_face = (np.abs(cube) < 1e-9 * a) | (np.abs(cube - a) < 1e-9 * a)
    weight = np.power(0.5, on_face.sum(axis=1)).sum()
    return float(weight * 4.0 / 3.0 * math.pi * sphere_radius ** 3 / a ** 3)


# =========================================
# Cell classification
# =========================================

def _closest_on_triangle(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return a
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return b
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        return a + ab * (d1 / (d1 - d3))
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return c
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        return a + ac * (d2 / (d2 - d6))
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)))
    denom = 1.0 / (va + vb + vc)
    return a + ab * (vb * denom) + ac * (vc * denom)


def point_tetrahedron_distance(point, vertices) -> float:
    """Euclidean distance from ``point`` to the solid tetrahedron (0 inside)."""
    p = np.asarray(point, dtype=float).reshape(3)
    v = np.asarray(vertices, dtype=float).reshape(4, 3)
    edges = (v[1:] - v[0]).T
    try:
        lam = np.linalg.solve(edges, p - v[0])
        if np.all(lam >= 0) and lam.sum() <= 1.0:
            return 0.0
    except np.linalg.LinAlgError:
        pass
    best = math.inf
    for skip in range(4):
        a, b, c = (v[k] for k in range(4) if k != skip)
        q = _closest_on_triangle(p, a, b, c)
        best = min(best, float(np.linalg.norm(p - q)))
    return best


@dataclass(frozen=True)
class SphereCluster:
    sphere_id: int
    center: Point3
    radius: float
    member_cell_ids: Tuple[int, ...]
    ordinal: int

    @property
    def size(self) -> int:
        return len(self.member_cell_ids)


@dataclass(frozen=True)
class CellClassification:
    cell_id: int
    cell_class: str
    sphere_ids: Tuple[int, ...]


def _relations(tess: Tetrahedralization, centers: np.ndarray, radius: np.ndarray):
    """(T, M) boolean matrices: cell fully inside sphere, cell intersects sphere."""
    coords = tess.source.coords
    simp = tess.simplices
    t, m = len(simp), len(centers)
    if t == 0 or m == 0:
        empty = np.zeros((t, m), dtype=bool)
        return empty, empty.copy()
    # (N, M) vertex-in-sphere
    dist = np.linalg.norm(coords[:, None, :] - centers[None, :, :], axis=2)
    vin = dist <= radius[None, :] * (1.0 + _INSIDE_RTOL)
    per_cell = vin[simp]  # (T, 4, M)
    contains = per_cell.all(axis=1)
    touches = per_cell.any(axis=1)

    verts = coords[simp]
    centroid = verts.mean(axis=1)
    reach = np.linalg.norm(verts - centroid[:, None, :], axis=2).max(axis=1)
    gap = np.linalg.norm(centroid[:, None, :] - centers[None, :, :], axis=2)
    maybe = (~touches) & (gap <= reach[:, None] + radius[None, :])
    intersects = touches.copy()
    for ci, si in zip(*np.nonzero(maybe)):
        if point_tetrahedron_distance(centers[si], verts[ci]) <= radius[si]:
            intersects[ci, si] = True
    return contains, intersects


def build_clusters(tess: Tetrahedralization, centers: np.ndarray, radius: float) -> List[SphereCluster]:
    """Spheres with at least one member cell, ids and ordinals by descending member count."""
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    radii = np.full(len(centers), float(radius))
    contains, intersects = _relations(tess, centers, radii)
    standard = contains.any(axis=1)
    members: List[Tuple[int, ...]] = []
    for si in range(len(centers)):
        own = contains[:, si] | (intersects[:, si] & ~standard)
        members.append(tuple(int(c) for c in np.flatnonzero(own)))
    used = [si for si in range(len(centers)) if members[si]]
    used.sort(key=lambda si: (-len(members[si]), si))
    return [SphereCluster(rank, Point3.of(centers[si]), float(radius), members[si], rank + 1)
            for rank, si in enumerate(used)]


def classify_cells(tess: Tetrahedralization, clusters: Sequence[SphereCluster]) -> List[CellClassification]:
    if not clusters:
        return [CellClassification(ci, "independent", ()) for ci in range(len(tess))]
    centers = np.array([c.center for c in clusters], dtype=float)
    radii = np.array([c.radius for c in clusters], dtype=float)
    ids = [c.sphere_id for c in clusters]
    contains, intersects = _relations(tess, centers, radii)
    out = []
    for ci in range(len(tess)):
        inside = np.flatnonzero(contains[ci])
        if len(inside):
            out.append(CellClassification(ci, "standard", (ids[int(inside[0])],)))
            continue
        hit = np.flatnonzero(intersects[ci])
        if len(hit):
            out.append(CellClassification(ci, "residual", tuple(ids[int(s)] for s in hit)))
        else:
            out.append(CellClassification(ci, "independent", ()))
    return out


# =========================================
# Greedy coloring
# =========================================

@dataclass
class FrequencyPlan:
    epsilon_star: float
    clusters: List[SphereCluster]
    classifications: List[CellClassification]
    colors: Dict[int, int]
    n_colors: int
    restarts: int = 1
    case: str = "general"

    @property
    def k1(self) -> int:
        """Member count of the largest sphere."""
        return self.clusters[0].size if self.clusters else 0

    @property
    def colors_exceed_k1(self) -> bool:
        return self.n_colors > self.k1

    @property
    def bandwidth_fraction(self) -> float:
        """Share of the total band per cell.

        The band is split into max(k1, n_colors) equal sub-bands: 1/k1 while the greedy
        coloring fits in k1 colors, 1/n_colors when residual or independent cells push it
        past k1 (see ``colors_exceed_k1``). Sub-bands left idle in smaller spheres are not
        handed back.
        """
        return 1.0 / max(self.k1, self.n_colors, 1)

    def color_of(self, cell_id: int) -> int:
        return self.colors[cell_id]

    def class_counts(self) -> Dict[str, int]:
        counts = {c: 0 for c in CELL_CLASSES}
        for item in self.classifications:
            counts[item.cell_class] += 1
        return counts

    def violations(self) -> List[Tuple[int, int, int]]:
        """(sphere_id, cell_a, cell_b) for every same-color pair inside one sphere."""
        found = []
        members: Dict[int, List[int]] = {c.sphere_id: [] for c in self.clusters}
        for item in self.classifications:
            for s in item.sphere_ids:
                members.setdefault(s, []).append(item.cell_id)
        for s, cells in members.items():
            seen: Dict[int, int] = {}
            for cell in sorted(cells):
                color = self.colors[cell]
                if color in seen:
                    found.append((s, seen[color], cell))
                else:
                    seen[color] = cell
        return found

    def is_valid(self) -> bool:
        return not self.violations()

    def same_color_cells(self, cell_id: int) -> List[int]:
        color = self.colors[cell_id]
        return [c for c, col in self.colors.items() if col == color and c != cell_id]


class GreedyColoring:
    """Smallest-free-color assignment, spheres visited in descending size."""

    def __init__(self, log: Optional[LogCb] = None):
        self.log = log

    def color_once(self, clusters: Sequence[SphereCluster], spheres_of: Dict[int, Tuple[int, ...]],
                   order: Dict[int, Sequence[int]]) -> Dict[int, int]:
        res: Dict[int, int] = {}
        used: Dict[int, set] = {c.sphere_id: set() for c in clusters}
        for cluster in clusters:
            for cell in order[cluster.sphere_id]:
                if cell in res:
                    continue
                taken = set()
                own = spheres_of.get(cell, (cluster.sphere_id,))
                for s in own:
                    taken |= used[s]
                cr = 0
                while cr in taken:
                    cr += 1
                res[cell] = cr
                for s in own:
                    used[s].add(cr)
        return res

    def best_of(self, clusters: Sequence[SphereCluster], classifications: Sequence[CellClassification],
                restarts: int, rng: np.random.Generator) -> Dict[int, int]:
        spheres_of = {c.cell_id: c.sphere_ids for c in classifications if c.sphere_ids}
        best: Optional[Dict[int, int]] = None
        best_n = math.inf
        for attempt in range(restarts):
            order = {}
            for cluster in clusters:
                cells = list(cluster.member_cell_ids)
                if attempt > 0:
                    cells = [cells[i] for i in rng.permutation(len(cells))]
                order[cluster.sphere_id] = cells
            res = self.color_once(clusters, spheres_of, order)
            n = (max(res.values()) + 1) if res else 0
            if n < best_n:
                best, best_n = res, n
        safe_log(self.log, f"greedy coloring: {best_n} colors after {restarts} restart(s)", "info")
        return best or {}


def greedy_frequency_allocation(tess: Tetrahedralization, clusters: Sequence[SphereCluster],
                                classifications: Sequence[CellClassification],
                                restarts: int = DEFAULT_RESTARTS, seed: int = 0,
                                epsilon_star: Optional[float] = None,
                                log: Optional[LogCb] = None) -> FrequencyPlan:
    """Restart 0 keeps the ascending cell order; the plan with fewest colors wins (ties: earliest)."""
    if int(restarts) != restarts or restarts < 1:
        raise ParameterError(f"restarts must be a positive integer, got {restarts}")
    if len(classifications) != len(tess):
        raise ParameterError("one classification per cell is required")
    rng = np.random.default_rng(seed)
    colors = GreedyColoring(log).best_of(clusters, classifications, int(restarts), rng)

    palette = sorted({colors[c] for c in clusters[0].member_cell_ids}) if clusters else [0]
    full: Dict[int, int] = {}
    for item in classifications:
        if item.cell_class == "independent":
            full[item.cell_id] = int(palette[int(rng.integers(len(palette)))])
        else:
            full[item.cell_id] = colors[item.cell_id]
    n_colors = (max(full.values()) + 1) if full else 0
    eps = epsilon_star if epsilon_star is not None else (clusters[0].radius if clusters else math.nan)
    return FrequencyPlan(float(eps), list(clusters), list(classifications), full, n_colors, int(restarts))


def plan_frequencies(tess: Tetrahedralization, cfg: ReuseConfig, case: str = "general",
                     restarts: int = DEFAULT_RESTARTS, seed: int = 0,
                     epsilon_override: Optional[float] = None,
                     log: Optional[LogCb] = None) -> FrequencyPlan:
    """eps* -> FCC spheres -> classification -> greedy coloring."""
    _check_case(case)
    if epsilon_override is not None:
        if not epsilon_override > 0:
            raise ParameterError(f"epsilon override must be positive, got {epsilon_override}")
        eps = float(epsilon_override)
    else:
        eps = solve_epsilon_star(cfg, case, log)
    centers = fcc_sphere_centers(cfg.radius, eps)
    clusters = build_clusters(tess, centers, eps)
    classifications = classify_cells(tess, clusters)
    plan = greedy_frequency_allocation(tess, clusters, classifications, restarts, seed, eps, log)
    plan.case = case
    if plan.colors_exceed_k1:
        safe_log(log, f"coloring needs {plan.n_colors} colors, more than the largest sphere (k1={plan.k1}); "
                      f"bandwidth share is 1/{plan.n_colors}", "warning")
    return plan


# =========================================
# Reuse-aware rates
# =========================================

def thinned_rate(cfg: ChannelConfig, eta: float, mc_outer_samples: int, seed: int, workers: int = 1,
                 controller: Optional[RunController] = None) -> MetricEstimate:
    """Rate with the interferers thinned by the reuse factor and bandwidth share 1/eta."""
    return rate_reuse(cfg, eta, mc_outer_samples, seed, workers, controller)


def mhcpp_params(cfg, epsilon_star: float, log: Optional[LogCb] = None) -> Tuple[int, int]:
    """(psi, eta'): retained same-band interferers of the hard-core model and the equivalent reuse factor.

    ``cfg`` needs ``n_abs`` and ``radius``. Rounding is half-to-even; psi is kept >= 1.
    """
    if not epsilon_star > 0:
        raise DomainError(f"epsilon_star must be positive, got {epsilon_star}")
    m = cfg.n_abs - 4
    ratio3 = (epsilon_star / cfg.radius) ** 3
    psi = int(round(m * math.exp(-m * ratio3)))
    if psi < 1:
        safe_log(log, f"hard-core interferer count rounds to {psi}; using 1", "warning")
        psi = 1
    eta_prime = max(1, int(round(m / psi)))
    return psi, eta_prime


def rate_mhcpp(cfg: ChannelConfig, eta_prime: int, mc_outer_samples: int, seed: int, workers: int = 1,
               controller: Optional[RunController] = None) -> MetricEstimate:
    if int(eta_prime) != eta_prime or eta_prime < 1:
        raise ParameterError(f"eta_prime must be a positive integer, got {eta_prime}")
    return rate_reuse(cfg, int(eta_prime), mc_outer_samples, seed, workers, controller)


# =========================================
# Export
# =========================================

PLAN_HEADER = ("cell_id", "v0", "v1", "v2", "v3", "class", "sphere_ids", "color")
SPHERE_HEADER = ("sphere_id", "cx", "cy", "cz", "radius", "n_cells")


def write_plan_csv(plan: FrequencyPlan, tess: Tetrahedralization, path: str, meta: Optional[dict] = None) -> str:
    rows = []
    for item in plan.classifications:
        v = tess.simplices[item.cell_id]
        rows.append((item.cell_id, int(v[0]), int(v[1]), int(v[2]), int(v[3]), item.cell_class,
                     ";".join(str(s) for s in item.sphere_ids), plan.colors[item.cell_id]))
    return write_csv(path, PLAN_HEADER, rows, meta)


def write_spheres_csv(plan: FrequencyPlan, path: str, meta: Optional[dict] = None) -> str:
    rows = [(c.sphere_id, c.center.x, c.center.y, c.center.z, c.radius, c.size) for c in plan.clusters]
    return write_csv(path, SPHERE_HEADER, rows, meta)
