# core/simulator.py
"""
Monte-Carlo SIR simulation of the reference aUE.

Every trial draws a fresh BPP from its own substream (seed, trial index), so
two schemes run with the same seed see identical realizations trial by trial
and results do not depend on the worker count.
"""
import enum
import math
import re
from dataclasses import dataclass, field, replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from core.analytics import ChannelConfig, GammaApproxParams, MetricEstimate, db_to_linear
from core.distances import sample_interferer_distances
from core.errors import DegeneracyError, NumericError, ParameterError
from core.geometry import (
    BACKENDS,
    NetworkRealization,
    Tetrahedralization,
    delaunay_tetrahedralize,
    locate_tetrahedron,
    uniform_ball,
)
from core.planner import DEFAULT_RESTARTS, CASES, ReuseConfig, plan_frequencies, solve_epsilon_star
from core.workers import RunController, chunk_rng, map_chunks
from utils.log_utils import LogCb, safe_log

# trials per work unit; results do not depend on it (per-trial substreams)
SIM_CHUNK = 256

# nearest points handed to qhull before falling back to the full tessellation
LOCAL_DELAUNAY_POINTS = 32

MIN_HISTOGRAM_BINS = 10


class SimMode(str, enum.Enum):
    DELAUNAY_COMP = "delaunay_comp"
    NEAREST4_COMP = "nearest4_comp"
    VORONOI_NO_COMP = "voronoi_no_comp"
    DYNAMIC_COMP = "dynamic_comp"
    WORST_CASE_CIRCUMCENTER = "worst_case_circumcenter"


_MODE_RE = re.compile(r"^\s*([a-z0-9_]+)\s*(?:\(\s*(\d+)\s*\))?\s*$")

_DEFAULT_COOP = {
    SimMode.DELAUNAY_COMP: 4,
    SimMode.NEAREST4_COMP: 4,
    SimMode.VORONOI_NO_COMP: 1,
    SimMode.DYNAMIC_COMP: 4,
    SimMode.WORST_CASE_CIRCUMCENTER: 4,
}


def parse_mode(text: Union[str, SimMode]) -> Tuple[SimMode, int]:
    """'dynamic_comp(3)' -> (DYNAMIC_COMP, 3); plain names get their natural server count."""
    if isinstance(text, SimMode):
        return text, _DEFAULT_COOP[text]
    m = _MODE_RE.match(str(text).lower())
    if not m:
        raise ParameterError(f"cannot parse simulation mode {text!r}")
    try:
        mode = SimMode(m.group(1))
    except ValueError:
        raise ParameterError(f"unknown simulation mode {m.group(1)!r}; "
                             f"expected one of {[x.value for x in SimMode]}") from None
    if m.group(2) is None:
        return mode, _DEFAULT_COOP[mode]
    if mode is not SimMode.DYNAMIC_COMP:
        raise ParameterError(f"only dynamic_comp takes a server count, got {text!r}")
    n = int(m.group(2))
    if not 1 <= n <= 4:
        raise ParameterError(f"dynamic_comp server count must be in 1..4, got {n}")
    return mode, n


def mode_label(mode: SimMode, n_coop: int) -> str:
    return f"{mode.value}({n_coop})" if mode is SimMode.DYNAMIC_COMP else mode.value


@dataclass(frozen=True)
class ReusePlanSpec:
    """Per-realization frequency plan: give either the rate threshold or eps* directly."""
    rate_threshold: Optional[float] = None
    epsilon_star: Optional[float] = None
    case: str = "general"
    restarts: int = DEFAULT_RESTARTS

    def __post_init__(self):
        if (self.rate_threshold is None) == (self.epsilon_star is None):
            raise ParameterError("frequency plan needs exactly one of rate_threshold / epsilon_star")
        if self.case not in CASES:
            raise ParameterError(f"case must be one of {CASES}, got {self.case!r}")
        if self.restarts < 1:
            raise ParameterError("restarts must be >= 1")

    def resolve_epsilon(self, channel: ChannelConfig, log: Optional[LogCb] = None) -> float:
        if self.epsilon_star is not None:
            return float(self.epsilon_star)
        return solve_epsilon_star(ReuseConfig(self.rate_threshold, channel.n_abs, channel.radius), self.case, log)


@dataclass(frozen=True)
class SimConfig:
    channel: ChannelConfig
    mode: SimMode = SimMode.DELAUNAY_COMP
    trials: int = 10_000
    seed: int = 0
    gamma_grid_db: Tuple[float, ...] = ()
    n_coop: Optional[int] = None
    frequency_plan: Optional[ReusePlanSpec] = None
    workers: int = 1
    delaunay_backend: str = "qhull"
    max_circumcenter_retries: int = 50

    def __post_init__(self):
        mode, default_n = parse_mode(self.mode)
        n = default_n if self.n_coop is None else int(self.n_coop)
        if mode is SimMode.DYNAMIC_COMP and not 1 <= n <= 4:
            raise ParameterError(f"dynamic_comp server count must be in 1..4, got {n}")
        if mode is not SimMode.DYNAMIC_COMP and n != default_n:
            raise ParameterError(f"{mode.value} always uses {default_n} server(s)")
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "n_coop", n)
        if self.channel.n_abs < 5:
            raise ParameterError("simulation needs at least one interferer (n_abs >= 5)")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ParameterError(f"trials must be a positive integer, got {self.trials}")
        grid = tuple(float(g) for g in self.gamma_grid_db)
        if not all(math.isfinite(g) for g in grid):
            raise ParameterError("gamma grid must be finite")
        object.__setattr__(self, "gamma_grid_db", grid)
        if self.delaunay_backend not in BACKENDS:
            raise ParameterError(f"unknown Delaunay backend {self.delaunay_backend!r}")
        if self.workers < 1 or self.max_circumcenter_retries < 1:
            raise ParameterError("workers and max_circumcenter_retries must be >= 1")
        if self.frequency_plan is not None and mode not in (SimMode.DELAUNAY_COMP,
                                                            SimMode.WORST_CASE_CIRCUMCENTER):
            raise ParameterError("frequency reuse needs a cell-based mode (delaunay_comp or worst_case_circumcenter)")

    @property
    def label(self) -> str:
        return mode_label(self.mode, self.n_coop)

    def with_mode(self, mode: Union[str, SimMode]) -> "SimConfig":
        parsed, n = parse_mode(mode)
        return replace(self, mode=parsed, n_coop=n)


@dataclass(frozen=True)
class SirSample:
    sir: float
    serving_ids: Tuple[int, ...]
    realization_seed: int


@dataclass
class SirBatch:
    """Accepted trials in trial order; ``trial_index`` identifies the realization substream."""
    mode: str
    sir: np.ndarray
    signal: np.ndarray
    interference: np.ndarray
    serving_distance: np.ndarray  # common distance (worst case) or farthest server
    serving_ids: List[Tuple[int, ...]]
    trial_index: np.ndarray
    skipped: int = 0
    # reuse only: trials whose serving cell had no co-channel interferer (SIR undefined)
    interference_free: int = 0

    def __len__(self):
        return len(self.sir)

    def samples(self) -> Iterator[SirSample]:
        for sir, ids, t in zip(self.sir, self.serving_ids, self.trial_index):
            yield SirSample(float(sir), ids, int(t))


@dataclass
class _Trial:
    signal: float
    interference: float
    serving_distance: float
    serving_ids: Tuple[int, ...]


# =========================================
# One realization
# =========================================

def _coherent_signal(d: np.ndarray, alpha: float) -> float:
    s = float(np.sum(d ** (-alpha / 2.0)))
    return s * s


def sir_from_distances(serving_d, interferer_d, alpha: float) -> float:
    """Coherent joint-transmission SIR from explicit server and interferer distances."""
    serving_d = np.asarray(serving_d, dtype=float)
    interferer_d = np.asarray(interferer_d, dtype=float)
    if np.any(serving_d <= 0) or np.any(interferer_d <= 0):
        raise ParameterError("distances must be positive")
    return _coherent_signal(serving_d, alpha) / float(np.sum(interferer_d ** (-alpha)))


def _local_delaunay_cell(net: NetworkRealization, order: np.ndarray) -> Optional[np.ndarray]:
    """Cell containing the origin, from the nearest points only, if it passes the empty-sphere test."""
    k = min(LOCAL_DELAUNAY_POINTS, net.n)
    sub_ids = order[:k]
    sub = NetworkRealization(net.radius_m, net.coords[sub_ids])
    try:
        cell = locate_tetrahedron(delaunay_tetrahedralize(sub, backend="qhull"), np.zeros(3))
    except (DegeneracyError, NumericError, ParameterError):
        return None
    if cell is None:
        return None
    verts = sub_ids[list(cell.vertex_ids)]
    p = net.coords[verts]
    rel = p[1:] - p[0]
    try:
        center = p[0] + np.linalg.solve(rel, 0.5 * np.einsum("ij,ij->i", rel, rel))
    except np.linalg.LinAlgError:
        return None
    rho = np.linalg.norm(p[0] - center)
    others = np.ones(net.n, dtype=bool)
    others[verts] = False
    if np.any(np.linalg.norm(net.coords[others] - center, axis=1) < rho * (1.0 - 1e-9)):
        return None
    return np.sort(verts)


def _full_tess(net: NetworkRealization, backend: str) -> Tetrahedralization:
    return delaunay_tetrahedralize(net, backend=backend)


def _reuse_interferers(tess: Tetrahedralization, cell_index: int, epsilon: float, spec: ReusePlanSpec,
                       channel: ChannelConfig, plan_seed: int) -> np.ndarray:
    cfg = ReuseConfig(spec.rate_threshold or 1.0, channel.n_abs, channel.radius)
    plan = plan_frequencies(tess, cfg, spec.case, spec.restarts, plan_seed, epsilon_override=epsilon,
                            log=lambda _t, _g: None)
    same = plan.same_color_cells(cell_index)
    ids = np.unique(tess.simplices[same].ravel()) if same else np.zeros(0, dtype=np.int64)
    return np.setdiff1d(ids, tess.simplices[cell_index])


def _run_trial(cfg: SimConfig, trial: int, epsilon: Optional[float]) -> Optional[_Trial]:
    rng = chunk_rng(cfg.seed, trial)
    ch = cfg.channel
    net = NetworkRealization(ch.radius, uniform_ball(rng, (ch.n_abs,), ch.radius), trial)
    alpha = ch.alpha

    if cfg.mode is SimMode.WORST_CASE_CIRCUMCENTER:
        tess = _full_tess(net, cfg.delaunay_backend)
        centers, radii = tess.circumcenters, tess.circumradii
        chosen = -1
        for _ in range(cfg.max_circumcenter_retries):
            ci = int(rng.integers(len(tess)))
            if np.linalg.norm(centers[ci]) < ch.radius:
                chosen = ci
                break
        if chosen < 0:
            return None
        serving = tess.simplices[chosen]
        rho = float(radii[chosen])
        if cfg.frequency_plan is not None:
            others = _reuse_interferers(tess, chosen, epsilon, cfg.frequency_plan, ch, int(rng.integers(2 ** 31)))
        else:
            mask = np.ones(ch.n_abs, dtype=bool)
            mask[serving] = False
            others = np.flatnonzero(mask)
        d_i = np.linalg.norm(net.coords[others] - centers[chosen], axis=1)
        return _Trial(16.0 * rho ** (-alpha), float(np.sum(d_i ** (-alpha))), rho,
                      tuple(int(v) for v in serving))

    d = net.norms()
    order = np.argsort(d, kind="stable")
    if cfg.mode is SimMode.DELAUNAY_COMP:
        if cfg.frequency_plan is not None:
            tess = _full_tess(net, cfg.delaunay_backend)
            cell = locate_tetrahedron(tess, np.zeros(3))
            if cell is None:
                return None
            ci = tess.tetrahedra.index(cell)
            serving = tess.simplices[ci]
            others = _reuse_interferers(tess, ci, epsilon, cfg.frequency_plan, ch, int(rng.integers(2 ** 31)))
            return _Trial(_coherent_signal(d[serving], alpha), float(np.sum(d[others] ** (-alpha))),
                          float(d[serving].max()), tuple(int(v) for v in serving))
        serving = _local_delaunay_cell(net, order)
        if serving is None:
            cell = locate_tetrahedron(_full_tess(net, cfg.delaunay_backend), np.zeros(3))
            # origin outside the hull: fall back to the four nearest
            serving = np.array(cell.vertex_ids) if cell is not None else np.sort(order[:4])
    else:
        serving = np.sort(order[: cfg.n_coop])

    mask = np.ones(ch.n_abs, dtype=bool)
    mask[serving] = False
    return _Trial(_coherent_signal(d[serving], alpha), float(np.sum(d[mask] ** (-alpha))),
                  float(d[serving].max()), tuple(int(v) for v in serving))


# =========================================
# Batches and estimators
# =========================================

def simulate_sir_batch(cfg: SimConfig, controller: Optional[RunController] = None,
                       log: Optional[LogCb] = None) -> SirBatch:
    epsilon = cfg.frequency_plan.resolve_epsilon(cfg.channel, log) if cfg.frequency_plan else None

    def work(_index, start, stop):
        return [(t, _run_trial(cfg, t, epsilon)) for t in range(start, stop)]

    parts = map_chunks(work, int(cfg.trials), SIM_CHUNK, cfg.workers, controller)
    accepted = [(t, r) for part in parts for t, r in part if r is not None]
    skipped = int(cfg.trials) - len(accepted)
    if skipped:
        safe_log(log, f"{cfg.label}: skipped {skipped} realization(s) without an admissible serving cell "
                      f"(circumcenter tries: {cfg.max_circumcenter_retries})", "warning")
    done = [(t, r) for t, r in accepted if r.interference > 0.0]
    free = len(accepted) - len(done)
    if free:
        safe_log(log, f"{cfg.label}: {free} trial(s) had no co-channel interferer and were left out "
                      f"of the SIR sample", "warning")
    signal = np.array([r.signal for _, r in done])
    interference = np.array([r.interference for _, r in done])
    sir = signal / interference
    return SirBatch(cfg.label, sir, signal, interference,
                    np.array([r.serving_distance for _, r in done]),
                    [r.serving_ids for _, r in done],
                    np.array([t for t, _ in done], dtype=np.int64), skipped, free)


def simulate_sir(cfg: SimConfig, controller: Optional[RunController] = None,
                 log: Optional[LogCb] = None) -> Iterator[SirSample]:
    return simulate_sir_batch(cfg, controller, log).samples()


def coverage_from_sir(sir: np.ndarray, gamma_grid_db: Sequence[float]) -> List[MetricEstimate]:
    sir = np.asarray(sir, dtype=float)
    n = len(sir)
    if n == 0:
        raise NumericError("no accepted trials to estimate coverage from")
    out = []
    for g in db_to_linear(list(gamma_grid_db)):
        p = float(np.count_nonzero(sir > g)) / n
        out.append(MetricEstimate(p, math.sqrt(p * (1.0 - p) / n), "monte-carlo", n))
    return out


def rate_from_sir(sir: np.ndarray) -> MetricEstimate:
    sir = np.asarray(sir, dtype=float)
    if len(sir) == 0:
        raise NumericError("no accepted trials to estimate the rate from")
    return MetricEstimate.from_samples(np.log1p(sir))


def estimate_coverage(cfg: SimConfig, controller: Optional[RunController] = None,
                      log: Optional[LogCb] = None) -> List[MetricEstimate]:
    if not cfg.gamma_grid_db:
        raise ParameterError("gamma grid is empty")
    return coverage_from_sir(simulate_sir_batch(cfg, controller, log).sir, cfg.gamma_grid_db)


def estimate_rate(cfg: SimConfig, controller: Optional[RunController] = None,
                  log: Optional[LogCb] = None) -> MetricEstimate:
    return rate_from_sir(simulate_sir_batch(cfg, controller, log).sir)


# =========================================
# Interference distributions
# =========================================

def interference_origin(channel: ChannelConfig, serving_distance, trials: int, seed: int) -> np.ndarray:
    """Interference at the origin with the N-4 interferers conditioned beyond ``serving_distance``.

    ``serving_distance`` may be a scalar or one distance per trial.
    """
    d = np.asarray(serving_distance, dtype=float)
    if d.ndim == 1:
        if len(d) != trials:
            raise ParameterError("one serving distance per trial is required")
        d = d[:, None]
    r = sample_interferer_distances(channel.bpp, d, (int(trials), channel.interferers), seed)
    return np.sum(r ** (-channel.alpha), axis=1)


def interference_vertex(channel: ChannelConfig, trials: int, seed: int, workers: int = 1,
                        backend: str = "qhull") -> Tuple[np.ndarray, np.ndarray]:
    """(interference, circumradius) seen at admissible circumcenters of full realizations."""
    batch = simulate_sir_batch(SimConfig(channel, SimMode.WORST_CASE_CIRCUMCENTER, trials, seed,
                                         workers=workers, delaunay_backend=backend))
    return batch.interference, batch.serving_distance


def interference_samples(channel: ChannelConfig, location: str, trials: int, seed: int,
                         serving_distance=None, workers: int = 1) -> np.ndarray:
    if location == "origin":
        if serving_distance is None:
            raise ParameterError("origin interference needs a serving distance")
        return interference_origin(channel, serving_distance, trials, seed)
    if location == "vertex":
        return interference_vertex(channel, trials, seed, workers)[0]
    raise ParameterError(f"location must be 'origin' or 'vertex', got {location!r}")


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    counts: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def mass(self) -> float:
        return float(np.sum(self.density * np.diff(self.edges)))


def histogram_of(samples: np.ndarray, bins: int) -> Histogram:
    if int(bins) != bins or bins < MIN_HISTOGRAM_BINS:
        raise ParameterError(f"bins must be an integer >= {MIN_HISTOGRAM_BINS}, got {bins}")
    samples = np.asarray(samples, dtype=float)
    counts, edges = np.histogram(samples, bins=int(bins))
    density = counts / (counts.sum() * np.diff(edges))
    return Histogram(edges, density, counts)


def interference_histogram(channel: ChannelConfig, serving_distance: float, bins: int, trials: int,
                           seed: int) -> Histogram:
    return histogram_of(interference_origin(channel, serving_distance, trials, seed), bins)


@dataclass(frozen=True)
class KsResult:
    statistic: float
    pvalue: float


def ks_against_gamma(samples: np.ndarray, params: GammaApproxParams) -> KsResult:
    res = stats.kstest(np.asarray(samples, dtype=float), "gamma", args=(params.shape, 0.0, params.scale))
    return KsResult(float(res.statistic), float(res.pvalue))


# =========================================
# Scheme comparison
# =========================================

@dataclass
class SchemeComparison:
    """Per-gamma coverage of every scheme and its paired difference to the first scheme."""
    gamma_db: Tuple[float, ...]
    schemes: List[str]
    coverage: Dict[str, List[MetricEstimate]] = field(default_factory=dict)
    difference: Dict[str, List[MetricEstimate]] = field(default_factory=dict)
    paired_trials: int = 0

    def rows(self) -> List[Tuple]:
        out = []
        for gi, g in enumerate(self.gamma_db):
            for s in self.schemes:
                c, dlt = self.coverage[s][gi], self.difference[s][gi]
                out.append((g, s, c.value, c.error, dlt.value, dlt.error, self.paired_trials))
        return out


def compare_schemes(configs: Sequence[SimConfig], controller: Optional[RunController] = None,
                    log: Optional[LogCb] = None) -> SchemeComparison:
    """Common random numbers: schemes are compared on the trial indices all of them accepted."""
    if not configs:
        raise ParameterError("no schemes to compare")
    grid = configs[0].gamma_grid_db
    if not grid:
        raise ParameterError("gamma grid is empty")
    seeds = {(c.seed, c.channel) for c in configs}
    if len(seeds) != 1:
        raise ParameterError("schemes must share seed and channel for a paired comparison")

    batches = [simulate_sir_batch(c, controller, log) for c in configs]
    common = batches[0].trial_index
    for b in batches[1:]:
        common = np.intersect1d(common, b.trial_index)
    if len(common) == 0:
        raise NumericError("schemes share no accepted trials")
    paired = [b.sir[np.searchsorted(b.trial_index, common)] for b in batches]

    labels = []
    for c in configs:
        label = c.label
        while label in labels:
            label += "'"
        labels.append(label)
    out = SchemeComparison(tuple(grid), labels, paired_trials=len(common))
    thresholds = db_to_linear(list(grid))
    ref = [(paired[0] > g).astype(float) for g in thresholds]
    for label, sir in zip(labels, paired):
        out.coverage[label] = coverage_from_sir(sir, grid)
        diffs = []
        for gi, g in enumerate(thresholds):
            delta = (sir > g).astype(float) - ref[gi]
            if np.all(delta == 0):
                diffs.append(MetricEstimate(0.0, 0.0, "monte-carlo", len(delta)))
            else:
                diffs.append(MetricEstimate.from_samples(delta))
        out.difference[label] = diffs
    return out
