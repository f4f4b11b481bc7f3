# core/runner.py
import json
import math
import os
import threading
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from config.config import ExperimentConfig
from core import analytics as an
from core import planner as pl
from core import simulator as sim
from core.distances import BppParams, equidistant_pdf, kth_nearest_pdf, nearest_pdf
from core.errors import (
    AirCompError,
    Cancelled,
    ConfigError,
    DegeneracyError,
    DomainError,
    NumericError,
    ParameterError,
)
from core.geometry import (
    NetworkRealization,
    Tetrahedralization,
    audit_empty_circumsphere,
    audit_volume_conservation,
    delaunay_tetrahedralize,
    expected_cell_volume,
    interior_cell_volumes,
    mean_cell_volume,
    sample_bpp,
)
from core.workers import RunController
from utils.csv_utils import config_hash, write_csv
from utils.log_utils import LogCb, safe_log
from utils.svg_plot import LineSeries, write_line_chart

# exit codes
RC_OK = 0
RC_CHECK_FAILED = 1
RC_CONFIG = 2
RC_NUMERIC = 3
RC_INTERRUPTED = 130

COMMANDS = ("rate", "coverage", "plan", "compare", "validate", "fig")

FIG_KINDS = ("gamma_pdf", "rate_alpha", "rate_reuse_n", "coverage_gamma", "rate_bridge",
             "interference_pdf", "compare")

# geometry part of the validation report
AUDIT_INSTANCES = 20
VOLUME_INSTANCES = 200


@dataclass
class ValidationCheck:
    name: str
    passed: bool
    statistic: float
    threshold: float
    detail: str = ""


def corrupt_tessellation(tess: Tetrahedralization, seed: int = 0) -> Tetrahedralization:
    """Non-Delaunay complex on the same points: connectivity of a displaced copy.

    Test hook for the validation report; the empty-circumsphere audit must flag it.
    """
    net = tess.source
    rng = np.random.default_rng(seed)
    coords = np.array(net.coords, copy=True)
    order = np.argsort(np.linalg.norm(coords, axis=1))
    # move an inner point next to the midpoint of two far-apart ones
    victim = int(order[0])
    a, b = int(order[-1]), int(order[-2])
    coords[victim] = 0.5 * (coords[a] + coords[b]) + rng.normal(scale=1e-3 * net.radius_m, size=3)
    moved = delaunay_tetrahedralize(NetworkRealization(net.radius_m, coords), backend="qhull")
    return Tetrahedralization(net, moved.simplices, "corrupted")


class ExperimentRunner:
    def __init__(self, log_callback: Optional[LogCb] = None, translations: Optional[dict] = None,
                 lang: str = "en", on_done: Optional[Callable[[bool, Optional[int]], None]] = None):
        """
        :param log_callback: function (text, tag) -> None receiving progress and results
        :param translations: translations dict loaded from json ({"en": {...}, "zh": {...}})
        :param lang: current language key
        """
        self.log = log_callback
        self.translations = translations or {}
        self.lang = lang
        self.on_done = on_done
        self.written: List[str] = []

    def set_language(self, lang: str):
        if lang in self.translations:
            self.lang = lang

    def _t(self, key: str, default: str = "", **kwargs) -> str:
        """Translate a user-facing message key in the current language."""
        try:
            table = self.translations.get(self.lang) or {}
            text = table.get(key, default)
            if kwargs:
                return text.format(**kwargs)
            return text
        except Exception:
            return default.format(**kwargs) if kwargs else default

    def _log(self, text: str, tag: Optional[str] = None):
        safe_log(self.log, text, tag)

    # =========================================
    # Output helpers
    # =========================================

    def _meta(self, cfg: ExperimentConfig, name: str) -> Dict[str, object]:
        return {"config_hash": config_hash({"cfg": cfg.hash_payload(), "output": name}), "seed": cfg.seed}

    def _write(self, cfg: ExperimentConfig, name: str, header: Sequence[str], rows) -> str:
        path = write_csv(os.path.join(cfg.output_dir, name), header, rows, self._meta(cfg, name))
        self.written.append(path)
        self._log(self._t("log_written", "Wrote {path}", path=path), "success")
        return path

    def _write_json(self, cfg: ExperimentConfig, name: str, payload) -> str:
        path = os.path.join(cfg.output_dir, name)
        os.makedirs(cfg.output_dir, exist_ok=True)
        body = dict(payload)
        body["meta"] = self._meta(cfg, name)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(body, f, indent=2, sort_keys=True, default=_json_default)
            f.write("\n")
        self.written.append(path)
        self._log(self._t("log_written", "Wrote {path}", path=path), "success")
        return path

    def _svg(self, cfg: ExperimentConfig, name: str, title: str, xlabel: str, ylabel: str, series,
             log_y: bool = False):
        if not cfg.svg:
            return None
        path = write_line_chart(os.path.join(cfg.output_dir, name), title, xlabel, ylabel, series, log_y)
        self.written.append(path)
        self._log(self._t("log_written", "Wrote {path}", path=path), "success")
        return path

    @staticmethod
    def _check_stop(controller: Optional[RunController]):
        if controller is not None and controller.should_stop():
            raise Cancelled("stopped")

    def _sim_config(self, cfg: ExperimentConfig, ch: an.ChannelConfig, mode: str,
                    plan: Optional[sim.ReusePlanSpec] = None) -> sim.SimConfig:
        parsed, n = sim.parse_mode(mode)
        return sim.SimConfig(ch, parsed, cfg.trials, cfg.seed, cfg.gamma_db_grid, n_coop=n,
                             frequency_plan=plan, workers=cfg.workers, delaunay_backend=cfg.delaunay_backend)

    def _grid(self, cfg: ExperimentConfig):
        for n in cfg.n_abs:
            for alpha in cfg.alpha:
                yield n, alpha, an.ChannelConfig(alpha, n, cfg.radius_m)

    # =========================================
    # Subcommands
    # =========================================

    def cmd_rate(self, cfg: ExperimentConfig, controller: Optional[RunController] = None,
                 prefix: str = "rate") -> List[str]:
        mode, _ = sim.parse_mode(cfg.mode)
        worst = mode is sim.SimMode.WORST_CASE_CIRCUMCENTER
        rows = []
        by_n: Dict[int, Tuple[list, list, list]] = {}
        for n, alpha, ch in self._grid(cfg):
            self._check_stop(controller)
            self._log(self._t("log_rate_point", "rate: N={n}, alpha={alpha}", n=n, alpha=alpha), "info")
            sc = self._sim_config(cfg, ch, cfg.mode)
            est = sim.estimate_rate(sc, controller, self.log)
            ana = an.rate_worst(ch) if worst else an.rate_general(ch, cfg.mc_outer_samples, cfg.seed,
                                                                  cfg.workers, controller)
            rows.append((alpha, n, sc.label, est.value, est.error, est.trials, ana.value, ana.error, ana.kind))
            xs, ys, ya = by_n.setdefault(n, ([], [], []))
            xs.append(alpha)
            ys.append(est.value)
            ya.append(ana.value)
        paths = [self._write(cfg, f"{prefix}.csv",
                             ("alpha", "n_abs", "mode", "rate_nats", "stderr", "trials",
                              "analytic_nats", "analytic_err", "analytic_kind"), rows)]
        series = []
        for n, (xs, ys, ya) in by_n.items():
            series.append(LineSeries(f"N={n} sim", xs, ys))
            series.append(LineSeries(f"N={n} analytic", xs, ya, dashed=True, markers=False))
        svg = self._svg(cfg, f"{prefix}.svg", "Achievable rate vs path loss exponent", "alpha",
                        "rate (nats/s/Hz)", series)
        return paths + ([svg] if svg else [])

    def cmd_coverage(self, cfg: ExperimentConfig, controller: Optional[RunController] = None,
                     prefix: str = "coverage") -> List[str]:
        mode, _ = sim.parse_mode(cfg.mode)
        worst = mode is sim.SimMode.WORST_CASE_CIRCUMCENTER
        grid = list(cfg.gamma_db_grid)
        rows = []
        series = []
        for n, alpha, ch in self._grid(cfg):
            self._check_stop(controller)
            self._log(self._t("log_coverage_point", "coverage: N={n}, alpha={alpha}", n=n, alpha=alpha), "info")
            sc = self._sim_config(cfg, ch, cfg.mode)
            batch = sim.simulate_sir_batch(sc, controller, self.log)
            mc = sim.coverage_from_sir(batch.sir, grid)
            if worst:
                ana = [an.coverage_worst(ch, float(g)) for g in an.db_to_linear(grid)]
            else:
                ana = an.coverage_curve_general(ch, grid, cfg.mc_outer_samples, cfg.seed)
            for g, m, a in zip(grid, mc, ana):
                rows.append((g, m.value, m.error, m.trials, sc.label, alpha, n, a.value, a.error))
            series.append(LineSeries(f"N={n} a={alpha:g} sim", grid, [m.value for m in mc]))
            series.append(LineSeries(f"N={n} a={alpha:g} analytic", grid, [a.value for a in ana],
                                     dashed=True, markers=False))
        paths = [self._write(cfg, f"{prefix}.csv",
                             ("gamma_db", "coverage", "stderr", "trials", "mode", "alpha", "n_abs",
                              "analytic", "analytic_err"), rows)]
        svg = self._svg(cfg, f"{prefix}.svg", "Coverage probability vs SIR threshold", "gamma (dB)",
                        "coverage", series)
        return paths + ([svg] if svg else [])

    def cmd_plan(self, cfg: ExperimentConfig, controller: Optional[RunController] = None) -> List[str]:
        paths = []
        summaries = []
        for n in cfg.n_abs:
            self._check_stop(controller)
            rcfg = pl.ReuseConfig(cfg.rate_threshold_nats, n, cfg.radius_m)
            net = sample_bpp(n, cfg.radius_m, cfg.seed)
            tess = delaunay_tetrahedralize(net, backend=cfg.delaunay_backend, log=self.log)
            if cfg.epsilon_ratio is not None:
                eps = cfg.epsilon_ratio * cfg.radius_m
                residual = None
            else:
                eps = pl.solve_epsilon_star(rcfg, cfg.case, self.log)
                residual = pl.epsilon_residual(rcfg, cfg.case, eps) if eps < cfg.radius_m else None
            eta = pl.reuse_factor(rcfg, eps)
            psi, eta_prime = pl.mhcpp_params(rcfg, eps, self.log)
            plan = pl.plan_frequencies(tess, rcfg, cfg.case, cfg.restarts, cfg.seed, epsilon_override=eps,
                                       log=self.log)
            counts = plan.class_counts()
            summary = {
                "n_abs": n,
                "case": cfg.case,
                "epsilon_star": eps,
                "epsilon_ratio": eps / cfg.radius_m,
                "residual": residual,
                "eta": eta,
                "psi": psi,
                "eta_prime": eta_prime,
                "n_colors": plan.n_colors,
                "k1": plan.k1,
                "bandwidth_fraction": plan.bandwidth_fraction,
                "colors_exceed_k1": plan.colors_exceed_k1,
                "n_spheres": len(plan.clusters),
                "cells": len(tess),
                "standard": counts["standard"],
                "residual_cells": counts["residual"],
                "independent": counts["independent"],
                "plan_valid": plan.is_valid(),
            }
            if eps < cfg.radius_m:
                summary["expected_interference_outside"] = pl.expected_interference_outside(rcfg, eps)
                mc = pl.interference_outside_mc(rcfg, eps, 20_000, cfg.seed, cfg.workers)
                summary["interference_outside_mc"] = mc.value
                summary["interference_outside_mc_err"] = mc.error
            summaries.append(summary)
            self._log(self._t("log_plan_summary",
                              "N={n}: eps*={eps:.1f} m, eta={eta}, psi={psi}, eta'={eta_prime}, colors={colors}",
                              n=n, eps=eps, eta=eta, psi=psi, eta_prime=eta_prime, colors=plan.n_colors), "info")
            meta_name = f"plan_N{n}.csv"
            paths.append(pl.write_plan_csv(plan, tess, os.path.join(cfg.output_dir, meta_name),
                                           self._meta(cfg, meta_name)))
            sph_name = f"spheres_N{n}.csv"
            paths.append(pl.write_spheres_csv(plan, os.path.join(cfg.output_dir, sph_name),
                                              self._meta(cfg, sph_name)))
            self.written.extend(paths[-2:])
        paths.append(self._write_json(cfg, "plan_summary.json", {"plans": summaries}))
        if not all(s["plan_valid"] for s in summaries):
            raise NumericError("frequency plan violates the distinct-colors-per-sphere rule")
        return paths

    def cmd_compare(self, cfg: ExperimentConfig, controller: Optional[RunController] = None,
                    prefix: str = "compare") -> List[str]:
        rows = []
        series = []
        for n, alpha, ch in self._grid(cfg):
            self._check_stop(controller)
            configs = [self._sim_config(cfg, ch, s) for s in cfg.schemes]
            cmp_ = sim.compare_schemes(configs, controller, self.log)
            for r in cmp_.rows():
                rows.append(r + (alpha, n))
            for label in cmp_.schemes:
                series.append(LineSeries(f"{label} N={n} a={alpha:g}", cmp_.gamma_db,
                                         [c.value for c in cmp_.coverage[label]]))
        paths = [self._write(cfg, f"{prefix}.csv",
                             ("gamma_db", "scheme", "coverage", "stderr", "diff_vs_first", "diff_stderr",
                              "paired_trials", "alpha", "n_abs"), rows)]
        svg = self._svg(cfg, f"{prefix}.svg", "Coverage by association scheme", "gamma (dB)", "coverage", series)
        return paths + ([svg] if svg else [])

    # ---- validation report ------------------------------------------------

    def validation_checks(self, cfg: ExperimentConfig, corrupt: bool = False,
                          controller: Optional[RunController] = None) -> List[ValidationCheck]:
        checks: List[ValidationCheck] = []
        seed = cfg.seed
        radius = cfg.radius_m

        # geometry
        worst_depth, worst_vol, violations = 0.0, 0.0, 0
        for i in range(AUDIT_INSTANCES):
            self._check_stop(controller)
            tess = delaunay_tetrahedralize(sample_bpp(50, radius, seed + i), backend="bowyer-watson", log=self.log)
            if corrupt and i == 0:
                tess = corrupt_tessellation(tess, seed)
            found = audit_empty_circumsphere(tess)
            violations += len(found)
            worst_depth = max([worst_depth] + [v.depth for v in found])
            worst_vol = max(worst_vol, audit_volume_conservation(tess))
        checks.append(ValidationCheck("empty_circumsphere", violations == 0, float(violations), 0.0,
                                      f"max depth {worst_depth:.3e} over {AUDIT_INSTANCES} instances (N=50)"))
        checks.append(ValidationCheck("volume_conservation", worst_vol <= 1e-6, worst_vol, 1e-6))

        interior, hull_means = [], []
        for i in range(VOLUME_INSTANCES):
            self._check_stop(controller)
            tess = delaunay_tetrahedralize(sample_bpp(100, radius, seed + i), backend="qhull")
            hull_means.append(mean_cell_volume(tess))
            interior.append(interior_cell_volumes(tess, 0.5 * radius))
        target = expected_cell_volume(100, radius)
        rel = abs(float(np.mean(np.concatenate(interior))) / target - 1.0)
        checks.append(ValidationCheck("mean_cell_volume", rel < 0.10, rel, 0.10,
                                      f"cells with circumcenter within R/2 over {VOLUME_INSTANCES} instances "
                                      f"(N=100); hull-wide mean is {np.mean(hull_means) / target:.3f} of the "
                                      f"bulk value"))

        # distance laws
        bpp = BppParams(150, radius)
        masses = [
            integrate.quad(lambda r: nearest_pdf(bpp, r), 0.0, radius)[0],
            integrate.quad(lambda r: kth_nearest_pdf(bpp, 4, r), 0.0, radius, points=[radius * 0.3], limit=200)[0],
            integrate.quad(lambda r: equidistant_pdf(bpp, 4, r), 0.0, radius, points=[radius * 0.3], limit=200)[0],
        ]
        err = max(abs(m - 1.0) for m in masses)
        checks.append(ValidationCheck("pdf_normalization", err < 1e-6, err, 1e-6))

        # closed-form interference MGF vs direct quadrature
        worst_rel = 0.0
        for alpha in (2.0, 2.8, 3.2):
            ch = an.ChannelConfig(alpha, 50, radius)
            for d in (200.0, 800.0, 2000.0):
                for z in (d ** alpha * 0.1, d ** alpha, d ** alpha * 10.0):
                    closed = an.mgf_interference_general(ch, d, z)
                    direct = an.mgf_interference_quadrature(ch, d, z)
                    worst_rel = max(worst_rel, abs(closed - direct) / max(direct, 1e-300))
        checks.append(ValidationCheck("mgf_closed_form", worst_rel < 1e-7, worst_rel, 1e-7))

        # Gamma approximation of the conditional interference
        self._check_stop(controller)
        ch = an.ChannelConfig(2.8, 150, radius)
        d = min(500.0, 0.5 * radius)
        samples = sim.interference_origin(ch, d, 100_000, seed)
        params = an.gamma_approx_params(ch, d)
        ks = sim.ks_against_gamma(samples, params)
        checks.append(ValidationCheck("gamma_approximation_ks", ks.statistic < 0.05, ks.statistic, 0.05,
                                      f"d={d:g} m, alpha=2.8, N=150, 1e5 samples"))
        mean, var = an.interference_moments(ch, d)
        z = abs(samples.mean() - mean) / (samples.std(ddof=1) / math.sqrt(len(samples)))
        checks.append(ValidationCheck("interference_mean", z < 3.0, float(z), 3.0, "standard errors"))

        # planner
        rcfg = pl.ReuseConfig(math.log1p(1e3), 50, radius)
        roots = {c: pl.solve_epsilon_star(rcfg, c, self.log) for c in pl.CASES}
        # a root clamped to R is not a root of the polynomial
        res = max([pl.epsilon_residual(rcfg, c, e) for c, e in roots.items() if e < radius] or [0.0])
        checks.append(ValidationCheck("epsilon_residual", res < 1e-6, res, 1e-6,
                                      ", ".join(f"{c}: {e / radius:.6f} R" for c, e in roots.items())))
        spot = (pl.reuse_factor(rcfg, radius), pl.reuse_factor(rcfg, 0.3 * radius))
        checks.append(ValidationCheck("reuse_factor_spot", spot == (339, 10), float(spot[0]), 339.0,
                                      f"eta(R)={spot[0]}, eta(0.3R)={spot[1]}"))
        psi = pl.mhcpp_params(pl.ReuseConfig(1.0, 54, radius), radius / 3.0)
        checks.append(ValidationCheck("hard_core_spot", psi == (8, 6), float(psi[0]), 8.0,
                                      f"psi={psi[0]}, eta'={psi[1]}"))
        eff = pl.packing_efficiency(1.0)
        target = math.pi / (3.0 * math.sqrt(2.0))
        checks.append(ValidationCheck("fcc_packing_efficiency", abs(eff - target) < 1e-12, eff, target))
        tess = delaunay_tetrahedralize(sample_bpp(50, radius, seed), backend="qhull")
        plan = pl.plan_frequencies(tess, rcfg, "general", cfg.restarts, seed,
                                   epsilon_override=0.3 * radius, log=self.log)
        checks.append(ValidationCheck("plan_validity", plan.is_valid(), float(len(plan.violations())), 0.0,
                                      f"{plan.n_colors} colors"))

        # infinite-PPP diagnostic and the rate/coverage bridge identity
        ppp = an.mean_total_interference_ppp(1.0, 4.0, 1.0, math.inf)
        checks.append(ValidationCheck("ppp_mean_alpha4", abs(ppp.value - 4 * math.pi) < 1e-12, ppp.value,
                                      4 * math.pi))
        div = an.mean_total_interference_ppp(1.0, 3.0, 1.0, math.inf)
        checks.append(ValidationCheck("ppp_divergence_alpha3", div.divergent, float(div.divergent), 1.0))
        bridge = an.rate_from_coverage(lambda g: 1.0 / (1.0 + g))
        checks.append(ValidationCheck("rate_coverage_identity", abs(bridge.value - 1.0) < 1e-8,
                                      bridge.value, 1.0))
        return checks

    def cmd_validate(self, cfg: ExperimentConfig, corrupt: bool = False,
                     controller: Optional[RunController] = None) -> Tuple[bool, str]:
        checks = self.validation_checks(cfg, corrupt, controller)
        passed = all(c.passed for c in checks)
        for c in checks:
            self._log(f"{c.name}: {'PASS' if c.passed else 'FAIL'} ({c.statistic:.4g} vs {c.threshold:.4g})",
                      "success" if c.passed else "error")
        path = self._write_json(cfg, "validate_report.json",
                                {"passed": passed, "corrupted": corrupt, "checks": [asdict(c) for c in checks]})
        return passed, path

    # ---- figures ----------------------------------------------------------

    def cmd_fig(self, fig_id: str, kind: str, cfg: ExperimentConfig,
                controller: Optional[RunController] = None) -> List[str]:
        if kind not in FIG_KINDS:
            raise ParameterError(f"unknown figure kind {kind!r}")
        self._log(self._t("log_fig_start", "Figure {fig} ({kind})", fig=fig_id, kind=kind), "info")
        if kind == "rate_alpha":
            return self.cmd_rate(cfg, controller, prefix=fig_id)
        if kind == "coverage_gamma":
            return self.cmd_coverage(cfg, controller, prefix=fig_id)
        if kind == "compare":
            return self.cmd_compare(cfg, controller, prefix=fig_id)
        if kind == "gamma_pdf":
            return self._fig_gamma_pdf(fig_id, cfg)
        if kind == "rate_bridge":
            return self._fig_rate_bridge(fig_id, cfg, controller)
        if kind == "interference_pdf":
            return self._fig_interference_pdf(fig_id, cfg, controller)
        return self._fig_rate_reuse(fig_id, cfg, controller)

    def _fig_gamma_pdf(self, fig_id: str, cfg: ExperimentConfig) -> List[str]:
        n, alpha = cfg.n_abs[0], cfg.alpha[0]
        ch = an.ChannelConfig(alpha, n, cfg.radius_m)
        d = cfg.serving_distance_m
        samples = sim.interference_origin(ch, d, cfg.trials, cfg.seed)
        params = an.gamma_approx_params(ch, d)
        hist = sim.histogram_of(samples, cfg.bins)
        ks = sim.ks_against_gamma(samples, params)
        self._log(self._t("log_ks", "KS distance to the Gamma approximation: {ks:.4f}", ks=ks.statistic), "info")
        centers = hist.centers
        model = params.pdf(centers)
        rows = [(c, e, m) for c, e, m in zip(centers, hist.density, model)]
        paths = [self._write(cfg, f"{fig_id}.csv", ("interference", "empirical_density", "gamma_density"), rows)]
        svg = self._svg(cfg, f"{fig_id}.svg", f"Interference PDF (d={d:g} m, alpha={alpha:g}, N={n})",
                        "interference", "density",
                        [LineSeries("simulation", centers, hist.density),
                         LineSeries("Gamma approximation", centers, model, dashed=True, markers=False)])
        return paths + ([svg] if svg else [])

    def _fig_rate_bridge(self, fig_id: str, cfg: ExperimentConfig,
                         controller: Optional[RunController]) -> List[str]:
        rows = []
        series: Dict[int, Tuple[list, list, list]] = {}
        for n, alpha, ch in self._grid(cfg):
            self._check_stop(controller)
            direct = an.rate_general(ch, cfg.mc_outer_samples, cfg.seed, cfg.workers, controller)
            model = an.coverage_function_general(ch, cfg.mc_outer_samples, cfg.seed)
            bridged = an.rate_from_coverage(model)
            rel = abs(bridged.value - direct.value) / direct.value
            rows.append((alpha, n, direct.value, direct.error, bridged.value, bridged.error, rel))
            xs, a, b = series.setdefault(n, ([], [], []))
            xs.append(alpha)
            a.append(direct.value)
            b.append(bridged.value)
        paths = [self._write(cfg, f"{fig_id}.csv", ("alpha", "n_abs", "rate_direct", "rate_direct_err",
                                                    "rate_from_coverage", "rate_from_coverage_err",
                                                    "relative_difference"), rows)]
        lines = []
        for n, (xs, a, b) in series.items():
            lines.append(LineSeries(f"N={n} direct", xs, a))
            lines.append(LineSeries(f"N={n} from coverage", xs, b, dashed=True, markers=False))
        svg = self._svg(cfg, f"{fig_id}.svg", "Rate: direct vs from coverage", "alpha", "rate (nats/s/Hz)", lines)
        return paths + ([svg] if svg else [])

    def _fig_interference_pdf(self, fig_id: str, cfg: ExperimentConfig,
                              controller: Optional[RunController]) -> List[str]:
        n, alpha = cfg.n_abs[0], cfg.alpha[0]
        ch = an.ChannelConfig(alpha, n, cfg.radius_m)
        self._check_stop(controller)
        vertex, radii = sim.interference_vertex(ch, cfg.trials, cfg.seed, cfg.workers, cfg.delaunay_backend)
        # origin-based model with the same serving distances; the conditional law needs d < R
        inside = radii < ch.radius
        if not np.all(inside):
            self._log(f"{int(np.count_nonzero(~inside))} circumradius sample(s) reach R and are left out "
                      f"of the origin model", "warning")
        origin = sim.interference_origin(ch, radii[inside], int(np.count_nonzero(inside)), cfg.seed + 1)
        rows, lines = [], []
        for label, samples in (("origin", origin), ("vertex", vertex)):
            # log10 scale keeps the heavy tail readable
            hist = sim.histogram_of(np.log10(samples), cfg.bins)
            for c, dens in zip(hist.centers, hist.density):
                rows.append((label, c, dens))
            lines.append(LineSeries(label, hist.centers, hist.density))
            self._log(f"{label}: median interference {np.median(samples):.4e}", "info")
        paths = [self._write(cfg, f"{fig_id}.csv", ("location", "log10_interference", "density"), rows)]
        svg = self._svg(cfg, f"{fig_id}.svg", "Interference at the origin vs at the vertex",
                        "log10 interference", "density", lines)
        return paths + ([svg] if svg else [])

    def _fig_rate_reuse(self, fig_id: str, cfg: ExperimentConfig,
                        controller: Optional[RunController]) -> List[str]:
        mode, _ = sim.parse_mode(cfg.mode)
        worst = mode is sim.SimMode.WORST_CASE_CIRCUMCENTER
        case = "worst" if worst else cfg.case
        alpha = cfg.alpha[0]
        rows = []
        xs, ys, yt, yh = [], [], [], []
        for n in cfg.n_abs:
            self._check_stop(controller)
            ch = an.ChannelConfig(alpha, n, cfg.radius_m)
            rcfg = pl.ReuseConfig(cfg.rate_threshold_nats, n, cfg.radius_m)
            eps = (cfg.epsilon_ratio * cfg.radius_m if cfg.epsilon_ratio is not None
                   else pl.solve_epsilon_star(rcfg, case, self.log))
            eta = pl.reuse_factor(rcfg, eps)
            psi, eta_prime = pl.mhcpp_params(rcfg, eps, self.log)
            spec = sim.ReusePlanSpec(epsilon_star=eps, case=case, restarts=cfg.restarts)
            batch = sim.simulate_sir_batch(self._sim_config(cfg, ch, cfg.mode, spec), controller, self.log)
            est = sim.rate_from_sir(batch.sir)
            # bandwidth share 1/eta, as in the thinned model
            sim_rate, sim_err = est.value / eta, est.error / eta
            if worst:
                thinned = an.rate_worst_thinned(ch, eta)
                hard = an.rate_worst(ch, eta=eta_prime)
            else:
                thinned = pl.thinned_rate(ch, eta, cfg.mc_outer_samples, cfg.seed, cfg.workers, controller)
                hard = pl.rate_mhcpp(ch, eta_prime, cfg.mc_outer_samples, cfg.seed, cfg.workers, controller)
            rows.append((n, eps, eta, psi, eta_prime, sim_rate, sim_err, batch.interference_free, thinned.value,
                         thinned.error, hard.value, hard.error))
            xs.append(n)
            ys.append(sim_rate)
            yt.append(thinned.value)
            yh.append(hard.value)
        paths = [self._write(cfg, f"{fig_id}.csv",
                             ("n_abs", "epsilon_star", "eta", "psi", "eta_prime", "sim_rate", "sim_stderr",
                              "interference_free_trials", "thinned_rate", "thinned_err",
                              "hard_core_rate", "hard_core_err"), rows)]
        svg = self._svg(cfg, f"{fig_id}.svg", f"Rate with frequency reuse ({case} aUE)", "N", "rate (nats/s/Hz)",
                        [LineSeries("simulation", xs, ys),
                         LineSeries("thinned BPP", xs, yt, dashed=True),
                         LineSeries("hard-core", xs, yh, dashed=True)])
        return paths + ([svg] if svg else [])

    # =========================================
    # Entry points
    # =========================================

    def map_exception_to_user_message(self, exc: BaseException) -> str:
        if isinstance(exc, ConfigError):
            return self._t("msg_config_error", "Invalid configuration:") + "\n" + str(exc)
        if isinstance(exc, Cancelled):
            return self._t("msg_cancelled", "Stopped by user.")
        if isinstance(exc, DegeneracyError):
            return self._t("msg_degeneracy_error", "Degenerate geometry: {err}", err=exc)
        if isinstance(exc, DomainError):
            return self._t("msg_domain_error", "Argument outside the valid domain: {err}", err=exc)
        if isinstance(exc, ParameterError):
            return self._t("msg_parameter_error", "Invalid parameter: {err}", err=exc)
        if isinstance(exc, NumericError):
            return self._t("msg_numeric_error", "Numerical failure: {err}", err=exc)
        if isinstance(exc, OSError):
            return self._t("msg_io_error", "File error: {err}", err=exc)
        return self._t("msg_exception_generic", "Unexpected error: {err}", err=exc)

    @staticmethod
    def exit_code_for(exc: BaseException) -> int:
        if isinstance(exc, (Cancelled, KeyboardInterrupt)):
            return RC_INTERRUPTED
        if isinstance(exc, (ConfigError, ParameterError)):
            return RC_CONFIG
        return RC_NUMERIC

    def run(self, command: str, cfg: ExperimentConfig, controller: Optional[RunController] = None,
            fig_id: Optional[str] = None, fig_kind: Optional[str] = None,
            corrupt: bool = False) -> Tuple[bool, int]:
        """Execute one subcommand; returns (success, exit code)."""
        if command not in COMMANDS:
            raise ParameterError(f"unknown command {command!r}")
        try:
            if command == "validate":
                passed, _ = self.cmd_validate(cfg, corrupt, controller)
                if not passed:
                    self._log(self._t("log_validate_failed", "Validation failed."), "error")
                    return False, RC_CHECK_FAILED
            elif command == "fig":
                self.cmd_fig(fig_id or "fig", fig_kind or "", cfg, controller)
            else:
                getattr(self, f"cmd_{command}")(cfg, controller)
            self._log(self._t("log_done", "Done."), "success")
            return True, RC_OK
        except KeyboardInterrupt as e:
            self._log(self.map_exception_to_user_message(Cancelled(str(e))), "warning")
            return False, RC_INTERRUPTED
        except (AirCompError, OSError) as e:
            tag = "warning" if isinstance(e, Cancelled) else "error"
            self._log(self.map_exception_to_user_message(e), tag)
            return False, self.exit_code_for(e)

    def _notify_done(self, success: bool, rc: Optional[int]):
        if self.on_done is None:
            return
        try:
            self.on_done(success, rc)
        except Exception:
            pass

    def run_threaded(self, command: str, cfg: ExperimentConfig, **kwargs) -> RunController:
        """Run in a background thread; the controller's stop() aborts between work chunks."""
        controller = RunController()

        def worker():
            success, rc = False, None
            try:
                success, rc = self.run(command, cfg, controller, **kwargs)
            except Exception as e:
                controller.error = e
                self._log(self.map_exception_to_user_message(e), "error")
                rc = RC_NUMERIC
            finally:
                controller.result = (success, rc)
                self._notify_done(success, rc)

        th = threading.Thread(target=worker, daemon=True)
        controller.set_thread(th)
        th.start()
        return controller


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
