"""End-to-end tests for core.runner with small trial counts."""
import json
import math
import os
import tempfile
import unittest

from config.config import TRANSLATIONS, load_experiment_config, load_presets, preset
from core.errors import Cancelled, ConfigError, ConfigIssue, DomainError, ParameterError, SolverError
from core.runner import (
    RC_CHECK_FAILED,
    RC_CONFIG,
    RC_INTERRUPTED,
    RC_NUMERIC,
    RC_OK,
    ExperimentRunner,
)
from core.workers import RunController
from utils.csv_utils import read_csv
from utils.log_utils import LogCollector

SMALL = {
    "n_abs": 30,
    "alpha": 2.0,
    "trials": 60,
    "mc_outer_samples": 1000,
    "gamma_db_grid": [0.0, 10.0],
    "restarts": 2,
}


class RunnerCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name
        self.log = LogCollector()
        self.runner = ExperimentRunner(self.log, TRANSLATIONS, "en")

    def tearDown(self):
        self._tmp.cleanup()

    def cfg(self, overlay=None, **kw):
        values = dict(SMALL, output_dir=self.tmp)
        values.update(kw)
        return load_experiment_config(overrides=values, environ={}, user_config={}, preset_overlay=overlay)


class TestCommands(RunnerCase):
    def test_rate(self):
        cfg = self.cfg()
        paths = self.runner.cmd_rate(cfg)
        header, rows, meta = read_csv(paths[0])
        self.assertEqual(header[:3], ["alpha", "n_abs", "mode"])
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0][2], "delaunay_comp")
        self.assertEqual(meta["seed"], str(cfg.seed))
        self.assertEqual(len(meta["config_hash"]), 16)
        self.assertGreater(float(rows[0][3]), 0.0)

    def test_outputs_are_reproducible(self):
        first = self.runner.cmd_coverage(self.cfg())[0]
        with open(first, "rb") as f:
            a = f.read()
        second = self.runner.cmd_coverage(self.cfg(workers=2))[0]
        with open(second, "rb") as f:
            self.assertEqual(f.read(), a)

    def test_hash_ignores_presentation(self):
        a = self.runner._meta(self.cfg(), "rate.csv")
        b = self.runner._meta(self.cfg(output_dir=os.path.join(self.tmp, "other"), workers=3), "rate.csv")
        self.assertEqual(a, b)
        self.assertNotEqual(a, self.runner._meta(self.cfg(), "coverage.csv"))

    def test_coverage(self):
        _, rows, _ = read_csv(self.runner.cmd_coverage(self.cfg(alpha=[2.0, 2.8]))[0])
        self.assertEqual(len(rows), 4)
        self.assertTrue(all(0.0 <= float(r[1]) <= 1.0 for r in rows))

    def test_plan(self):
        paths = self.runner.cmd_plan(self.cfg(epsilon_ratio=0.3))
        names = sorted(os.path.basename(p) for p in paths)
        self.assertEqual(names, ["plan_N30.csv", "plan_summary.json", "spheres_N30.csv"])
        with open(os.path.join(self.tmp, "plan_summary.json"), encoding="utf-8") as f:
            summary = json.load(f)
        plan = summary["plans"][0]
        self.assertTrue(plan["plan_valid"])
        self.assertAlmostEqual(plan["epsilon_ratio"], 0.3)
        self.assertIsNone(plan["residual"])
        self.assertGreaterEqual(plan["n_colors"], plan["k1"])
        self.assertEqual(plan["standard"] + plan["residual_cells"] + plan["independent"], plan["cells"])
        self.assertIn("config_hash", summary["meta"])

    def test_compare(self):
        cfg = self.cfg(schemes=["nearest4_comp", "voronoi_no_comp"])
        _, rows, _ = read_csv(self.runner.cmd_compare(cfg)[0])
        self.assertEqual(len(rows), 4)
        first = [r for r in rows if r[1] == "nearest4_comp"]
        self.assertTrue(all(float(r[4]) == 0.0 for r in first))

    def test_gamma_pdf_figure(self):
        cfg = self.cfg(trials=3000, bins=20, n_abs=150, alpha=2.8)
        _, rows, _ = read_csv(self.runner.cmd_fig("fig4", "gamma_pdf", cfg)[0])
        self.assertEqual(len(rows), 20)
        self.assertTrue(self.log.by_tag("info"))


class TestRunAndExitCodes(RunnerCase):
    def test_success(self):
        self.assertEqual(self.runner.run("compare", self.cfg()), (True, RC_OK))
        self.assertTrue(self.log.by_tag("success"))

    def test_stopped_controller(self):
        controller = RunController()
        controller.stop()
        self.assertEqual(self.runner.run("rate", self.cfg(), controller), (False, RC_INTERRUPTED))
        self.assertIn(TRANSLATIONS["en"]["msg_cancelled"], self.log.by_tag("warning"))

    def test_bad_figure_kind(self):
        self.assertEqual(self.runner.run("fig", self.cfg(), fig_id="fig0", fig_kind="pie"), (False, RC_CONFIG))
        with self.assertRaises(ParameterError):
            self.runner.run("draw", self.cfg())

    def test_exit_code_mapping(self):
        code = ExperimentRunner.exit_code_for
        self.assertEqual(code(KeyboardInterrupt()), RC_INTERRUPTED)
        self.assertEqual(code(Cancelled("x")), RC_INTERRUPTED)
        self.assertEqual(code(ConfigError([ConfigIssue(1, "trials", "bad")])), RC_CONFIG)
        self.assertEqual(code(ParameterError("x")), RC_CONFIG)
        self.assertEqual(code(SolverError("x")), RC_NUMERIC)
        self.assertEqual(code(DomainError("x")), RC_NUMERIC)

    def test_messages_follow_language(self):
        self.runner.set_language("zh")
        self.assertEqual(self.runner.map_exception_to_user_message(Cancelled("x")),
                         TRANSLATIONS["zh"]["msg_cancelled"])
        msg = self.runner.map_exception_to_user_message(SolverError("no bracket", {"lo": 1}))
        self.assertIn("no bracket (lo=1)", msg)
        self.runner.set_language("xx")
        self.assertEqual(self.runner.lang, "zh")

    def test_threaded(self):
        done = []
        runner = ExperimentRunner(self.log, TRANSLATIONS, on_done=lambda ok, rc: done.append((ok, rc)))
        controller = runner.run_threaded("coverage", self.cfg())
        controller.join(timeout=300)
        self.assertFalse(controller.is_alive())
        self.assertEqual(controller.result, (True, RC_OK))
        self.assertEqual(done, [(True, RC_OK)])


class TestFigurePresets(RunnerCase):
    def test_every_preset_runs(self):
        figs = sorted(k for k in load_presets() if k.startswith("fig"))
        self.assertIn("fig10", figs)
        for fig_id in figs:
            kind, overlay = preset(fig_id)
            with self.subTest(fig=fig_id, kind=kind):
                cfg = self.cfg(overlay, bins=10, serving_distance_m=500.0)
                self.assertEqual(self.runner.run("fig", cfg, fig_id=fig_id, fig_kind=kind), (True, RC_OK))
                self.assertTrue(os.path.isfile(os.path.join(self.tmp, f"{fig_id}.csv")))

    def test_rate_with_reuse_stays_finite(self):
        for fig_id in ("fig10", "fig15"):
            kind, overlay = preset(fig_id)
            cfg = self.cfg(overlay, n_abs=[30, 50], trials=40, seed=1)
            header, rows, _ = read_csv(self.runner.cmd_fig(fig_id, kind, cfg)[0])
            self.assertEqual(len(rows), 2)
            col = {name: i for i, name in enumerate(header)}
            for row in rows:
                self.assertTrue(math.isfinite(float(row[col["sim_rate"]])), fig_id)
                self.assertTrue(math.isfinite(float(row[col["sim_stderr"]])), fig_id)
                self.assertGreaterEqual(int(row[col["interference_free_trials"]]), 0)


class TestValidationReport(RunnerCase):
    def test_corrupted_complex_fails_the_geometry_audit(self):
        cfg = self.cfg(restarts=4)
        success, rc = self.runner.run("validate", cfg, corrupt=True)
        self.assertEqual((success, rc), (False, RC_CHECK_FAILED))
        with open(os.path.join(self.tmp, "validate_report.json"), encoding="utf-8") as f:
            report = json.load(f)
        self.assertFalse(report["passed"])
        self.assertTrue(report["corrupted"])
        failed = {c["name"] for c in report["checks"] if not c["passed"]}
        self.assertIn("empty_circumsphere", failed)
        # the displaced connectivity may also overlap itself
        self.assertLessEqual(failed, {"empty_circumsphere", "volume_conservation"})


if __name__ == "__main__":
    unittest.main()
