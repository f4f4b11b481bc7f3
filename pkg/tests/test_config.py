"""Tests for config.config: layering, sweeps, file errors and figure presets."""
import json
import os
import tempfile
import textwrap
import unittest

from config.config import (
    DEFAULTS,
    expand_sweep,
    load_experiment_config,
    load_presets,
    load_user_config,
    preset,
    save_user_config,
)
from core.errors import ConfigError, ParameterError
from core.runner import FIG_KINDS


def _load(path=None, **kw):
    kw.setdefault("environ", {})
    kw.setdefault("user_config", {})
    return load_experiment_config(path, **kw)


class _TempDirCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, name, text):
        path = os.path.join(self.tmp, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(textwrap.dedent(text).lstrip())
        return path


class TestSweeps(unittest.TestCase):
    def test_forms(self):
        self.assertEqual(expand_sweep(2.0), [2.0])
        self.assertEqual(expand_sweep([50, 150]), [50, 150])
        alphas = expand_sweep({"start": 2.0, "stop": 3.2, "step": 0.1})
        self.assertEqual(len(alphas), 13)
        self.assertEqual(alphas[-1], 3.2)

    def test_bad_tables(self):
        with self.assertRaises(ParameterError):
            expand_sweep({"start": 1.0, "stop": 2.0})
        with self.assertRaises(ParameterError):
            expand_sweep({"start": 1.0, "stop": 2.0, "step": 0.0})
        with self.assertRaises(ParameterError):
            expand_sweep({"start": 3.0, "stop": 2.0, "step": 0.5})


class TestDefaults(unittest.TestCase):
    def test_defaults(self):
        cfg = _load()
        self.assertEqual(cfg.n_abs, (150,))
        self.assertEqual(cfg.alpha, (2.8,))
        self.assertEqual(cfg.gamma_db_grid, tuple(float(g) for g in range(-20, 31, 5)))
        self.assertEqual(cfg.seed, DEFAULTS["seed"])
        self.assertIsNone(cfg.epsilon_ratio)

    def test_hash_payload_skips_presentation(self):
        a = _load(overrides={"output_dir": "x", "workers": 4, "svg": True})
        b = _load(overrides={"output_dir": "y", "workers": 1, "lang": "zh"})
        self.assertEqual(a.hash_payload(), b.hash_payload())
        self.assertNotIn("output_dir", a.hash_payload())
        self.assertNotEqual(a.hash_payload(), _load(overrides={"seed": 1}).hash_payload())


class TestFiles(_TempDirCase):
    def test_toml_sections_and_sweeps(self):
        path = self.write("exp.toml", """
            seed = 7

            [network]
            n_abs = [50, 150]
            alpha = { start = 2.0, stop = 2.4, step = 0.2 }

            [output]
            svg = true
        """)
        cfg = _load(path)
        self.assertEqual(cfg.seed, 7)
        self.assertEqual(cfg.n_abs, (50, 150))
        self.assertEqual(cfg.alpha, (2.0, 2.2, 2.4))
        self.assertTrue(cfg.svg)

    def test_json(self):
        path = self.write("exp.json", json.dumps({"trials": 123, "mode": "dynamic_comp(2)"}, indent=2))
        cfg = _load(path)
        self.assertEqual((cfg.trials, cfg.mode), (123, "dynamic_comp(2)"))

    def test_issues_carry_line_numbers(self):
        path = self.write("bad.toml", """
            seed = 1
            trials = 10
            n_abs = 4
            bogus = "x"
        """)
        with self.assertRaises(ConfigError) as ctx:
            _load(path)
        by_key = {i.key: i.line for i in ctx.exception.issues}
        self.assertEqual(by_key, {"n_abs": 3, "bogus": 4})
        self.assertIn("bad.toml:3", str(ctx.exception))

    def test_syntax_error(self):
        path = self.write("broken.toml", """
            seed = 1
            trials = = 3
        """)
        with self.assertRaises(ConfigError) as ctx:
            _load(path)
        self.assertEqual(ctx.exception.issues[0].key, "<syntax>")

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            _load(os.path.join(self.tmp, "nope.toml"))


class TestLayering(_TempDirCase):
    def test_precedence(self):
        path = self.write("exp.toml", "trials = 10\nseed = 5\n")
        user = {"workers": 3, "output_dir": "from_user", "lang": "zh"}
        overlay = {"trials": 2, "n_abs": 60, "output_dir": "from_preset"}
        cfg = _load(path, user_config=user, preset_overlay=overlay)
        self.assertEqual((cfg.trials, cfg.n_abs, cfg.output_dir), (10, (60,), "from_preset"))
        self.assertEqual((cfg.workers, cfg.lang), (3, "zh"))

        env = {"AIRCOMP_TRIALS": "20", "AIRCOMP_ALPHA": "2.0,3.0", "OTHER_TRIALS": "99"}
        cfg = _load(path, environ=env, preset_overlay=overlay)
        self.assertEqual((cfg.trials, cfg.alpha), (20, (2.0, 3.0)))

        cfg = _load(path, environ=env, overrides={"trials": 30, "seed": None})
        self.assertEqual((cfg.trials, cfg.seed), (30, 5))

    def test_overridden_key_loses_file_line(self):
        path = self.write("exp.toml", "seed = 1\ntrials = 10\n")
        with self.assertRaises(ConfigError) as ctx:
            _load(path, overrides={"trials": 0})
        self.assertEqual(ctx.exception.issues[0].line, 0)


class TestValidation(unittest.TestCase):
    def test_all_issues_reported(self):
        with self.assertRaises(ConfigError) as ctx:
            _load(overrides={"n_abs": [50, 3], "epsilon_ratio": 1.5, "mode": "teleport",
                             "schemes": [], "case": "average", "serving_distance_m": 5000.0})
        keys = {i.key for i in ctx.exception.issues}
        self.assertEqual(keys, {"n_abs", "epsilon_ratio", "mode", "schemes", "case", "serving_distance_m"})

    def test_accepts_boundaries(self):
        cfg = _load(overrides={"n_abs": 5, "epsilon_ratio": 1.0, "mc_outer_samples": 1000})
        self.assertEqual((cfg.n_abs, cfg.epsilon_ratio), ((5,), 1.0))
        with self.assertRaises(ConfigError):
            _load(overrides={"mc_outer_samples": 999})
        with self.assertRaises(ConfigError):
            _load(overrides={"trials": 2.5})


class TestUserConfig(_TempDirCase):
    def test_round_trip_and_broken_file(self):
        path = os.path.join(self.tmp, "user.json")
        save_user_config({"lang": "zh", "workers": 2}, path)
        self.assertEqual(load_user_config(path)["workers"], 2)
        self.assertEqual(load_user_config(path)["output_dir"], "results")
        with open(path, "w", encoding="utf-8") as f:
            f.write("{not json")
        self.assertEqual(load_user_config(path)["lang"], "en")


class TestPresets(unittest.TestCase):
    def test_every_preset_validates(self):
        table = load_presets()
        self.assertIn("fig9", table)
        self.assertNotIn("__doc__", table)
        for fig_id in table:
            kind, overlay = preset(fig_id, table)
            self.assertIn(kind, FIG_KINDS, fig_id)
            self.assertNotIn("title", overlay)
            _load(preset_overlay=overlay)

    def test_lookup(self):
        kind, overlay = preset("FIG9")
        self.assertEqual(kind, "rate_alpha")
        self.assertEqual(_load(preset_overlay=overlay).n_abs, (50, 150))
        with self.assertRaises(ConfigError):
            preset("fig99")


if __name__ == "__main__":
    unittest.main()
