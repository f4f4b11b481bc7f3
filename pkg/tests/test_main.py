"""Command-line front-end: argument handling and exit codes."""
import json
import os
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from io import StringIO
from unittest import mock

import main
from core.runner import RC_CONFIG, RC_OK


class TestCli(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name
        # keep the developer's saved preferences and AIRCOMP_* variables out of the run
        env = {k: v for k, v in os.environ.items() if not k.startswith("AIRCOMP_")}
        patches = [
            mock.patch.dict(os.environ, env, clear=True),
            mock.patch.object(main, "load_user_config", return_value={"lang": "en"}),
        ]
        for p in patches:
            p.start()
            self.addCleanup(p.stop)

    def tearDown(self):
        self._tmp.cleanup()

    def _main(self, *argv):
        out, err = StringIO(), StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            rc = main.main(list(argv))
        return rc, out.getvalue(), err.getvalue()

    def _file(self, name, text):
        path = os.path.join(self.tmp, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_plan(self):
        cfg = self._file("exp.toml", "n_abs = 30\nrestarts = 2\n")
        rc, out, _ = self._main("plan", "--config", cfg, "--out", self.tmp, "--epsilon-ratio", "0.3", "--seed", "4")
        self.assertEqual(rc, RC_OK)
        with open(os.path.join(self.tmp, "plan_summary.json"), encoding="utf-8") as f:
            summary = json.load(f)
        self.assertEqual(summary["meta"]["seed"], 4)
        self.assertIn("hash", out)

    def test_config_error(self):
        cfg = self._file("bad.toml", "n_abs = 2\n")
        rc, _, err = self._main("rate", "--config", cfg, "--out", self.tmp)
        self.assertEqual(rc, RC_CONFIG)
        self.assertIn("bad.toml:1", err)

    def test_unknown_figure(self):
        rc, _, _ = self._main("fig", "fig99", "--out", self.tmp)
        self.assertEqual(rc, RC_CONFIG)

    def test_command_required(self):
        with redirect_stderr(StringIO()):
            with self.assertRaises(SystemExit):
                main.main([])


if __name__ == "__main__":
    unittest.main()
