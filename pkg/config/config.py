import json
import math
import os
import platform
import re
import sys
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Mapping, Optional, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from core.errors import ConfigError, ConfigIssue, ParameterError


# =========================================
# 1. System & paths
# =========================================

def get_base_path():
    """
    Project root (the directory holding main.py).
    - frozen build: next to the executable (Contents/Resources on macOS)
    - source run: two levels above config/config.py
    """
    if getattr(sys, 'frozen', False):
        exe_dir = os.path.dirname(sys.executable)
        if sys.platform == 'darwin':
            return os.path.abspath(os.path.join(exe_dir, '..', 'Resources'))
        return exe_dir
    return os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def get_config_path():
    """The config folder itself."""
    if getattr(sys, 'frozen', False):
        base = get_base_path()
        candidate = os.path.join(base, "config")
        if os.path.isdir(candidate):
            return candidate
        internal = os.path.join(base, "_internal", "config")
        if os.path.isdir(internal):
            return internal
        return candidate
    return os.path.dirname(os.path.abspath(__file__))


BASE_DIR = get_base_path()
CONFIG_DIR = get_config_path()
TRANSLATION_FILE = os.path.join(CONFIG_DIR, "translations.json")
PRESETS_FILE = os.path.join(CONFIG_DIR, "presets.json")
USER_CONFIG_FILE = os.path.join(os.path.expanduser("~"), ".aircomp_config.json")

ENV_PREFIX = "AIRCOMP_"

# NOTE:
# platform.system() is only called here.
# Other modules should import SYSTEM / IS_* flags from this file.
SYSTEM = platform.system()  # Darwin / Windows / Linux
IS_MAC = SYSTEM == "Darwin"
IS_WIN = SYSTEM == "Windows"
IS_LINUX = SYSTEM == "Linux"

# =========================================
# 2. Translations
# =========================================

# used when translations.json is missing or unreadable
_FALLBACK_TRANSLATIONS = {
    "en": {
        "title": "aircomp (fallback)",
        "msg_config_error": "Invalid configuration:",
        "msg_numeric_error": "Numerical failure: {err}",
        "msg_cancelled": "Stopped by user.",
        "msg_done": "Done: {path}",
    },
    "zh": {
        "title": "aircomp（后备）",
        "msg_config_error": "配置无效：",
        "msg_numeric_error": "数值计算失败：{err}",
        "msg_cancelled": "已被用户终止。",
        "msg_done": "完成：{path}",
    },
}


def load_translations():
    """External JSON first, built-in fallback otherwise."""
    if os.path.exists(TRANSLATION_FILE):
        try:
            with open(TRANSLATION_FILE, "r", encoding="utf-8") as f:
                return json.load(f)
        except Exception as e:
            print(f"Error loading translations: {e}", file=sys.stderr)
            return _FALLBACK_TRANSLATIONS
    print(f"Warning: Translation file not found at {TRANSLATION_FILE}", file=sys.stderr)
    return _FALLBACK_TRANSLATIONS


TRANSLATIONS = load_translations()


# =========================================
# 3. User config (persisted preferences)
# =========================================

def load_user_config(path: Optional[str] = None):
    """Saved preferences over built-in defaults; a broken file is ignored."""
    defaults = {
        "lang": "en",
        "output_dir": "results",
        "workers": 1,
    }
    path = path or USER_CONFIG_FILE
    if os.path.exists(path):
        try:
            with open(path, "r", encoding="utf-8") as f:
                saved = json.load(f)
                if isinstance(saved, dict):
                    defaults.update(saved)
        except Exception:
            pass
    return defaults


def save_user_config(config_data, path: Optional[str] = None):
    try:
        with open(path or USER_CONFIG_FILE, "w", encoding="utf-8") as f:
            json.dump(config_data, f, ensure_ascii=False, indent=4)
    except Exception as e:
        print(f"Failed to save config: {e}", file=sys.stderr)


# =========================================
# 4. Experiment config
# =========================================

# ln(1 + 10^3) nats/s/Hz
DEFAULT_RATE_THRESHOLD = math.log1p(1e3)

DEFAULTS: Dict[str, Any] = {
    "n_abs": 150,
    "radius_m": 3000.0,
    "alpha": 2.8,
    "gamma_db_grid": {"start": -20.0, "stop": 30.0, "step": 5.0},
    "trials": 10000,
    "seed": 2024,
    "mode": "delaunay_comp",
    "rate_threshold_nats": DEFAULT_RATE_THRESHOLD,
    "restarts": 8,
    "output_dir": "results",
    "mc_outer_samples": 2000,
    "workers": 1,
    "case": "general",
    "schemes": ["delaunay_comp", "voronoi_no_comp"],
    "epsilon_ratio": None,
    "svg": False,
    "bins": 60,
    "serving_distance_m": 500.0,
    "lang": "en",
    "delaunay_backend": "qhull",
}

SWEEP_KEYS = ("n_abs", "alpha", "gamma_db_grid")

# user-config keys that may seed an experiment
_USER_KEYS = ("lang", "output_dir", "workers")


@dataclass(frozen=True)
class ExperimentConfig:
    n_abs: Tuple[int, ...]
    radius_m: float
    alpha: Tuple[float, ...]
    gamma_db_grid: Tuple[float, ...]
    trials: int
    seed: int
    mode: str
    rate_threshold_nats: float
    restarts: int
    output_dir: str
    mc_outer_samples: int
    workers: int
    case: str
    schemes: Tuple[str, ...]
    epsilon_ratio: Optional[float]
    svg: bool
    bins: int
    serving_distance_m: float
    lang: str
    delaunay_backend: str

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def hash_payload(self) -> Dict[str, Any]:
        """Everything that changes results (presentation keys excluded)."""
        d = self.as_dict()
        for key in ("output_dir", "workers", "svg", "lang"):
            d.pop(key)
        return d


def expand_sweep(value) -> List[float]:
    """Scalar, list, or {start, stop, step} (inclusive stop, rounded to 10 decimals)."""
    if isinstance(value, Mapping):
        missing = {"start", "stop", "step"} - set(value)
        if missing:
            raise ParameterError(f"sweep table is missing {sorted(missing)}")
        start, stop, step = (float(value[k]) for k in ("start", "stop", "step"))
        if not step > 0:
            raise ParameterError("sweep step must be positive")
        if stop < start:
            raise ParameterError("sweep stop must not be below start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(count)]
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _is_sweep_table(value) -> bool:
    return isinstance(value, Mapping) and bool(value) and set(value) <= {"start", "stop", "step"}


def _flatten(doc: Mapping[str, Any]) -> Dict[str, Any]:
    """Nested tables are sections: their entries are merged at top level."""
    flat: Dict[str, Any] = {}
    for key, value in doc.items():
        if isinstance(value, Mapping) and not _is_sweep_table(value):
            flat.update(_flatten(value))
        else:
            flat[key] = value
    return flat


def _line_map(text: str, json_style: bool) -> Dict[str, int]:
    pattern = re.compile(r'^\s*"([A-Za-z_][A-Za-z0-9_]*)"\s*:' if json_style
                         else r'^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=')
    lines: Dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        m = pattern.match(line)
        if m and m.group(1) not in lines:
            lines[m.group(1)] = number
    return lines


def read_config_file(path: str) -> Tuple[Dict[str, Any], Dict[str, int]]:
    """Flattened document and key -> 1-based line number."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError([ConfigIssue(0, "<file>", f"cannot read: {e}")], path) from None
    is_json = path.lower().endswith(".json")
    try:
        doc = json.loads(text) if is_json else tomllib.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([ConfigIssue(e.lineno, "<syntax>", e.msg)], path) from None
    except tomllib.TOMLDecodeError as e:
        m = re.search(r"line (\d+)", str(e))
        raise ConfigError([ConfigIssue(int(m.group(1)) if m else 0, "<syntax>", str(e))], path) from None
    if not isinstance(doc, dict):
        raise ConfigError([ConfigIssue(1, "<document>", "top level must be a table")], path)
    return _flatten(doc), _line_map(text, is_json)


def _env_value(text: str):
    try:
        return json.loads(text)
    except ValueError:
        pass
    if "," in text:
        return [_env_value(part.strip()) for part in text.split(",")]
    return text


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower()
            if key in DEFAULTS:
                out[key] = _env_value(value)
    return out


# ---- validation -----------------------------------------------------------

def _as_int(v) -> Optional[int]:
    if isinstance(v, bool):
        return None
    if isinstance(v, int):
        return v
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return None


def _as_float(v) -> Optional[float]:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        return None
    return float(v)


def validate_config(raw: Mapping[str, Any], lines: Optional[Mapping[str, int]] = None,
                    source: str = "<config>") -> ExperimentConfig:
    """Check every key against the module preconditions; all issues are reported together."""
    from core.geometry import BACKENDS
    from core.simulator import parse_mode

    lines = lines or {}
    issues: List[ConfigIssue] = []

    def bad(key, message):
        issues.append(ConfigIssue(int(lines.get(key, 0)), key, message))

    for key in raw:
        if key not in DEFAULTS:
            bad(key, "unknown key")
    values = dict(DEFAULTS)
    values.update({k: v for k, v in raw.items() if k in DEFAULTS})
    out: Dict[str, Any] = {}

    def sweep(key, conv, check, what):
        try:
            items = expand_sweep(values[key])
        except (ParameterError, TypeError, ValueError) as e:
            bad(key, str(e))
            return ()
        if not items:
            bad(key, "must not be empty")
            return ()
        conv_items = [conv(v) for v in items]
        if any(v is None or not check(v) for v in conv_items):
            bad(key, f"every entry must be {what}")
            return ()
        return tuple(conv_items)

    out["n_abs"] = sweep("n_abs", _as_int, lambda v: v >= 5, "an integer >= 5")
    out["alpha"] = sweep("alpha", _as_float, lambda v: v > 0 and math.isfinite(v), "a positive number")
    out["gamma_db_grid"] = sweep("gamma_db_grid", _as_float, math.isfinite, "a finite number (dB)")

    def scalar(key, conv, check, what):
        v = conv(values[key])
        if v is None or not check(v):
            bad(key, f"must be {what}, got {values[key]!r}")
            return DEFAULTS[key]
        return v

    out["radius_m"] = scalar("radius_m", _as_float, lambda v: v > 0 and math.isfinite(v), "a positive number")
    out["trials"] = scalar("trials", _as_int, lambda v: v >= 1, "an integer >= 1")
    out["seed"] = scalar("seed", _as_int, lambda v: v >= 0, "a non-negative integer")
    out["rate_threshold_nats"] = scalar("rate_threshold_nats", _as_float, lambda v: v > 0, "a positive number")
    out["restarts"] = scalar("restarts", _as_int, lambda v: v >= 1, "an integer >= 1")
    out["mc_outer_samples"] = scalar("mc_outer_samples", _as_int, lambda v: v >= 1000, "an integer >= 1000")
    out["workers"] = scalar("workers", _as_int, lambda v: v >= 1, "an integer >= 1")
    out["bins"] = scalar("bins", _as_int, lambda v: v >= 10, "an integer >= 10")
    out["serving_distance_m"] = scalar("serving_distance_m", _as_float,
                                       lambda v: 0 < v < out["radius_m"], "inside (0, radius_m)")

    def choice(key, allowed):
        v = values[key]
        if v not in allowed:
            bad(key, f"must be one of {list(allowed)}, got {v!r}")
            return DEFAULTS[key]
        return v

    out["case"] = choice("case", ("general", "worst"))
    out["lang"] = choice("lang", tuple(TRANSLATIONS) or ("en",))
    out["delaunay_backend"] = choice("delaunay_backend", BACKENDS)

    def mode_ok(text) -> bool:
        try:
            parse_mode(text)
            return True
        except ParameterError:
            return False

    out["mode"] = values["mode"] if isinstance(values["mode"], str) and mode_ok(values["mode"]) else None
    if out["mode"] is None:
        bad("mode", f"unknown simulation mode {values['mode']!r}")
        out["mode"] = DEFAULTS["mode"]
    schemes = values["schemes"]
    if isinstance(schemes, str):
        schemes = [schemes]
    if not isinstance(schemes, (list, tuple)) or not schemes or \
            not all(isinstance(s, str) and mode_ok(s) for s in schemes):
        bad("schemes", "must be a non-empty list of simulation modes")
        schemes = DEFAULTS["schemes"]
    out["schemes"] = tuple(schemes)

    out["output_dir"] = values["output_dir"] if isinstance(values["output_dir"], str) and values["output_dir"] else None
    if out["output_dir"] is None:
        bad("output_dir", "must be a non-empty path")
        out["output_dir"] = DEFAULTS["output_dir"]

    svg = values["svg"]
    if not isinstance(svg, bool):
        bad("svg", "must be true or false")
        svg = False
    out["svg"] = svg

    ratio = values["epsilon_ratio"]
    if ratio is not None:
        ratio = _as_float(ratio)
        if ratio is None or not 0 < ratio <= 1:
            bad("epsilon_ratio", "must lie in (0, 1]")
            ratio = None
    out["epsilon_ratio"] = ratio

    if issues:
        raise ConfigError(issues, source)
    names = {f.name for f in fields(ExperimentConfig)}
    return ExperimentConfig(**{k: out[k] for k in names})


def load_experiment_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None,
                           environ: Optional[Mapping[str, str]] = None,
                           user_config: Optional[Mapping[str, Any]] = None,
                           preset_overlay: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """DEFAULTS -> user config -> figure preset -> file -> AIRCOMP_* environment -> explicit overrides."""
    raw: Dict[str, Any] = {}
    user = load_user_config() if user_config is None else user_config
    raw.update({k: user[k] for k in _USER_KEYS if k in user})
    if preset_overlay:
        raw.update(preset_overlay)
    lines: Dict[str, int] = {}
    source = "<defaults>"
    if path:
        doc, lines = read_config_file(path)
        raw.update(doc)
        source = path
    env = env_overrides(environ)
    raw.update(env)
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    # a key overridden after the file no longer has a file line
    later = set(env) | {k for k, v in (overrides or {}).items() if v is not None}
    for key in later:
        lines.pop(key, None)
    return validate_config(raw, lines, source)


# =========================================
# 5. Figure presets
# =========================================

def load_presets(path: Optional[str] = None) -> Dict[str, Dict[str, Any]]:
    path = path or PRESETS_FILE
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, ValueError) as e:
        raise ConfigError([ConfigIssue(0, "<presets>", str(e))], path) from None
    return {k: v for k, v in data.items() if not k.startswith("__")}


def preset(fig_id: str, presets: Optional[Mapping[str, Mapping[str, Any]]] = None) -> Tuple[str, Dict[str, Any]]:
    """(kind, config overlay) for a figure id such as 'fig9'."""
    table = load_presets() if presets is None else presets
    key = fig_id.lower()
    if key not in table:
        raise ConfigError([ConfigIssue(0, "fig", f"unknown figure {fig_id!r}; known: {sorted(table)}")],
                          PRESETS_FILE)
    entry = dict(table[key])
    kind = entry.pop("kind")
    entry.pop("title", None)
    return kind, entry
