# config/__init__.py

from .config import (
    BASE_DIR,
    CONFIG_DIR,
    DEFAULTS,
    TRANSLATIONS,
    SYSTEM,
    IS_MAC,
    IS_WIN,
    IS_LINUX,
    ExperimentConfig,
    load_experiment_config,
    load_presets,
    load_user_config,
    preset,
    save_user_config,
    validate_config,
)
