import argparse
import sys

from config.config import TRANSLATIONS, load_experiment_config, load_user_config, preset
from core.errors import ConfigError
from core.runner import RC_CONFIG, RC_INTERRUPTED, ExperimentRunner
from utils.csv_utils import config_hash
from utils.log_utils import LOG_PREFIX, console_log
from utils.platform_utils import open_output_folder


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aircomp",
        description="Aerial CoMP network simulator: Delaunay cooperation, rate/coverage analytics, "
                    "frequency planning.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment file (.toml or .json)")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--out", dest="output_dir", help="output directory")
    common.add_argument("--workers", type=int)
    common.add_argument("--lang", choices=sorted(TRANSLATIONS) or ["en"])
    common.add_argument("--svg", action="store_true", default=None, help="also render SVG charts")
    common.add_argument("--open", action="store_true", help="open the output folder when done")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("rate", parents=[common], help="achievable rate: simulation and analysis")
    sub.add_parser("coverage", parents=[common], help="coverage probability over the SIR grid")
    p_plan = sub.add_parser("plan", parents=[common], help="frequency plan for one realization per N")
    p_plan.add_argument("--epsilon-ratio", dest="epsilon_ratio", type=float,
                        help="use eps* = ratio * R instead of solving for it")
    sub.add_parser("compare", parents=[common], help="paired coverage comparison of association schemes")
    p_val = sub.add_parser("validate", parents=[common], help="run the numerical self-check report")
    p_val.add_argument("--corrupt-tessellation", dest="corrupt", action="store_true",
                       help="feed a non-Delaunay complex to the audit (the report must fail)")
    p_fig = sub.add_parser("fig", parents=[common], help="reproduce a figure preset")
    p_fig.add_argument("fig_id", help="fig4, fig9 ... fig18")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    overrides = {
        "seed": args.seed,
        "trials": args.trials,
        "output_dir": args.output_dir,
        "workers": args.workers,
        "lang": args.lang,
        "svg": args.svg,
        "epsilon_ratio": getattr(args, "epsilon_ratio", None),
    }
    user = load_user_config()
    lang = args.lang or user.get("lang", "en")
    kind = None
    try:
        overlay = None
        if args.command == "fig":
            kind, overlay = preset(args.fig_id)
        cfg = load_experiment_config(args.config, overrides, user_config=user, preset_overlay=overlay)
    except ConfigError as e:
        runner = ExperimentRunner(console_log, TRANSLATIONS, lang)
        console_log(runner.map_exception_to_user_message(e), "error")
        return RC_CONFIG

    runner = ExperimentRunner(console_log, TRANSLATIONS, cfg.lang)
    console_log(runner._t("log_config", "Config: {source} (hash {hash})",
                          source=args.config or "<defaults>", hash=config_hash(cfg.hash_payload())))
    try:
        _, rc = runner.run(args.command, cfg, fig_id=getattr(args, "fig_id", None), fig_kind=kind,
                           corrupt=getattr(args, "corrupt", False))
    except KeyboardInterrupt:
        console_log(runner._t("msg_cancelled", "Stopped by user."), "warning")
        return RC_INTERRUPTED

    if args.open:
        ok, err = open_output_folder(cfg.output_dir)
        if not ok:
            console_log(runner._t("log_open_failed", "Could not open the output folder: {err}", err=err),
                        "warning")
    return rc


if __name__ == "__main__":
    # keep the markers readable on legacy Windows consoles
    if sys.stdout.encoding and sys.stdout.encoding.lower() not in ("utf-8", "utf8"):
        LOG_PREFIX.update({"error": "[x] ", "success": "[ok] ", "warning": "[!] "})
    sys.exit(main())
