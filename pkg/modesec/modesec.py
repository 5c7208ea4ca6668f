"""
modesec. Physical layer security simulator for multimode fiber links.

Subcommands:

- modes: solve the LP mode basis of the configured fiber
- tm-gen: synthesize transmission matrices
- sweep: Monte-Carlo SNR sweep over channels and artificial noise levels
- secure: secure channel set at one noise level
- mdm: multi-channel message over the noise grid
"""

import argparse
import importlib.metadata
import logging
import os
import sys

from channel import ChannelException
from config import config
from experiment import ConfigException, ExperimentConfig, build_basis, build_link, build_matrices, one_based_channels
from fiber import FiberException
from matrix import MatrixException, store_matrix
from report import draw_basis, draw_line_scan, draw_mdm, draw_secure, export_basis, write_heatmaps, write_json
from run_logger import RUN_LOG_FILE, attach_run_file, detach_run_file, run_logger
from security import AnalysisException, MdmMessage, SweepReport, noise_sweep, secure_document, secure_mdm_trial

try:
    modesec_version = importlib.metadata.version("modesec")
except importlib.metadata.PackageNotFoundError:
    modesec_version = "dev"

# #################################################
# Set-up logging stuff
formatter = logging.Formatter(fmt="%(asctime)s %(levelname)s %(name)s: %(message)s", datefmt="%Y-%m-%d %H:%M:%S")

# Console (stderr)
console_handler = logging.StreamHandler()
console_handler.setLevel(logging.DEBUG)
console_handler.setFormatter(formatter)

# Root logger
root_logger = logging.getLogger()
root_logger.setLevel(logging.INFO)
if console_handler not in root_logger.handlers:
    root_logger.addHandler(console_handler)

logger = logging.getLogger("modesec")

ERRORS = (FiberException, MatrixException, ChannelException, AnalysisException, ConfigException)


# ---------------------------
# Commands
# ---------------------------
def cmd_modes(cfg: ExperimentConfig) -> None:
    basis = build_basis(cfg)
    print(draw_basis(basis, cfg.tap.rho), end="")
    path = os.path.join(cfg.output.dir, "modes.json")
    export_basis(basis, path, cfg.tap.rho)
    print(f"{len(basis)} modes")
    run_logger.info(f"[MODES] {len(basis)} modes -> {path}")


def cmd_tm_gen(cfg: ExperimentConfig) -> None:
    basis = build_basis(cfg)
    t_ab, t_ae, independent = build_matrices(cfg, len(basis))
    paths = [os.path.join(cfg.output.dir, "tm_ab.json")]
    store_matrix(t_ab, paths[0])
    if independent:
        paths.append(os.path.join(cfg.output.dir, "tm_ae.json"))
        store_matrix(t_ae, paths[1])
    run_logger.info(
        f"[TM-GEN] {cfg.matrix.source} {len(basis)}x{len(basis)}, seed {cfg.matrix.seed} -> {', '.join(paths)}"
    )


def cmd_sweep(cfg: ExperimentConfig) -> None:
    link = build_link(cfg)
    report = noise_sweep(link, cfg.sweep.noise_levels, cfg.sweep.trials, cfg.sweep.seed, n_jobs=cfg.sweep.n_jobs)
    path = os.path.join(cfg.output.dir, "sweep.csv")
    report.write_csv(path)
    written = [path]
    if cfg.sweep.svg:
        written += write_heatmaps(report, cfg.output.dir)
    ini_path = os.path.join(cfg.output.dir, "experiment.ini")
    cfg.to_ini(ini_path)
    written.append(ini_path)
    if cfg.secure.noise_level in report.noise_levels:
        print(draw_line_scan(report, cfg.secure.noise_level), end="")
    run_logger.info(
        f"[SWEEP] {len(report.channels)} channels x {len(report.noise_levels)} noise levels,"
        f" {report.trials_per_cell} trials, seed {report.seed} -> {', '.join(written)}"
    )


def cmd_secure(cfg: ExperimentConfig, report_file: str | None = None) -> None:
    if report_file is not None:
        report = SweepReport.read_csv(report_file)
    else:
        link = build_link(cfg)
        # Same trial seeds as the level's column in a full sweep
        grid = cfg.sweep.noise_levels if cfg.secure.noise_level in cfg.sweep.noise_levels else None
        report = noise_sweep(
            link, [cfg.secure.noise_level], cfg.sweep.trials, cfg.sweep.seed, n_jobs=cfg.sweep.n_jobs, grid=grid
        )
    document = secure_document(report, cfg.secure.noise_level, cfg.secure.eve_fail_min, cfg.secure.bob_success_min)
    path = os.path.join(cfg.output.dir, "secure.json")
    write_json(document, path)
    print(draw_secure(document), end="")
    run_logger.info(
        f"[SECURE] noise level {cfg.secure.noise_level:g}: {document['secure_channels']}"
        f" (eve_fail_min {cfg.secure.eve_fail_min}, bob_success_min {cfg.secure.bob_success_min}) -> {path}"
    )


def cmd_mdm(cfg: ExperimentConfig) -> None:
    basis = build_basis(cfg)
    link = build_link(cfg, basis)
    message = MdmMessage(active_channels=tuple(one_based_channels(cfg.mdm.active_channels(), link.n)), n=link.n)
    summary = secure_mdm_trial(
        link,
        message,
        cfg.sweep.noise_levels,
        cfg.sweep.trials,
        cfg.sweep.seed,
        eve_success_max=cfg.mdm.eve_success_max,
        bob_success_min=cfg.mdm.bob_success_min,
        n_jobs=cfg.sweep.n_jobs,
    )
    path = os.path.join(cfg.output.dir, "mdm.csv")
    summary.write_csv(path)
    print(draw_mdm(summary), end="")
    run_logger.info(f"[MDM] channels {message.label()}, protected from {summary.protecting_noise_level} -> {path}")


# ---------------------------
# Argument handling
# ---------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=str,
        default="config/modesec.ini",
        help="Configuration file (INI format). Default config/modesec.ini",
    )
    common.add_argument("--out", type=str, default=None, help="Output directory. Overrides [output] dir")
    common.add_argument(
        "--seed", type=int, default=None, help="Seed. Overrides [matrix] seed for tm-gen, [sweep] seed otherwise"
    )
    common.add_argument("--trials", type=int, default=None, help="Trials per cell. Overrides [sweep] trials")

    parser = argparse.ArgumentParser(description="modesec. Physical layer security simulator for multimode fibers")
    parser.add_argument("--version", action="version", version=f"modesec {modesec_version}")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("modes", parents=[common], help="Solve and list the LP mode basis")
    commands.add_parser("tm-gen", parents=[common], help="Generate transmission matrix files")
    commands.add_parser("sweep", parents=[common], help="SNR sweep over channels and noise levels")
    secure = commands.add_parser("secure", parents=[common], help="Secure channels at the [secure] noise level")
    secure.add_argument("--report", type=str, default=None, help="Reuse a sweep CSV instead of running a sweep")
    mdm = commands.add_parser("mdm", parents=[common], help="Multi-channel message over the noise grid")
    mdm.add_argument("--channels", type=str, default=None, help="One-based channels, e.g. 1,6,50")
    mdm.add_argument("--bits", type=str, default=None, help="One bit per channel, '1' activates it, e.g. 111")
    return parser


def overrides(args: argparse.Namespace) -> dict:
    result = {
        ("output", "dir"): args.out,
        ("sweep", "trials"): args.trials,
        ("matrix" if args.command == "tm-gen" else "sweep", "seed"): args.seed,
    }
    if args.command == "mdm":
        result[("mdm", "channels")] = args.channels
        # New channels without bits activate all of them
        result[("mdm", "bits")] = args.bits if args.bits is not None or args.channels is None else ""
    return result


def main(argv: list[str] | None = None) -> int:
    """main. Argument parsing, configuration and command dispatch. Returns the exit status."""
    args = build_parser().parse_args(argv)

    if not os.path.isfile(args.config):
        logger.error(f"Configuration file {args.config} not found")
        return 1

    # Read config. config object is then available (via config import) to all.
    for section in config.sections():
        config.remove_section(section)
    config.read(args.config)

    # Adjust log levels
    if config.has_section("logging"):
        for logger_name in config["logging"]:
            logging.getLogger(logger_name).setLevel(level=config.get("logging", logger_name).upper())

    try:
        cfg = ExperimentConfig.from_config(config, overrides(args))
        os.makedirs(cfg.output.dir, exist_ok=True)
    except (ConfigException, OSError) as e:
        logger.error(str(e.value if isinstance(e, ConfigException) else e))
        return 1

    logger.info(f"modesec {modesec_version}: {args.command} with {args.config}, output in {cfg.output.dir}")
    run_handler = attach_run_file(os.path.join(cfg.output.dir, RUN_LOG_FILE), formatter)
    try:
        if args.command == "modes":
            cmd_modes(cfg)
        elif args.command == "tm-gen":
            cmd_tm_gen(cfg)
        elif args.command == "sweep":
            cmd_sweep(cfg)
        elif args.command == "secure":
            cmd_secure(cfg, args.report)
        elif args.command == "mdm":
            cmd_mdm(cfg)
    except ERRORS as e:
        logger.error(f"{args.command} failed: {e.value}")
        return 1
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    finally:
        detach_run_file(run_handler)
    return 0


if __name__ == "__main__":
    sys.exit(main())
