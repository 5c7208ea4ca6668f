"""
Output artifacts: ascii tables for the console, JSON documents and SVG heatmaps.

draw_* functions return strings using '\n' as line separators.
"""

import copy
import json
import logging

import matplotlib
import numpy as np
from fiber import DEFAULT_RHO, ModeBasis
from security import BOB, EVE, FAILED, MdmSummary, SweepReport
from util import atomic_write, db_str

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# Logging setup
logger = logging.getLogger("report")

FAILED_COLOR = "black"


# ---------------------------
# ascii
# ---------------------------
def draw_basis(basis: ModeBasis, rho: float = DEFAULT_RHO) -> str:
    document = basis.external(rho)
    fiber = document["fiber"]
    s = (
        f"Fiber a={fiber['core_radius']:.4g} m, NA={fiber['numerical_aperture']:.4g},"
        f" lambda={fiber['wavelength']:.4g} m, V={fiber['v_number']:.4f}: {document['mode_count']} modes\n"
    )
    s += f"{'ch':>4} {'mode':<8} {'l':>3} {'m':>3} {'orient':<6} {'u':>10} {'w':>10} {'edge(' + str(rho) + ')':>12}\n"
    for mode in document["modes"]:
        s += (
            f"{mode['channel_index'] + 1:>4} {mode['label']:<8} {mode['l']:>3} {mode['m']:>3}"
            f" {mode['orientation']:<6} {mode['u']:>10.6f} {mode['w']:>10.6f} {mode['edge_power_fraction']:>12.6f}\n"
        )
    return s


def draw_line_scan(report: SweepReport, noise_level: float) -> str:
    """Bob and Eve per channel at one noise level. FAILED shows as -inf."""
    j = report.noise_index(noise_level)
    s = f"Noise level {noise_level:g}, {report.trials_per_cell} trials per channel\n"
    s += f"{'ch':>4} {'bob dB':>9} {'bob ok':>7} {'eve dB':>9} {'eve ok':>7}\n"
    for i, channel in enumerate(report.channels):
        s += (
            f"{channel + 1:>4} {db_str(report.bob_snr[i, j]):>9} {report.bob_success_rate[i, j]:>7.3f}"
            f" {db_str(report.eve_snr[i, j]):>9} {report.eve_success_rate[i, j]:>7.3f}\n"
        )
    return s


def draw_secure(document: dict) -> str:
    s = (
        f"Secure channels at noise level {document['noise_level']:g}"
        f" (eve_fail_min={document['eve_fail_min']}, bob_success_min={document['bob_success_min']}):"
    )
    channels = document["secure_channels"]
    s += " " + (", ".join(str(c) for c in channels) if channels else "none") + "\n"
    return s


def draw_mdm(summary: MdmSummary) -> str:
    s = f"Message on channels {summary.message.label()}, {summary.trials} trials per level\n"
    s += f"{'noise':>6} {'bob dB':>9} {'bob ok':>7} {'eve dB':>9} {'eve ok':>7}\n"
    for j, level in enumerate(summary.noise_levels):
        s += (
            f"{level:>6.2f} {db_str(summary.bob_snr[j]):>9} {summary.bob_success_rate[j]:>7.3f}"
            f" {db_str(summary.eve_snr[j]):>9} {summary.eve_success_rate[j]:>7.3f}\n"
        )
    if summary.protecting_noise_level is None:
        s += "No noise level in the grid protects the message\n"
    else:
        s += f"Message protected from noise level {summary.protecting_noise_level:g}\n"
    return s


# ---------------------------
# JSON
# ---------------------------
def write_json(document: dict, path: str) -> None:
    with atomic_write(path) as file:
        json.dump(document, file, indent=2)
        file.write("\n")
    logger.debug(f"Wrote {path}")


def export_basis(basis: ModeBasis, path: str, rho: float = DEFAULT_RHO) -> dict:
    """Mode basis document (fiber parameters, one record per mode) written to path"""
    document = basis.external(rho)
    write_json(document, path)
    return document


# ---------------------------
# SVG
# ---------------------------
def write_heatmap(report: SweepReport, side: str, path: str) -> None:
    """SNR grid of one side as SVG, channels vertically, noise level horizontally. FAILED cells in FAILED_COLOR."""
    grid = report.bob_snr if side == BOB else report.eve_snr
    masked = np.ma.masked_where(grid == FAILED, grid)
    cmap = copy.copy(plt.get_cmap("viridis"))
    cmap.set_bad(FAILED_COLOR)

    levels = [100 * level for level in report.noise_levels]
    fig, ax = plt.subplots(figsize=(6, 8))
    image = ax.imshow(masked, aspect="auto", origin="lower", cmap=cmap, interpolation="nearest")
    ax.set_xticks(range(len(levels)))
    ax.set_xticklabels([f"{level:g}" for level in levels])
    ticks = list(range(0, len(report.channels), max(1, len(report.channels) // 11)))
    ax.set_yticks(ticks)
    ax.set_yticklabels([str(report.channels[i] + 1) for i in ticks])
    ax.set_xlabel("Artificial noise level (%)")
    ax.set_ylabel("Mode channel")
    name = "Bob" if side == BOB else "Eve"
    ax.set_title(f"{name} SNR (dB), {report.trials_per_cell} trials, failed in {FAILED_COLOR}")
    fig.colorbar(image, ax=ax, label="SNR (dB)")
    fig.tight_layout()

    plt.rcParams["svg.hashsalt"] = "modesec"
    with atomic_write(path, mode="wb") as file:
        fig.savefig(file, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug(f"Wrote {side} heatmap to {path}")


def write_heatmaps(report: SweepReport, directory: str) -> list[str]:
    paths = []
    for side in [BOB, EVE]:
        path = f"{directory}/{side}_snr.svg"
        write_heatmap(report, side, path)
        paths.append(path)
    return paths
