"""
Detection, SNR and Monte-Carlo security analysis.

A trial sends one message (a set of active mode channels) over a LinkConfig and lets both Bob and
Eve detect it with a top-k detector. A detection fails when the detected set differs from the sent
set; its SNR is then the FAILED sentinel (-inf).

Sweeps run many trials per (channel, artificial noise level) cell. Each trial gets its own seed
derived from the base seed and the cell coordinates, so a report does not depend on how cells are
spread over workers.
"""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from channel import LinkConfig, eve_equalize, precode, transmit_bob, transmit_eve
from config import config
from joblib import Parallel, delayed
from matrix import normalize_unit
from util import Seed, atomic_write, db_str, derive_seed, make_rng, parse_db, rng_algorithm

# Logging setup
logger = logging.getLogger("security")

FAILED = -math.inf
DEFAULT_SNR_CAP_DB = 200.0
DEFAULT_EVE_FAIL_MIN = 0.99
DEFAULT_BOB_SUCCESS_MIN = 0.99
# Cells where fewer than this share of trials succeed are reported as FAILED.
MAJORITY = 0.5

BOB = "bob"
EVE = "eve"
SIDES = [BOB, EVE]

SWEEP_CSV_FIELDS = ["channel", "noise_level", "side", "mean_snr_db", "success_rate", "trials", "seed"]
MDM_CSV_FIELDS = ["channels", "noise_level", "side", "mean_snr_db", "success_rate", "trials", "seed"]


# ---------------------------
# Exceptions
# ---------------------------
@dataclass
class AnalysisException(Exception):
    value: str


def snr_cap_db() -> float:
    return config.getfloat("analysis", "snr_cap_db", fallback=DEFAULT_SNR_CAP_DB)


@dataclass(frozen=True)
class DetectionResult:
    detected_channels: frozenset
    success: bool
    snr_db: float

    def __post_init__(self):
        if not self.success and self.snr_db != FAILED:
            raise AnalysisException("A failed detection must carry the FAILED SNR sentinel")


@dataclass(frozen=True)
class MdmMessage:
    """A message activating k distinct channels (zero-based) with equal amplitude 1/sqrt(k)."""

    active_channels: tuple[int, ...]
    n: int

    def __post_init__(self):
        channels = tuple(int(c) for c in self.active_channels)
        if not 1 <= len(channels) <= self.n:
            raise AnalysisException(f"A message needs between 1 and {self.n} channels, got {len(channels)}")
        if len(set(channels)) != len(channels):
            raise AnalysisException(f"Duplicate channels in message {[c + 1 for c in channels]}")
        bad = [c + 1 for c in channels if not 0 <= c < self.n]
        if bad:
            raise AnalysisException(f"Channels {bad} outside 1..{self.n}")
        object.__setattr__(self, "active_channels", channels)

    @property
    def k(self) -> int:
        return len(self.active_channels)

    @property
    def channel_set(self) -> frozenset:
        return frozenset(self.active_channels)

    def vector(self) -> np.ndarray:
        """Unit normalized message vector x_A"""
        x = np.zeros(self.n, dtype=complex)
        x[list(self.active_channels)] = 1.0
        return normalize_unit(x)

    def label(self) -> str:
        """One-based channel list, e.g. '1;6;50'"""
        return ";".join(str(c + 1) for c in self.active_channels)


# ---------------------------
# Metrics and detection
# ---------------------------
def snr_db(y, signal_set, cap: float | None = None) -> float:
    """10 log10(mean signal power / mean background power), limited to cap (config snr_cap_db, default 200 dB)."""
    y = np.asarray(y)
    signal = sorted(set(int(i) for i in signal_set))
    if not signal or len(signal) >= len(y) or signal[0] < 0 or signal[-1] >= len(y):
        raise AnalysisException(f"Signal set must be a non-empty proper subset of 0..{len(y) - 1}")
    cap = snr_cap_db() if cap is None else cap
    power = np.abs(y) ** 2
    mask = np.zeros(len(y), dtype=bool)
    mask[signal] = True
    signal_power = float(np.mean(power[mask]))
    background_power = float(np.mean(power[~mask]))
    if background_power == 0.0:
        logger.debug(f"Zero background power, SNR capped at {cap} dB")
        return cap
    if signal_power == 0.0:
        return FAILED
    return min(10.0 * math.log10(signal_power / background_power), cap)


def detect_topk(y, k: int) -> frozenset:
    """Indices of the k largest magnitudes. Equal magnitudes prefer the lower index."""
    magnitudes = np.abs(np.asarray(y))
    if not 1 <= k <= len(magnitudes):
        raise AnalysisException(f"k must be between 1 and {len(magnitudes)}, got {k}")
    order = np.argsort(-magnitudes, kind="stable")
    return frozenset(int(i) for i in order[:k])


def detect_threshold(y, tau: float) -> frozenset:
    """Indices with magnitude at least tau"""
    if not tau > 0:
        raise AnalysisException(f"Threshold must be positive, got {tau}")
    return frozenset(int(i) for i in np.flatnonzero(np.abs(np.asarray(y)) >= tau))


def _detect(y: np.ndarray, sent: frozenset, cap: float) -> DetectionResult:
    detected = detect_topk(y, len(sent))
    if detected != sent:
        return DetectionResult(detected_channels=detected, success=False, snr_db=FAILED)
    snr = cap if len(sent) == len(y) else snr_db(y, sent, cap)
    return DetectionResult(detected_channels=detected, success=True, snr_db=snr)


def run_trial(
    link: LinkConfig,
    message: MdmMessage,
    seed: Seed | np.random.Generator,
    noise_level: float | None = None,
    cap: float | None = None,
) -> tuple[DetectionResult, DetectionResult]:
    """One transmission of message over link. Returns (Bob, Eve).

    noise_level overrides the link's artificial noise level. A single generator drives the
    artificial noise, then Bob's, then Eve's receiver noise.
    """
    if message.n != link.n:
        raise AnalysisException(f"Message is for {message.n} channels, link has {link.n}")
    noise_level = link.artificial_noise_level if noise_level is None else noise_level
    cap = snr_cap_db() if cap is None else cap
    rng = make_rng(seed)

    x_precoded = precode(
        link.t_ab, message.vector(), noise_level, link.alpha_rule, rng, link.noise_scaling, t_inv=link.t_ab_inv
    )
    y_b = transmit_bob(link.t_ab, x_precoded, link.noise_std, rng)
    y_e = eve_equalize(link, transmit_eve(link.t_ae, link.tap, x_precoded, link.noise_std, rng))
    sent = message.channel_set
    return _detect(y_b, sent, cap), _detect(y_e, sent, cap)


# ---------------------------
# Aggregation
# ---------------------------
def summarize(results: list[DetectionResult]) -> tuple[float, float]:
    """(mean SNR in dB over successful trials, success rate). Mean is FAILED when the majority fails."""
    successes = [r.snr_db for r in results if r.success]
    rate = len(successes) / len(results)
    if not successes or rate < MAJORITY:
        return FAILED, rate
    return float(np.mean(successes)), rate


def _run_cell(
    link: LinkConfig,
    channels: tuple[int, ...],
    noise_index: int,
    noise_level: float,
    trials: int,
    seed: Seed,
    algorithm: str,
    cap: float,
) -> tuple[float, float, float, float]:
    """(bob mean SNR, bob rate, eve mean SNR, eve rate) for one grid cell"""
    message = MdmMessage(active_channels=channels, n=link.n)
    bob, eve = [], []
    for trial in range(trials):
        rng = make_rng(derive_seed(seed, *channels, noise_index, trial), algorithm)
        b, e = run_trial(link, message, rng, noise_level=noise_level, cap=cap)
        bob.append(b)
        eve.append(e)
    return (*summarize(bob), *summarize(eve))


def _run_cells(link: LinkConfig, cells: list[tuple], trials: int, seed: Seed, n_jobs: int | None) -> list[tuple]:
    """cells: (channels, noise_index, noise_level). Results in cell order."""
    if trials < 1:
        raise AnalysisException(f"Trials must be at least 1, got {trials}")
    if n_jobs is None:
        n_jobs = config.getint("sweep", "n_jobs", fallback=1)
    # Derived matrices are computed once here rather than in every worker
    _ = (link.h_inv, link.signal_scale)
    algorithm, cap = rng_algorithm(), snr_cap_db()
    return Parallel(n_jobs=n_jobs)(
        delayed(_run_cell)(link, channels, noise_index, noise_level, trials, seed, algorithm, cap)
        for channels, noise_index, noise_level in cells
    )


def _validate_noise_levels(noise_levels: list[float]) -> list[float]:
    levels = [float(level) for level in noise_levels]
    if not levels:
        raise AnalysisException("Noise level grid is empty")
    if any(not 0.0 <= level <= 1.0 for level in levels):
        raise AnalysisException(f"Noise levels must be in [0, 1], got {levels}")
    if any(b <= a for a, b in zip(levels[:-1], levels[1:])):
        raise AnalysisException(f"Noise levels must be ascending, got {levels}")
    return levels


def _grid_indices(levels: list[float], grid: list[float] | None) -> list[int]:
    if grid is None:
        return list(range(len(levels)))
    grid = _validate_noise_levels(grid)
    missing = [level for level in levels if level not in grid]
    if missing:
        raise AnalysisException(f"Noise levels {missing} are not in the grid {grid}")
    return [grid.index(level) for level in levels]


# ---------------------------
# Sweep report
# ---------------------------
@dataclass(eq=False)
class SweepReport:
    """Mean SNR and success rate grids, shape (channels, noise levels). Channels are zero-based."""

    channels: list[int]
    noise_levels: list[float]
    bob_snr: np.ndarray
    eve_snr: np.ndarray
    bob_success_rate: np.ndarray
    eve_success_rate: np.ndarray
    trials_per_cell: int
    seed: Seed

    def __post_init__(self):
        shape = (len(self.channels), len(self.noise_levels))
        for name in ["bob_snr", "eve_snr", "bob_success_rate", "eve_success_rate"]:
            grid = np.asarray(getattr(self, name), dtype=float)
            if grid.shape != shape:
                raise AnalysisException(f"{name} has shape {grid.shape}, expected {shape}")
            setattr(self, name, grid)
        for name in ["bob_success_rate", "eve_success_rate"]:
            grid = getattr(self, name)
            if np.any(grid < 0) or np.any(grid > 1):
                raise AnalysisException(f"{name} outside [0, 1]")

    def noise_index(self, noise_level: float) -> int:
        """Column of noise_level.

        :raises:
        AnalysisException: If noise_level is not in the grid.
        """
        for i, level in enumerate(self.noise_levels):
            if math.isclose(level, noise_level, rel_tol=0.0, abs_tol=1e-9):
                return i
        available = ", ".join(f"{level:g}" for level in self.noise_levels)
        raise AnalysisException(f"Noise level {noise_level:g} not in report. Available: {available}")

    def snr(self, side: str) -> np.ndarray:
        return self.bob_snr if side == BOB else self.eve_snr

    def success_rate(self, side: str) -> np.ndarray:
        return self.bob_success_rate if side == BOB else self.eve_success_rate

    def rows(self):
        """CSV rows, channels one-based"""
        for i, channel in enumerate(self.channels):
            for j, level in enumerate(self.noise_levels):
                for side in SIDES:
                    yield {
                        "channel": channel + 1,
                        "noise_level": repr(level),
                        "side": side,
                        "mean_snr_db": db_str(self.snr(side)[i, j]),
                        "success_rate": repr(float(self.success_rate(side)[i, j])),
                        "trials": self.trials_per_cell,
                        "seed": self.seed,
                    }

    def write_csv(self, file: str) -> None:
        logger.info(f"Writing sweep report to {file}")
        with atomic_write(file, newline="") as f:
            writer = csv.DictWriter(f, fieldnames=SWEEP_CSV_FIELDS)
            writer.writeheader()
            for row in self.rows():
                writer.writerow(row)

    @staticmethod
    def read_csv(file: str) -> "SweepReport":
        """Read a report written by write_csv

        :raises:
        AnalysisException: Missing columns, inconsistent trials/seed or incomplete grid.
        """
        logger.info(f"Reading sweep report from {file}")
        with open(file, mode="r", newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            missing = set(SWEEP_CSV_FIELDS) - set(reader.fieldnames or [])
            if missing:
                raise AnalysisException(f"Sweep report {file} lacks columns {sorted(missing)}")
            rows = list(reader)
        if not rows:
            raise AnalysisException(f"Sweep report {file} is empty")

        try:
            channels = list(dict.fromkeys(int(r["channel"]) - 1 for r in rows))
            levels = list(dict.fromkeys(float(r["noise_level"]) for r in rows))
            trials = {int(r["trials"]) for r in rows}
            seeds = {int(r["seed"]) for r in rows}
            if len(trials) != 1 or len(seeds) != 1:
                raise AnalysisException(f"Sweep report {file} mixes trial counts or seeds")
            shape = (len(channels), len(levels))
            grids = {f"{side}_{kind}": np.full(shape, np.nan) for side in SIDES for kind in ["snr", "success_rate"]}
            for r in rows:
                if r["side"] not in SIDES:
                    raise AnalysisException(f"Unknown side {r['side']} in {file}")
                i = channels.index(int(r["channel"]) - 1)
                j = levels.index(float(r["noise_level"]))
                grids[f"{r['side']}_snr"][i, j] = parse_db(r["mean_snr_db"])
                grids[f"{r['side']}_success_rate"][i, j] = float(r["success_rate"])
        except ValueError as e:
            raise AnalysisException(f"Malformed sweep report {file}: {e}")
        if any(np.any(np.isnan(g)) for g in grids.values()):
            raise AnalysisException(f"Sweep report {file} does not cover the full channel x noise level grid")
        return SweepReport(
            channels=channels,
            noise_levels=levels,
            trials_per_cell=trials.pop(),
            seed=seeds.pop(),
            **grids,
        )


def noise_sweep(
    link: LinkConfig,
    noise_levels: list[float],
    trials: int,
    seed: Seed,
    n_jobs: int | None = None,
    channels: list[int] | None = None,
    grid: list[float] | None = None,
) -> SweepReport:
    """Single-channel transmissions over every channel (zero-based) and noise level.

    When noise_levels are picked from a larger grid, trial seeds follow each level's position in grid,
    so the report reproduces the matching columns of the full sweep.
    """
    levels = _validate_noise_levels(noise_levels)
    indices = _grid_indices(levels, grid)
    channels = list(range(link.n)) if channels is None else [int(c) for c in channels]
    cells = [((c,), j, level) for c in channels for j, level in zip(indices, levels)]
    logger.info(f"Sweeping {len(channels)} channels x {len(levels)} noise levels, {trials} trials per cell")
    results = _run_cells(link, cells, trials, seed, n_jobs)

    shape = (len(channels), len(levels))
    grids = [np.array([r[k] for r in results]).reshape(shape) for k in range(4)]
    report = SweepReport(
        channels=channels,
        noise_levels=levels,
        bob_snr=grids[0],
        bob_success_rate=grids[1],
        eve_snr=grids[2],
        eve_success_rate=grids[3],
        trials_per_cell=trials,
        seed=seed,
    )
    logger.debug(
        f"Sweep done. Bob mean success {report.bob_success_rate.mean():.3f}, Eve {report.eve_success_rate.mean():.3f}"
    )
    return report


def channel_sweep(link: LinkConfig, trials: int, seed: Seed, n_jobs: int | None = None) -> SweepReport:
    """noise_sweep at the link's own artificial noise level only"""
    return noise_sweep(link, [link.artificial_noise_level], trials, seed, n_jobs=n_jobs)


def secure_channels(
    report: SweepReport,
    noise_level: float,
    eve_fail_min: float = DEFAULT_EVE_FAIL_MIN,
    bob_success_min: float = DEFAULT_BOB_SUCCESS_MIN,
) -> list[int]:
    """Channels (zero-based) where Eve fails in at least eve_fail_min of the trials and Bob succeeds in at least
    bob_success_min"""
    j = report.noise_index(noise_level)
    return [
        channel
        for i, channel in enumerate(report.channels)
        if 1.0 - report.eve_success_rate[i, j] >= eve_fail_min and report.bob_success_rate[i, j] >= bob_success_min
    ]


def secure_document(report: SweepReport, noise_level: float, eve_fail_min: float, bob_success_min: float) -> dict:
    """Secure set with the thresholds used, channels one-based"""
    channels = secure_channels(report, noise_level, eve_fail_min, bob_success_min)
    return {
        "noise_level": noise_level,
        "eve_fail_min": eve_fail_min,
        "bob_success_min": bob_success_min,
        "trials": report.trials_per_cell,
        "seed": report.seed,
        "secure_channels": [c + 1 for c in channels],
    }


# ---------------------------
# Mode division multiplexing
# ---------------------------
def mdm_symbol_count(n: int, k: int, ordered: bool = True) -> int:
    """Number of distinct k-channel symbols over n channels. Ordered counts n(n-1)...(n-k+1)."""
    if n < 1 or not 1 <= k <= n:
        raise AnalysisException(f"Symbol count needs 1 <= k <= n, got n={n}, k={k}")
    return math.perm(n, k) if ordered else math.comb(n, k)


def mdm_bits(n: int, k: int, ordered: bool = True) -> int:
    """Whole bits per symbol, floor(log2(symbol count))"""
    return mdm_symbol_count(n, k, ordered).bit_length() - 1


@dataclass(eq=False)
class MdmSummary:
    """Message level success rates and SNR traces over the noise grid for a fixed message."""

    message: MdmMessage
    noise_levels: list[float]
    bob_success_rate: list[float]
    eve_success_rate: list[float]
    bob_snr: list[float]
    eve_snr: list[float]
    trials: int
    seed: Seed
    eve_success_max: float
    bob_success_min: float
    protecting_noise_level: float | None = field(default=None)

    def write_csv(self, file: str) -> None:
        logger.info(f"Writing MDM transcript to {file}")
        with atomic_write(file, newline="") as f:
            writer = csv.DictWriter(f, fieldnames=MDM_CSV_FIELDS)
            writer.writeheader()
            for j, level in enumerate(self.noise_levels):
                for side, snr, rate in [
                    (BOB, self.bob_snr[j], self.bob_success_rate[j]),
                    (EVE, self.eve_snr[j], self.eve_success_rate[j]),
                ]:
                    writer.writerow(
                        {
                            "channels": self.message.label(),
                            "noise_level": repr(level),
                            "side": side,
                            "mean_snr_db": db_str(snr),
                            "success_rate": repr(float(rate)),
                            "trials": self.trials,
                            "seed": self.seed,
                        }
                    )


def secure_mdm_trial(
    link: LinkConfig,
    message: MdmMessage,
    noise_levels: list[float],
    trials: int,
    seed: Seed,
    eve_success_max: float = 0.05,
    bob_success_min: float = 0.95,
    n_jobs: int | None = None,
) -> MdmSummary:
    """Sweep the artificial noise level for a fixed multi-channel message.

    The message is protected at a level when Eve's success rate is below eve_success_max while Bob's is
    at least bob_success_min. For k = 1 the trial seeds equal those of the matching noise_sweep cell.
    """
    if message.n != link.n:
        raise AnalysisException(f"Message is for {message.n} channels, link has {link.n}")
    levels = _validate_noise_levels(noise_levels)
    cells = [(message.active_channels, j, level) for j, level in enumerate(levels)]
    logger.info(f"MDM sweep of channels {message.label()} over {len(levels)} noise levels, {trials} trials")
    results = _run_cells(link, cells, trials, seed, n_jobs)

    protecting = None
    for level, (_, bob_rate, _, eve_rate) in zip(levels, results):
        if eve_rate < eve_success_max and bob_rate >= bob_success_min:
            protecting = level
            break
    return MdmSummary(
        message=message,
        noise_levels=levels,
        bob_snr=[r[0] for r in results],
        bob_success_rate=[r[1] for r in results],
        eve_snr=[r[2] for r in results],
        eve_success_rate=[r[3] for r in results],
        trials=trials,
        seed=seed,
        eve_success_max=eve_success_max,
        bob_success_min=bob_success_min,
        protecting_noise_level=protecting,
    )
