"""
Alice - Bob - Eve link model.

Alice precodes a message vector with the regularized inverse of the Alice to Bob transmission
matrix, optionally adding artificial noise before precoding. Bob observes the fiber output
directly. Eve taps the fiber, which couples mode i into her receiver with power factor sigma_i^2
(the tap profile), and equalizes with the regularized inverse of her effective channel.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property

import numpy as np
from fiber import DEFAULT_RHO, ModeBasis, edge_power_fraction
from matrix import PAPER_DEFAULT, AlphaRule, as_square, precoding_divisor, tikhonov_inverse, validate_alpha_rule
from util import Seed, complex_gaussian, make_rng

# Logging setup
logger = logging.getLogger("channel")

DEFAULT_SIGMA_SQ_MIN = 0.0028
DEFAULT_RECEIVER_NOISE_STD = 0.05


# ---------------------------
# Exceptions
# ---------------------------
@dataclass
class ChannelException(Exception):
    value: str


class TapScheme(StrEnum):
    """How tap coupling factors are assigned to channels"""

    edge = "edge"  # Proportional to the power in the core edge region
    linear = "linear"  # Linearly spaced, random assignment
    log = "log"  # Logarithmically spaced, random assignment


class NoiseScaling(StrEnum):
    """Reference for the artificial noise level.

    entry: E|n_i|^2 = (level * a)^2 for every entry
    vector: E||n||^2 = (level * a)^2 over the whole vector
    where a is the amplitude of one active message entry.
    """

    entry = "entry"
    vector = "vector"


# ---------------------------
# Tap profile
# ---------------------------
@dataclass(frozen=True, eq=False)
class TapProfile:
    """Per-mode power coupling factors into Eve's tap (diagonal of V).

    degenerate is set when construction could not spread the factors (all equal to 1).
    """

    sigma_sq: np.ndarray
    rho: float = DEFAULT_RHO
    sigma_sq_min: float = DEFAULT_SIGMA_SQ_MIN
    provenance: dict = field(default_factory=dict)
    degenerate: bool = False

    def __post_init__(self):
        sigma_sq = np.asarray(self.sigma_sq, dtype=float)
        if sigma_sq.ndim != 1 or len(sigma_sq) == 0:
            raise ChannelException(f"Tap profile must be a non-empty vector, got shape {sigma_sq.shape}")
        if np.any(sigma_sq <= 0) or np.any(sigma_sq > 1) or not np.all(np.isfinite(sigma_sq)):
            raise ChannelException("Tap coupling factors must be in (0, 1]")
        if sigma_sq.max() != 1.0:
            raise ChannelException(f"Largest tap coupling factor must be 1, got {sigma_sq.max()}")
        object.__setattr__(self, "sigma_sq", sigma_sq)

    def __len__(self) -> int:
        return len(self.sigma_sq)

    @property
    def amplitudes(self) -> np.ndarray:
        """Diagonal of sqrt(V)"""
        return np.sqrt(self.sigma_sq)

    @classmethod
    def identity(cls, n: int) -> "TapProfile":
        """No mode dependent coupling (V = I)"""
        return cls(sigma_sq=np.ones(n), sigma_sq_min=1.0, provenance={"scheme": "identity"}, degenerate=True)

    def external(self) -> dict:
        return {
            "sigma_sq": [float(s) for s in self.sigma_sq],
            "rho": self.rho,
            "sigma_sq_min": self.sigma_sq_min,
            "provenance": self.provenance,
            "degenerate": self.degenerate,
        }


def _validate_sigma_sq_min(sigma_sq_min: float) -> None:
    if not 0.0 < sigma_sq_min < 1.0:
        raise ChannelException(f"sigma_sq_min must be in (0, 1), got {sigma_sq_min}")


def build_tap_matrix(
    basis: ModeBasis, rho: float = DEFAULT_RHO, sigma_sq_min: float = DEFAULT_SIGMA_SQ_MIN
) -> TapProfile:
    """Tap factors proportional to each mode's power at r >= rho*a, mapped affinely onto [sigma_sq_min, 1].

    A basis where every mode has the same edge fraction gives an all-ones (degenerate) profile.
    """
    _validate_sigma_sq_min(sigma_sq_min)
    if len(basis) == 0:
        raise ChannelException("Cannot build a tap profile for an empty basis")

    fractions = np.array([edge_power_fraction(mode, basis.fiber, rho, grid=basis.grid) for mode in basis.modes])
    provenance = {"scheme": str(TapScheme.edge), "modes": len(basis)}
    f_min, f_max = float(fractions.min()), float(fractions.max())
    if f_max == f_min:
        logger.warning(f"Edge power fractions are all {f_min:.6f}, tap profile is flat")
        return TapProfile(
            sigma_sq=np.ones(len(basis)), rho=rho, sigma_sq_min=sigma_sq_min, provenance=provenance, degenerate=True
        )

    sigma_sq = sigma_sq_min + (fractions - f_min) * (1.0 - sigma_sq_min) / (f_max - f_min)
    # Pin the endpoints exactly
    sigma_sq[fractions == f_min] = sigma_sq_min
    sigma_sq[fractions == f_max] = 1.0
    logger.debug(f"Edge fractions at rho={rho} range {f_min:.6f} to {f_max:.6f}")
    return TapProfile(sigma_sq=sigma_sq, rho=rho, sigma_sq_min=sigma_sq_min, provenance=provenance)


def random_tap_profile(
    n: int, scheme: TapScheme | str, sigma_sq_min: float = DEFAULT_SIGMA_SQ_MIN, seed: Seed = 0
) -> TapProfile:
    """Linearly or logarithmically spaced factors on [sigma_sq_min, 1], randomly assigned to channels."""
    _validate_sigma_sq_min(sigma_sq_min)
    if n < 1:
        raise ChannelException(f"Tap profile dimension must be positive, got {n}")
    scheme = TapScheme(scheme)
    provenance = {"scheme": str(scheme), "modes": n, "seed": int(seed)}
    if n == 1:
        return TapProfile(sigma_sq=np.ones(1), sigma_sq_min=sigma_sq_min, provenance=provenance, degenerate=True)
    if scheme == TapScheme.linear:
        levels = np.linspace(sigma_sq_min, 1.0, n)
    elif scheme == TapScheme.log:
        levels = np.geomspace(sigma_sq_min, 1.0, n)
    else:
        raise ChannelException(f"Scheme {scheme} needs a mode basis, use build_tap_matrix")
    levels[0], levels[-1] = sigma_sq_min, 1.0
    sigma_sq = make_rng(seed).permutation(levels)
    return TapProfile(sigma_sq=sigma_sq, sigma_sq_min=sigma_sq_min, provenance=provenance)


# ---------------------------
# Link
# ---------------------------
@dataclass(frozen=True, eq=False)
class LinkConfig:
    """A complete Alice - Bob - Eve link. Immutable; derived matrices are computed once on first use.

    receiver_noise_std is relative to the amplitude a unit message entry arrives with (see noise_std).
    """

    t_ab: np.ndarray
    t_ae: np.ndarray
    tap: TapProfile
    receiver_noise_std: float = DEFAULT_RECEIVER_NOISE_STD
    alpha_rule: AlphaRule = PAPER_DEFAULT
    artificial_noise_level: float = 0.0
    noise_scaling: NoiseScaling = NoiseScaling.entry

    def __post_init__(self):
        t_ab = as_square(self.t_ab)
        t_ae = as_square(self.t_ae)
        if t_ab.shape != t_ae.shape:
            raise ChannelException(f"T_AB {t_ab.shape} and T_AE {t_ae.shape} dimensions differ")
        if len(self.tap) != t_ab.shape[0]:
            raise ChannelException(f"Tap profile has {len(self.tap)} entries, link has {t_ab.shape[0]} modes")
        if not (math.isfinite(self.receiver_noise_std) and self.receiver_noise_std >= 0):
            raise ChannelException(f"Receiver noise std must be non-negative, got {self.receiver_noise_std}")
        _validate_noise_level(self.artificial_noise_level)
        validate_alpha_rule(self.alpha_rule)
        object.__setattr__(self, "t_ab", t_ab)
        object.__setattr__(self, "t_ae", t_ae)
        object.__setattr__(self, "noise_scaling", NoiseScaling(self.noise_scaling))

    @property
    def n(self) -> int:
        return self.t_ab.shape[0]

    @cached_property
    def t_ab_inv(self) -> np.ndarray:
        """Alice's precoder T_AB^dagger"""
        return tikhonov_inverse(self.t_ab, self.alpha_rule)

    @cached_property
    def signal_scale(self) -> float:
        """1 / sqrt(tr(T^dagger T^dagger^H)), the amplitude of a unit message entry after an ideal link"""
        return 1.0 / precoding_divisor(self.t_ab_inv)

    @property
    def noise_std(self) -> float:
        """Absolute per-component receiver noise std"""
        return self.receiver_noise_std * self.signal_scale

    @cached_property
    def h(self) -> np.ndarray:
        """Eve's effective channel sqrt(V) T_AE T_AB^dagger"""
        return self.tap.amplitudes[:, None] * (self.t_ae @ self.t_ab_inv)

    @cached_property
    def h_inv(self) -> np.ndarray:
        return tikhonov_inverse(self.h, self.alpha_rule)

    def external(self) -> dict:
        return {
            "n": self.n,
            "receiver_noise_std": self.receiver_noise_std,
            "alpha_rule": str(self.alpha_rule),
            "artificial_noise_level": self.artificial_noise_level,
            "noise_scaling": str(self.noise_scaling),
            "tap": self.tap.external(),
        }


def _validate_noise_level(noise_level: float) -> None:
    if not (math.isfinite(noise_level) and 0.0 <= noise_level <= 1.0):
        raise ChannelException(f"Artificial noise level must be in [0, 1], got {noise_level}")


def _check_vector(x, n: int, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape != (n,):
        raise ChannelException(f"{name} has shape {x.shape}, expected ({n},)")
    return x


def artificial_noise(
    rng: np.random.Generator,
    n: int,
    noise_level: float,
    signal_amplitude: float,
    noise_scaling: NoiseScaling | str = NoiseScaling.entry,
) -> np.ndarray:
    """Complex white Gaussian artificial noise over all n mode coordinates."""
    if NoiseScaling(noise_scaling) == NoiseScaling.vector:
        std = noise_level * signal_amplitude / math.sqrt(2.0 * n)
    else:
        std = noise_level * signal_amplitude / math.sqrt(2.0)
    return complex_gaussian(rng, n, std)


def precode(
    t_ab,
    x,
    noise_level: float,
    alpha_rule: AlphaRule,
    seed: Seed | np.random.Generator,
    noise_scaling: NoiseScaling | str = NoiseScaling.entry,
    t_inv: np.ndarray | None = None,
) -> np.ndarray:
    """Alice's transmit vector: normalize_precoded(T^dagger (x + n~)).

    x must already be unit normalized. t_inv may pass a precomputed T^dagger for t_ab.
    """
    _validate_noise_level(noise_level)
    if t_inv is None:
        t_inv = tikhonov_inverse(t_ab, alpha_rule)
    n = t_inv.shape[1]
    x = _check_vector(x, n, "Message vector")
    if noise_level > 0:
        x = x + artificial_noise(make_rng(seed), n, noise_level, float(np.max(np.abs(x))), noise_scaling)
    return (t_inv @ x) / precoding_divisor(t_inv)


def transmit_bob(t_ab, x_precoded, noise_std: float, seed: Seed | np.random.Generator) -> np.ndarray:
    """y_B = T_AB x + n_B"""
    t_ab = np.asarray(t_ab, dtype=complex)
    y = t_ab @ _check_vector(x_precoded, t_ab.shape[1], "Precoded vector")
    if noise_std > 0:
        y = y + complex_gaussian(make_rng(seed), y.shape, noise_std)
    return y


def transmit_eve(t_ae, tap: TapProfile, x_precoded, noise_std: float, seed: Seed | np.random.Generator) -> np.ndarray:
    """y_E = sqrt(V) T_AE x + n_E"""
    t_ae = np.asarray(t_ae, dtype=complex)
    if len(tap) != t_ae.shape[0]:
        raise ChannelException(f"Tap profile has {len(tap)} entries, channel has {t_ae.shape[0]} outputs")
    y = tap.amplitudes * (t_ae @ _check_vector(x_precoded, t_ae.shape[1], "Precoded vector"))
    if noise_std > 0:
        y = y + complex_gaussian(make_rng(seed), y.shape, noise_std)
    return y


def eve_equalize(link: LinkConfig, y_e) -> np.ndarray:
    """Eve's estimate H^dagger y_E, H = sqrt(V) T_AE T_AB^dagger, same alpha rule as Alice"""
    return link.h_inv @ _check_vector(y_e, link.n, "Eve observation")
